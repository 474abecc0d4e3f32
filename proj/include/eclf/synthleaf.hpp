#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eclf/image.hpp"
#include "eclf/rng.hpp"

namespace eclf {

/// Ground-truth generative factors for one synthetic leaf image. The record
/// plus the image size fully determines the rendered pixels.
struct FactorRecord {
    double base_hue = 0.2;          // 0 = green, 1 = yellow
    int spot_count = 0;             // number of dark lesions
    double spot_radius = 2.0;       // lesion radius in pixels
    double spot_darkness = 0.8;     // 0 = invisible, 1 = full lesion color
    double shape_eccentricity = 0.3;// 0 = round leaf, 1 = maximally flattened
    std::uint64_t seed = 0;         // drives lesion placement

    void validate() const;
};

struct LabeledSample {
    Image image;
    int class_id = 0;
    std::optional<FactorRecord> factors;  // synthetic data only
};

enum class SplitKind { train, val, test };
const char* split_name(SplitKind s);

enum class DataPreset { synth2, synth3, synth4, folder };
DataPreset parse_preset(const std::string& name);
const char* preset_name(DataPreset p);

struct DatasetSpec {
    DataPreset preset = DataPreset::synth2;
    int image_size = 32;
    int train_per_class = 200;
    int val_per_class = 30;
    int test_per_class = 30;
    std::uint64_t master_seed = 1;

    // class thresholds for the synthetic presets; diseased-style classes sit
    // above (threshold + margin), healthy-style strictly below
    // (threshold - margin)
    double hue_threshold = 0.5;
    double hue_margin = 0.1;
    int spot_threshold = 3;

    std::string folder_root;  // preset == folder only

    void validate() const;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<int> train_idx, val_idx, test_idx;
    std::vector<std::string> class_names;
    int image_size = 0;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    const std::vector<int>& split(SplitKind s) const {
        switch (s) {
            case SplitKind::train: return train_idx;
            case SplitKind::val: return val_idx;
            default: return test_idx;
        }
    }
};

/// Renders the leaf described by `factors` at size x size pixels.
/// Deterministic; lesion placement comes from a candidate stream derived
/// from the record seed, so the lesions for count n are a prefix of those
/// for count n+1 (after 4096 rejected candidates the remaining lesions are
/// placed at the next candidates regardless of overlap).
Image render(const FactorRecord& factors, int size);

/// Count of pixels that differ from the same record rendered without spots.
std::int64_t spot_pixel_count(const FactorRecord& factors, int size);

Dataset generate_dataset(const DatasetSpec& spec);

/// Reads a folder with one subdirectory of PNGs per class. Splits are
/// assigned per class by ordering filenames by a hash keyed on the master
/// seed: first test_per_class files to test, next val_per_class to val,
/// remainder to train.
Dataset ingest_folder(const std::string& root, const DatasetSpec& spec);

/// Persists the dataset as a directory of PNGs plus a manifest.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace eclf
