#include "eclf/synthleaf.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "eclf/util.hpp"

namespace fs = std::filesystem;

namespace eclf {

void FactorRecord::validate() const {
    require(base_hue >= 0.0 && base_hue <= 1.0, "factor base_hue out of range [0,1]");
    require(spot_count >= 0, "factor spot_count must be >= 0");
    require(spot_radius > 0.0, "factor spot_radius must be positive");
    require(spot_darkness >= 0.0 && spot_darkness <= 1.0, "factor spot_darkness out of range [0,1]");
    require(shape_eccentricity >= 0.0 && shape_eccentricity <= 1.0,
            "factor shape_eccentricity out of range [0,1]");
}

const char* split_name(SplitKind s) {
    switch (s) {
        case SplitKind::train: return "train";
        case SplitKind::val: return "val";
        default: return "test";
    }
}

DataPreset parse_preset(const std::string& name) {
    const std::string n = lower(trim(name));
    if (n == "synth2") return DataPreset::synth2;
    if (n == "synth3") return DataPreset::synth3;
    if (n == "synth4") return DataPreset::synth4;
    if (n == "folder") return DataPreset::folder;
    throw std::runtime_error("unknown dataset preset '" + name + "'");
}

const char* preset_name(DataPreset p) {
    switch (p) {
        case DataPreset::synth2: return "synth2";
        case DataPreset::synth3: return "synth3";
        case DataPreset::synth4: return "synth4";
        default: return "folder";
    }
}

void DatasetSpec::validate() const {
    require(image_size >= 16, "dataset image_size must be >= 16");
    require(train_per_class >= 1 && val_per_class >= 1 && test_per_class >= 1,
            "dataset split counts must be >= 1");
    if (preset != DataPreset::folder) {
        require(hue_threshold - hue_margin > 0.02 && hue_threshold + hue_margin < 0.98,
                "degenerate hue threshold/margin leaves an empty class region");
        require(spot_threshold >= 1, "spot_threshold must be >= 1");
    } else {
        require(!folder_root.empty(), "folder preset requires folder_root");
    }
}

namespace {

struct Rgb {
    double r, g, b;
};

constexpr Rgb kGreen{0.13, 0.55, 0.16};
constexpr Rgb kYellow{0.80, 0.72, 0.12};
constexpr Rgb kLesion{0.30, 0.18, 0.04};
constexpr double kBackground = 0.08;

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

struct Spot {
    double cx, cy, r;  // unit coordinates
};

/// Candidate stream for lesion centers. Acceptance does not depend on the
/// requested count, so spot sets grow by prefix as the count grows.
std::vector<Spot> place_spots(const FactorRecord& f, int size) {
    std::vector<Spot> spots;
    if (f.spot_count == 0) return spots;
    const double a = 0.42;
    const double b = 0.42 * (1.0 - 0.55 * f.shape_eccentricity);
    const double r_unit = f.spot_radius / size;
    Rng rng(derive_seed(f.seed, 0x5EEDu));
    int candidates = 0;
    bool allow_overlap = false;
    while (static_cast<int>(spots.size()) < f.spot_count) {
        if (candidates >= 4096 && !allow_overlap) allow_overlap = true;
        ++candidates;
        const double cx = 0.5 + rng.uniform(-1.0, 1.0) * a;
        const double cy = 0.5 + rng.uniform(-1.0, 1.0) * b;
        const double ex = (cx - 0.5) / a, ey = (cy - 0.5) / b;
        if (ex * ex + ey * ey > 0.64) continue;  // keep lesions well inside the leaf
        bool clash = false;
        if (!allow_overlap) {
            for (const auto& s : spots) {
                const double dx = (cx - s.cx) * size, dy = (cy - s.cy) * size;
                const double min_d = f.spot_radius + s.r * size + 1.0;
                if (dx * dx + dy * dy < min_d * min_d) {
                    clash = true;
                    break;
                }
            }
        }
        if (!clash) spots.push_back({cx, cy, r_unit});
    }
    return spots;
}

}  // namespace

Image render(const FactorRecord& factors, int size) {
    factors.validate();
    require(size >= 16, "render: size must be >= 16");

    const double a = 0.42;
    const double b = 0.42 * (1.0 - 0.55 * factors.shape_eccentricity);
    const Rgb base = lerp(kGreen, kYellow, factors.base_hue);
    const std::vector<Spot> spots = place_spots(factors, size);

    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double ux = (x + 0.5) / size;
            const double uy = (y + 0.5) / size;
            const double ex = (ux - 0.5) / a, ey = (uy - 0.5) / b;
            const double rr = ex * ex + ey * ey;
            Rgb px{kBackground, kBackground, kBackground};
            if (rr <= 1.0) {
                const double shade = 1.0 - 0.25 * rr;  // gentle radial falloff
                px = {base.r * shade, base.g * shade, base.b * shade};
                for (const auto& s : spots) {
                    const double dx = ux - s.cx, dy = uy - s.cy;
                    if (dx * dx + dy * dy <= s.r * s.r) {
                        px = lerp(px, kLesion, factors.spot_darkness);
                        break;
                    }
                }
            }
            img.at(y, x, 0) = static_cast<real>(px.r);
            img.at(y, x, 1) = static_cast<real>(px.g);
            img.at(y, x, 2) = static_cast<real>(px.b);
        }
    }
    return img;
}

std::int64_t spot_pixel_count(const FactorRecord& factors, int size) {
    FactorRecord spotless = factors;
    spotless.spot_count = 0;
    const Image with = render(factors, size);
    const Image without = render(spotless, size);
    std::int64_t n = 0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            bool diff = false;
            for (int c = 0; c < 3; ++c) diff |= with.at(y, x, c) != without.at(y, x, c);
            n += diff ? 1 : 0;
        }
    }
    return n;
}

namespace {

struct ClassRegion {
    // hue/spot regions describing one subpopulation: [hue_lo, hue_hi],
    // spot counts in [spot_lo, spot_hi]
    double hue_lo, hue_hi;
    int spot_lo, spot_hi;
};

struct ClassDef {
    std::string name;
    std::vector<ClassRegion> regions;  // sample uniformly over regions
};

std::vector<ClassDef> preset_classes(const DatasetSpec& spec) {
    const double hue_low_lo = 0.05;
    const double hue_low_hi = spec.hue_threshold - spec.hue_margin;
    const double hue_high_lo = spec.hue_threshold + spec.hue_margin;
    const double hue_high_hi = 0.95;
    const int spots_low_lo = 0, spots_low_hi = std::max(0, spec.spot_threshold - 1);
    const int spots_high_lo = spec.spot_threshold + 2, spots_high_hi = spec.spot_threshold + 4;
    require(hue_low_lo < hue_low_hi && hue_high_lo < hue_high_hi,
            "degenerate hue threshold/margin leaves an empty class region");

    const ClassRegion low_low{hue_low_lo, hue_low_hi, spots_low_lo, spots_low_hi};
    const ClassRegion high_low{hue_low_lo, hue_low_hi, spots_high_lo, spots_high_hi};
    const ClassRegion low_high{hue_high_lo, hue_high_hi, spots_low_lo, spots_low_hi};
    const ClassRegion high_high{hue_high_lo, hue_high_hi, spots_high_lo, spots_high_hi};

    switch (spec.preset) {
        case DataPreset::synth2:
            // diseased = many spots AND yellowed; healthy mixes the three
            // complement regions so neither factor separates classes alone
            return {{"healthy", {low_low, high_low, low_high}}, {"diseased", {high_high}}};
        case DataPreset::synth3:
            return {{"healthy", {low_low}}, {"spot_blight", {high_low}}, {"yellowing", {low_high}}};
        case DataPreset::synth4:
            return {{"healthy", {low_low}},
                    {"spot_blight", {high_low}},
                    {"yellowing", {low_high}},
                    {"double_blight", {high_high}}};
        default:
            throw std::runtime_error("preset_classes: not a synthetic preset");
    }
}

FactorRecord sample_factors(const ClassDef& cls, Rng& rng, std::uint64_t sample_seed, int image_size) {
    const ClassRegion& region = cls.regions[rng.below(cls.regions.size())];
    FactorRecord f;
    f.base_hue = rng.uniform(region.hue_lo, region.hue_hi);
    f.spot_count = region.spot_lo + static_cast<int>(rng.below(
                       static_cast<std::uint64_t>(region.spot_hi - region.spot_lo + 1)));
    f.spot_radius = rng.uniform(0.07, 0.11) * image_size;
    f.spot_darkness = rng.uniform(0.65, 0.95);
    f.shape_eccentricity = rng.uniform(0.1, 0.9);
    f.seed = sample_seed;
    return f;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    require(spec.preset != DataPreset::folder, "generate_dataset: use ingest_folder for folder data");
    const std::vector<ClassDef> classes = preset_classes(spec);
    require(classes.size() >= 2, "dataset needs at least 2 classes");

    Dataset ds;
    ds.image_size = spec.image_size;
    for (const auto& c : classes) ds.class_names.push_back(c.name);

    const SplitKind splits[3] = {SplitKind::train, SplitKind::val, SplitKind::test};
    const int counts[3] = {spec.train_per_class, spec.val_per_class, spec.test_per_class};
    for (int si = 0; si < 3; ++si) {
        for (std::size_t ci = 0; ci < classes.size(); ++ci) {
            for (int i = 0; i < counts[si]; ++i) {
                const std::uint64_t tag =
                    (static_cast<std::uint64_t>(si) << 40) | (static_cast<std::uint64_t>(ci) << 24) |
                    static_cast<std::uint64_t>(i);
                const std::uint64_t sample_seed = derive_seed(spec.master_seed, tag);
                Rng rng(sample_seed);
                LabeledSample s;
                s.class_id = static_cast<int>(ci);
                s.factors = sample_factors(classes[ci], rng, sample_seed, spec.image_size);
                s.image = render(*s.factors, spec.image_size);
                const int idx = static_cast<int>(ds.samples.size());
                ds.samples.push_back(std::move(s));
                switch (splits[si]) {
                    case SplitKind::train: ds.train_idx.push_back(idx); break;
                    case SplitKind::val: ds.val_idx.push_back(idx); break;
                    case SplitKind::test: ds.test_idx.push_back(idx); break;
                }
            }
        }
    }
    return ds;
}

Dataset ingest_folder(const std::string& root, const DatasetSpec& spec) {
    require(spec.image_size >= 16, "dataset image_size must be >= 16");
    require(fs::is_directory(root), "ingest_folder: not a directory: " + root);

    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    require(class_dirs.size() >= 2, "ingest_folder: need at least 2 class directories under " + root);

    Dataset ds;
    ds.image_size = spec.image_size;
    ds.class_names = class_dirs;

    for (std::size_t ci = 0; ci < class_dirs.size(); ++ci) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[ci])) {
            if (!e.is_regular_file()) continue;
            if (lower(e.path().extension().string()) == ".png") files.push_back(e.path().filename().string());
        }
        require(!files.empty(), "ingest_folder: class directory '" + class_dirs[ci] + "' has no PNG images");
        const int needed = spec.val_per_class + spec.test_per_class;
        require(static_cast<int>(files.size()) > needed,
                "ingest_folder: class '" + class_dirs[ci] + "' has " + std::to_string(files.size()) +
                    " images but the requested splits need more than " + std::to_string(needed));

        // deterministic split: order by a hash of (master seed, filename)
        std::sort(files.begin(), files.end());
        std::vector<std::pair<std::uint64_t, std::string>> keyed;
        keyed.reserve(files.size());
        for (const auto& name : files) {
            std::uint64_t h = 1469598103934665603ULL;
            for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
            keyed.emplace_back(derive_seed(spec.master_seed, h), name);
        }
        std::sort(keyed.begin(), keyed.end());

        for (std::size_t i = 0; i < keyed.size(); ++i) {
            const std::string path = (fs::path(root) / class_dirs[ci] / keyed[i].second).string();
            Image img;
            try {
                img = read_png(path);
            } catch (const std::exception& e) {
                throw std::runtime_error("ingest_folder: unreadable image " + path + ": " + e.what());
            }
            LabeledSample s;
            s.image = resize_bilinear(img, spec.image_size, spec.image_size);
            s.class_id = static_cast<int>(ci);
            const int idx = static_cast<int>(ds.samples.size());
            ds.samples.push_back(std::move(s));
            if (i < static_cast<std::size_t>(spec.test_per_class))
                ds.test_idx.push_back(idx);
            else if (i < static_cast<std::size_t>(spec.test_per_class + spec.val_per_class))
                ds.val_idx.push_back(idx);
            else
                ds.train_idx.push_back(idx);
        }
    }
    return ds;
}

namespace {

std::string factors_to_str(const FactorRecord& f) {
    std::ostringstream ss;
    ss << "hue:" << fmt_real(f.base_hue) << ",spots:" << f.spot_count
       << ",radius:" << fmt_real(f.spot_radius) << ",darkness:" << fmt_real(f.spot_darkness)
       << ",ecc:" << fmt_real(f.shape_eccentricity) << ",seed:" << f.seed;
    return ss.str();
}

FactorRecord factors_from_str(const std::string& s) {
    FactorRecord f;
    for (const auto& part : split(s, ',')) {
        const auto kv = split(part, ':');
        require(kv.size() == 2, "manifest: bad factor field '" + part + "'");
        double d = 0.0;
        std::int64_t i = 0;
        std::uint64_t u = 0;
        const std::string& k = kv[0];
        if (k == "hue" && parse_f64(kv[1], d)) f.base_hue = d;
        else if (k == "spots" && parse_i64(kv[1], i)) f.spot_count = static_cast<int>(i);
        else if (k == "radius" && parse_f64(kv[1], d)) f.spot_radius = d;
        else if (k == "darkness" && parse_f64(kv[1], d)) f.spot_darkness = d;
        else if (k == "ecc" && parse_f64(kv[1], d)) f.shape_eccentricity = d;
        else if (k == "seed" && parse_u64(kv[1], u)) f.seed = u;
        else throw std::runtime_error("manifest: bad factor field '" + part + "'");
    }
    return f;
}

SplitKind split_from_str(const std::string& s) {
    if (s == "train") return SplitKind::train;
    if (s == "val") return SplitKind::val;
    if (s == "test") return SplitKind::test;
    throw std::runtime_error("manifest: unknown split '" + s + "'");
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(sep);
        out += v[i];
    }
    return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    std::ostringstream manifest;
    manifest << "classes = " << join(ds.class_names, ',') << "\n";
    manifest << "image_size = " << ds.image_size << "\n";

    auto emit = [&](SplitKind split, const std::vector<int>& idx) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto& s = ds.samples[static_cast<std::size_t>(idx[i])];
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%05zu.png", split_name(split), i);
            write_png((fs::path(dir) / "images" / name).string(), s.image);
            manifest << "sample = images/" << name << "|" << split_name(split) << "|" << s.class_id
                     << "|" << (s.factors ? factors_to_str(*s.factors) : "none") << "\n";
        }
    };
    emit(SplitKind::train, ds.train_idx);
    emit(SplitKind::val, ds.val_idx);
    emit(SplitKind::test, ds.test_idx);
    write_text_file((fs::path(dir) / "manifest.txt").string(), manifest.str());
}

Dataset load_dataset(const std::string& dir) {
    const std::string text = read_text_file((fs::path(dir) / "manifest.txt").string());
    Dataset ds;
    for (const auto& raw_line : split(text, '\n')) {
        const std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "manifest: bad line '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "classes") {
            for (auto& c : split(value, ',')) ds.class_names.push_back(trim(c));
        } else if (key == "image_size") {
            std::int64_t n = 0;
            require(parse_i64(value, n), "manifest: bad image_size");
            ds.image_size = static_cast<int>(n);
        } else if (key == "sample") {
            const auto parts = split(value, '|');
            require(parts.size() == 4, "manifest: bad sample line '" + value + "'");
            LabeledSample s;
            s.image = read_png((fs::path(dir) / trim(parts[0])).string());
            s.class_id = static_cast<int>(std::stol(parts[2]));
            if (trim(parts[3]) != "none") s.factors = factors_from_str(trim(parts[3]));
            const int idx = static_cast<int>(ds.samples.size());
            ds.samples.push_back(std::move(s));
            switch (split_from_str(trim(parts[1]))) {
                case SplitKind::train: ds.train_idx.push_back(idx); break;
                case SplitKind::val: ds.val_idx.push_back(idx); break;
                case SplitKind::test: ds.test_idx.push_back(idx); break;
            }
        } else {
            throw std::runtime_error("manifest: unknown key '" + key + "'");
        }
    }
    require(!ds.samples.empty(), "manifest: dataset is empty");
    require(!ds.class_names.empty(), "manifest: missing classes header");
    return ds;
}

}  // namespace eclf
