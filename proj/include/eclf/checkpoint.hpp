#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eclf/tensor.hpp"

namespace eclf {

/// Serialized training state. File layout: magic "ECLFCKPT", u32 version,
/// payload (little-endian: iteration, RNG state, tensor table of
/// name/dtype/shape/raw data, optimizer step counts, config text, metric
/// log, selection metadata), then a CRC32 of everything after the magic.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint64_t iteration = 0;
    std::array<std::uint64_t, 4> rng_state{};
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::vector<std::pair<std::string, std::uint64_t>> opt_steps;
    std::string config_text;
    std::string metric_log;  // CSV, header included
    double best_score = 0.0;
    std::uint64_t best_iteration = 0;
    bool has_best = false;
    bool diverged = false;

    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace eclf
