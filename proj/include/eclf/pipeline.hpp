#pragma once

#include <string>

#include "eclf/config.hpp"

namespace eclf {

/// Creates an append-only timestamped run directory under `out_root`;
/// collisions get an increasing numeric suffix.
std::string make_run_dir(const std::string& out_root, const std::string& command,
                         std::uint64_t seed);

/// Executes one CLI command, writing artifacts and the resolved config
/// snapshot into a fresh run directory. Returns the run directory.
/// Commands: gen-data, ingest, train-vae, train-cls, explain, eval, sweep.
std::string run_command(const std::string& command, const RunConfig& cfg);

}  // namespace eclf
