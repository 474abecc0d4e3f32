#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace eclf {

#ifdef ECLF_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

/// Throws std::runtime_error with `msg` when `cond` is false.
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);
std::string lower(const std::string& s);

/// Formats a floating value with enough digits to round-trip.
std::string fmt_real(double v);

bool parse_i64(const std::string& s, std::int64_t& out);
bool parse_u64(const std::string& s, std::uint64_t& out);
bool parse_f64(const std::string& s, double& out);

}  // namespace eclf
