#pragma once

#include <iosfwd>
#include <string>

#include "sfset/sf_dp.hpp"

namespace sfs {

/// Binary layout (native little-endian): magic "SFSET\x01"; u64 model
/// fingerprint; i32 d, k, A, O, iteration; u64 direction seed; i32 N; N
/// directions d x k row-major; then per (a, o) in a-major order: i32 |R|, R,
/// i32 n, n blocks d x |R| row-major, N i32 slots.
void write_sfset(std::ostream& out, const SFSet& set);
SFSet read_sfset(std::istream& in);
void save_sfset(const SFSet& set, const std::string& path);
SFSet load_sfset(const std::string& path);

/// First line of every trace CSV.
inline constexpr const char* kTraceHeader = "# sfset-trace v1";
inline constexpr const char* kTraceColumns =
    "iteration,max_error_optimized,max_error_fresh,fresh_error_stderr,max_support_change,num_points,wall_time";

void write_trace_csv(std::ostream& out, const DpTrace& trace);
DpTrace read_trace_csv(std::istream& in);
void save_trace_csv(const DpTrace& trace, const std::string& path);

}  // namespace sfs
