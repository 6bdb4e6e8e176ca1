#pragma once

#include <string>
#include <vector>

#include "bhc/config.hpp"

namespace bhc {

/// Executes the configured command and writes its artifacts (CSV/JSON plus
/// a manifest listing every data file) into cfg.out_dir, creating the
/// directory if needed. Returns 0 on success. On any library error an
/// error.json naming the error type is written there instead and the return
/// is nonzero. n_threads only changes scheduling; outputs are byte-identical
/// for any value.
int run(const RunConfig& cfg, int n_threads = 1);

/// Shortest decimal representation that round-trips to the same double
/// (used for every floating-point value in CSV/JSON artifacts).
std::string format_double(double v);

}  // namespace bhc
