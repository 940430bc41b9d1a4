#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "planepose/eval.hpp"
#include "planepose/recovery.hpp"

namespace planepose::cli {

/// Exit codes: 0 success, 1 domain error, 2 usage error.
int run(int argc, const char* const* argv);

struct LoocvOptions {
  std::vector<std::filesystem::path> volumes;  // volume headers, one fold each
  int n_test = 8;
  std::uint64_t seed = 0;
  RecoveryConfig recovery;
  /// Test slices need at least this fraction of nonzero pixels.
  double min_content = 0.5;
  std::filesystem::path out_dir;
};

struct LoocvResult {
  std::vector<FoldReport> folds;
  /// For each fold: which reference volumes were searched (never the fold's own).
  std::vector<std::vector<std::string>> references;
  FoldReport aggregate;
  FoldReport pooled;
  bool fixed_point_ok = false;
};

/// Holds out each volume in turn as the source of test slices and recovers
/// their poses against every other volume, keeping the best-scoring one.
/// Writes per-fold datasets, predictions and reports plus the aggregate
/// tables under out_dir.
LoocvResult run_loocv(const LoocvOptions& opts);

}  // namespace planepose::cli
