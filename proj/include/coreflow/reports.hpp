#pragma once
// Toy-benchmark orchestration shared by the CLI `repro` command and the
// acceptance harness: resolve per-dataset pipeline constants from a
// RunConfig, run the full pipeline (coreset fit, low-rank lift, mean-field
// baseline, correction training, sampling, metrics), and render the
// resulting grid as a markdown table.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "coreflow/config.hpp"
#include "coreflow/coreset.hpp"
#include "coreflow/correction.hpp"
#include "coreflow/dataset.hpp"

namespace coreflow {

/// Per-dataset pipeline constants.  RunConfig entries set to "auto" resolve
/// to the calibrated defaults for the dataset; explicit values win.
struct ResolvedSetup {
  DatasetParams params;
  int K = 0;
  int rank = 1;
  double lambda = 0.0;
  int fit_pool = 10000;
  int fit_iters = 0;
  int eval_pool = 0;
};

ResolvedSetup resolve_setup(const RunConfig& cfg);
ResolvedSetup resolve_setup(const RunConfig& cfg, const std::string& dataset);

/// Pinned small-budget training recipes used by the benchmark grid.  The
/// constants live in reports.cpp next to their calibration notes.
TrainConfig toy_correction_recipe(const std::string& dataset, Coupling coupling,
                                  std::uint64_t seed);
TrainConfig toy_meanfield_recipe(const std::string& dataset,
                                 std::uint64_t seed);

/// Whether benchmark sampling reads EMA or raw weights for each net family.
bool toy_correction_use_ema();
bool toy_meanfield_use_ema();

struct BenchmarkRow {
  std::string label;
  int nfe = 0;  // 0 for rows without any network / flow evaluation
  double sw2 = std::numeric_limits<double>::quiet_NaN();
  double tv = std::numeric_limits<double>::quiet_NaN();
  double helix = std::numeric_limits<double>::quiet_NaN();
};

struct ToyBenchmark {
  std::string dataset;
  int eval_pool = 0;
  // SW2 between two disjoint target pools: the resolution limit below which
  // row differences are sampling noise.
  double noise_floor = std::numeric_limits<double>::quiet_NaN();
  std::vector<BenchmarkRow> rows;
  double seconds = 0.0;  // wall clock, reported on stdout only (never in files)
  CoresetGmm model;
};

/// Stable row labels (the acceptance harness looks rows up by these).
namespace bench_rows {
inline constexpr const char* kMeanField1 = "mean-field flow, 1 step";
inline constexpr const char* kMeanField8 = "mean-field flow, 8 steps";
inline constexpr const char* kSourceDraws = "source mixture draws";
inline constexpr const char* kSourceOneStep = "one-step source, L=0";
}  // namespace bench_rows

/// Label of a corrected row, e.g. "corrected (sinkhorn_anchored), L=8".
std::string corrected_label(Coupling coupling, int L);

/// Run the full benchmark pipeline for one dataset.  Correction training is
/// repeated once per requested coupling; all other rows are shared.  All
/// randomness derives from cfg["seed"].
ToyBenchmark run_toy_benchmark(const RunConfig& cfg, const std::string& dataset,
                               const std::vector<Coupling>& couplings);

/// Throws std::runtime_error when no row carries the label.
const BenchmarkRow& find_row(const ToyBenchmark& bench,
                             const std::string& label);

/// Markdown document with one table per dataset (deterministic: no timings).
std::string render_benchmark_markdown(const std::vector<ToyBenchmark>& benches);

}  // namespace coreflow
