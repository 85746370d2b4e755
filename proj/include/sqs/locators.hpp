#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqs/rng.hpp"
#include "sqs/set_query.hpp"
#include "sqs/signal.hpp"
#include "sqs/sketch_core.hpp"

namespace sqs {

struct CountSketchParams {
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  std::uint64_t rows = 1;
  std::uint64_t width = 2;
  std::uint64_t seed = 0;
  std::uint64_t candidate_multiplier = 9;

  friend bool operator==(const CountSketchParams&, const CountSketchParams&) = default;
};

/// rows = ceil(c1 log2 n), width = max(ceil(c2 k / eps^2), 2k).
CountSketchParams make_count_sketch_params(std::uint64_t n, std::uint64_t k, double eps,
                                           std::uint64_t seed, double c1 = 4.0, double c2 = 6.0);

/// Count-Sketch: `rows` independent hash rows, each mapping coordinate i to a
/// bucket h_r(i) with sign g_r(i). Hashes are a seeded pseudorandom function
/// evaluated on demand, so the table stores only rows * width reals.
class CountSketchTable {
 public:
  explicit CountSketchTable(const CountSketchParams& params);

  const CountSketchParams& params() const noexcept { return params_; }
  std::uint64_t bucket(std::uint64_t row, Index i) const noexcept;
  double sign(std::uint64_t row, Index i) const noexcept;
  std::span<const double> row_values(std::uint64_t row) const noexcept {
    return {cells_.data() + row * params_.width, params_.width};
  }
  std::span<double> row_values(std::uint64_t row) noexcept {
    return {cells_.data() + row * params_.width, params_.width};
  }
  std::span<const double> cells() const noexcept { return cells_; }

  friend bool operator==(const CountSketchTable&, const CountSketchTable&) = default;

 private:
  CountSketchParams params_;
  std::vector<std::uint64_t> row_seeds_;
  std::vector<double> cells_;
};

/// Fresh zero table with hashes drawn from params.seed.
inline CountSketchTable cs_build(const CountSketchParams& params) { return CountSketchTable(params); }

/// Table of x; rows are filled in parallel, each in coordinate order, so the
/// result matches serial::cs_apply bitwise.
CountSketchTable cs_apply(const CountSketchParams& params, std::span<const double> x);

/// cell[h_r(i)] += g_r(i) * delta in every row.
void cs_update(CountSketchTable& table, Index i, double delta);

/// Median over rows of g_r(i) * cell_r[h_r(i)].
double cs_estimate(const CountSketchTable& table, Index i);

/// The candidate_multiplier * k coordinates of largest |estimate| (ties to
/// the lower index), clamped to n.
SupportSet locate_candidates(const CountSketchTable& table, std::uint64_t k);

/// Keeps the k largest-magnitude coordinates (ties to the lower index).
std::vector<double> top_k_threshold(std::span<const double> x, std::uint64_t k);
SparseSignal top_k_threshold(const SparseSignal& x, std::uint64_t k);

/// Distance from x to its best k-sparse approximation.
double err_top_k(std::span<const double> x, std::uint64_t k);

/// eps / (3 sqrt(log2 n)), the set-query accuracy used by the Zipfian pipeline.
double zipfian_set_query_eps(double eps, std::uint64_t n);

/// Count-Sketch locator plus set-query repetitions sized for the candidate set.
struct ZipfianSketch {
  CountSketchTable locator;
  std::vector<SketchMatrix> matrices;
  std::vector<Sketch> sketches;
};

struct ZipfianConfig {
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double eps = 1.0;                    // end-to-end accuracy target
  double set_query_eps = 0.0;          // 0: zipfian_set_query_eps(eps, n)
  std::uint32_t repetitions = 1;
  std::uint32_t d = kDefaultColumnSparsity;
  std::uint64_t seed = 0;
};

/// Draws all structures and measures x.
ZipfianSketch build_zipfian_sketch(const ZipfianConfig& config, std::span<const double> x);

/// Candidate support from the locator, set query on it, then top-k
/// thresholding. Returns a k-sparse signal. Throws RecoveryAborted if every
/// set-query repetition aborts.
SparseSignal recover_zipfian(const CountSketchTable& locator, std::span<const SketchMatrix> matrices,
                             std::span<const Sketch> sketches, std::uint64_t k, Rng& rng);
SparseSignal recover_zipfian(const ZipfianSketch& sketch, std::uint64_t k, Rng& rng);

namespace serial {

CountSketchTable cs_apply(const CountSketchParams& params, std::span<const double> x);

}  // namespace serial

}  // namespace sqs
