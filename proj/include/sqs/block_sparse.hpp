#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqs/rng.hpp"
#include "sqs/set_query.hpp"
#include "sqs/signal.hpp"
#include "sqs/sketch_core.hpp"

namespace sqs {

/// 1 / Phi^{-1}(3/4): alpha * median(|N(0, s^2)|) is consistent for s.
inline constexpr double kHalfNormalMedianScale = 1.4826;

struct BlockParams {
  std::uint64_t n = 0;  // original dimension; blocks past n are zero padding
  std::uint64_t b = 1;  // block length
  std::uint64_t k = 0;  // sparsity, a multiple of b
  std::uint64_t s = 0;  // k / b heavy blocks
  std::uint64_t t = 0;  // ceil(n / b) blocks
  double eps = 0.5;
  std::uint64_t m = 0;  // projections per block = number of hash tables
  std::uint64_t l = 0;  // table width
  std::uint64_t seed = 0;
  double alpha = kHalfNormalMedianScale;

  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

/// m = ceil(c3 log2(n) / eps^2), l = max(ceil(c4 s / eps^3), 2s).
/// Requires b | k and s <= t; n need not be a multiple of b.
BlockParams make_block_params(std::uint64_t n, std::uint64_t b, std::uint64_t k, double eps,
                              std::uint64_t seed, double c3 = 4.0, double c4 = 2.0);

/// Degree-1 polynomial hash over the Mersenne prime 2^61 - 1. Pairwise
/// independent over keys below the prime.
struct PairwiseHash {
  static constexpr std::uint64_t kPrime = (1ULL << 61) - 1;
  std::uint64_t a = 1;
  std::uint64_t c = 0;

  static PairwiseHash draw(Rng& rng);
  std::uint64_t operator()(std::uint64_t key) const noexcept;

  friend bool operator==(const PairwiseHash&, const PairwiseHash&) = default;
};

/// Block heavy-hitters sketch: every block is projected by a shared Gaussian
/// m x b matrix, and coordinate i of each projection is hashed with a random
/// sign into table i.
struct BlockSketch {
  BlockParams params;
  std::vector<double> projector;          // m x b, row-major, i.i.d. N(0, 1)
  std::vector<PairwiseHash> bucket_hash;  // per table: block -> [l]
  std::vector<PairwiseHash> sign_hash;    // per table: block -> parity -> +-1
  std::vector<double> tables;             // m x l, row-major

  std::uint64_t bucket(std::uint64_t table, std::uint64_t block) const noexcept {
    return bucket_hash[table](block) % params.l;
  }
  double sign(std::uint64_t table, std::uint64_t block) const noexcept {
    return (sign_hash[table](block) & 1ULL) ? -1.0 : 1.0;
  }
  std::span<const double> table(std::uint64_t i) const noexcept {
    return {tables.data() + i * params.l, params.l};
  }

  friend bool operator==(const BlockSketch&, const BlockSketch&) = default;
};

/// Draws the projector and hash functions; tables start at zero.
BlockSketch bhh_build(const BlockParams& params);

/// Resets the tables and fills them from x (length n). Tables are computed in
/// parallel, each independently, so the result matches serial::bhh_apply
/// bitwise.
void bhh_apply(BlockSketch& sketch, std::span<const double> x);

/// alpha * median_j |H^(j)[h_j(block)]|, an estimate of the block's l2 norm.
double bhh_estimate_block(const BlockSketch& sketch, std::uint64_t block);

/// All block estimates.
std::vector<double> bhh_estimates(const BlockSketch& sketch);

/// Indices of the s blocks with the largest estimates (ties to the lower
/// block), ascending.
std::vector<std::uint64_t> bhh_top_blocks(const BlockSketch& sketch, std::uint64_t s);

/// Union of the s selected blocks as coordinates in [0, n).
SupportSet bhh_locate(const BlockSketch& sketch, std::uint64_t s);

/// l2 distance from x to its best (k, b)-block-sparse approximation.
/// Requires b | x.size() and b | k.
double err_block(std::span<const double> x, std::uint64_t k, std::uint64_t b);

/// Block heavy hitters plus set-query repetitions over the located support.
struct BlockSparseSketch {
  BlockSketch heavy;
  std::vector<SketchMatrix> matrices;
  std::vector<Sketch> sketches;
};

/// Set-query eps used inside the block pipeline: eps / 3.
inline double block_set_query_eps(double eps) { return eps / 3.0; }

/// Draws all measurement structures (no data yet). The set-query matrices are
/// sized for support k at eps / 3.
BlockSparseSketch build_block_sparse_sketch(const BlockParams& params, std::uint32_t repetitions,
                                            std::uint32_t d = kDefaultColumnSparsity);

/// Measures x with every structure.
void measure(BlockSparseSketch& sketch, std::span<const double> x);

/// Locate heavy blocks, then estimate on them by set query. The output is
/// (k, b)-block-sparse. Throws RecoveryAborted if every repetition aborts.
SparseSignal recover_block_sparse(const BlockSketch& heavy, std::span<const SketchMatrix> matrices,
                                  std::span<const Sketch> sketches, Rng& rng);
SparseSignal recover_block_sparse(const BlockSparseSketch& sketch, Rng& rng);

namespace serial {

void bhh_apply(BlockSketch& sketch, std::span<const double> x);

}  // namespace serial

}  // namespace sqs
