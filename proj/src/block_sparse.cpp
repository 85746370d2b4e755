#include "sqs/block_sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ranking.hpp"

namespace sqs {

BlockParams make_block_params(std::uint64_t n, std::uint64_t b, std::uint64_t k, double eps,
                              std::uint64_t seed, double c3, double c4) {
  if (b == 0) throw std::invalid_argument("block length b must be positive");
  if (n == 0) throw std::invalid_argument("dimension n must be positive");
  if (k == 0 || k % b != 0) throw std::invalid_argument("k must be a positive multiple of b");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in (0, 1]");
  BlockParams p;
  p.n = n;
  p.b = b;
  p.k = k;
  p.s = k / b;
  p.t = (n + b - 1) / b;
  if (p.s > p.t) throw std::invalid_argument("more heavy blocks than blocks");
  p.eps = eps;
  p.seed = seed;
  const double log_n = std::max(1.0, std::log2(static_cast<double>(n)));
  p.m = static_cast<std::uint64_t>(std::ceil(c3 * log_n / (eps * eps)));
  p.l = std::max<std::uint64_t>(
      2 * p.s, static_cast<std::uint64_t>(std::ceil(c4 * static_cast<double>(p.s) / (eps * eps * eps))));
  return p;
}

PairwiseHash PairwiseHash::draw(Rng& rng) {
  return {1 + rng.below(kPrime - 1), rng.below(kPrime)};
}

std::uint64_t PairwiseHash::operator()(std::uint64_t key) const noexcept {
  const __uint128_t prod = static_cast<__uint128_t>(a) * (key % kPrime) + c;
  std::uint64_t r = (static_cast<std::uint64_t>(prod) & kPrime) + static_cast<std::uint64_t>(prod >> 61);
  r = (r & kPrime) + (r >> 61);
  return r >= kPrime ? r - kPrime : r;
}

BlockSketch bhh_build(const BlockParams& params) {
  if (params.b == 0 || params.m == 0 || params.l == 0)
    throw std::invalid_argument("block sketch needs b, m, l >= 1");
  BlockSketch out;
  out.params = params;
  Rng rng(params.seed);
  out.projector.resize(params.m * params.b);
  for (auto& v : out.projector) v = rng.normal();
  out.bucket_hash.reserve(params.m);
  out.sign_hash.reserve(params.m);
  for (std::uint64_t i = 0; i < params.m; ++i) {
    out.bucket_hash.push_back(PairwiseHash::draw(rng));
    out.sign_hash.push_back(PairwiseHash::draw(rng));
  }
  out.tables.assign(params.m * params.l, 0.0);
  return out;
}

namespace {

// (rho x_(T_block))_row; coordinates past n are zero padding.
double project(const BlockSketch& sk, std::span<const double> x, std::uint64_t row, std::uint64_t block) {
  const std::uint64_t b = sk.params.b;
  const std::uint64_t begin = block * b;
  const std::uint64_t end = std::min<std::uint64_t>(begin + b, x.size());
  const double* weights = sk.projector.data() + row * b;
  double acc = 0.0;
  for (std::uint64_t c = begin; c < end; ++c) acc += weights[c - begin] * x[c];
  return acc;
}

void check_signal(const BlockSketch& sk, std::span<const double> x) {
  if (x.size() != sk.params.n)
    throw std::invalid_argument("block sketch signal dimension " + std::to_string(x.size()) +
                                " does not match n=" + std::to_string(sk.params.n));
}

}  // namespace

void bhh_apply(BlockSketch& sketch, std::span<const double> x) {
  check_signal(sketch, x);
  std::fill(sketch.tables.begin(), sketch.tables.end(), 0.0);
  const auto tables = static_cast<std::int64_t>(sketch.params.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < tables; ++i) {
    const auto row = static_cast<std::uint64_t>(i);
    double* cells = sketch.tables.data() + row * sketch.params.l;
    for (std::uint64_t q = 0; q < sketch.params.t; ++q)
      cells[sketch.bucket(row, q)] += sketch.sign(row, q) * project(sketch, x, row, q);
  }
}

double bhh_estimate_block(const BlockSketch& sketch, std::uint64_t block) {
  if (block >= sketch.params.t)
    throw std::out_of_range("block " + std::to_string(block) + " out of range");
  std::vector<double> magnitudes(sketch.params.m);
  for (std::uint64_t j = 0; j < sketch.params.m; ++j)
    magnitudes[j] = std::abs(sketch.table(j)[sketch.bucket(j, block)]);
  return sketch.params.alpha * median_inplace(magnitudes);
}

std::vector<double> bhh_estimates(const BlockSketch& sketch) {
  std::vector<double> out(sketch.params.t);
  const auto t = static_cast<std::int64_t>(sketch.params.t);
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < t; ++q) out[q] = bhh_estimate_block(sketch, static_cast<std::uint64_t>(q));
  return out;
}

std::vector<std::uint64_t> bhh_top_blocks(const BlockSketch& sketch, std::uint64_t s) {
  const auto picked = detail::largest_positions(bhh_estimates(sketch), s);
  std::vector<std::uint64_t> out(picked.begin(), picked.end());
  std::sort(out.begin(), out.end());
  return out;
}

SupportSet bhh_locate(const BlockSketch& sketch, std::uint64_t s) {
  std::vector<Index> coords;
  const std::uint64_t b = sketch.params.b;
  for (std::uint64_t q : bhh_top_blocks(sketch, s)) {
    const std::uint64_t end = std::min<std::uint64_t>((q + 1) * b, sketch.params.n);
    for (std::uint64_t c = q * b; c < end; ++c) coords.push_back(c);
  }
  return SupportSet(std::move(coords));
}

double err_block(std::span<const double> x, std::uint64_t k, std::uint64_t b) {
  if (b == 0 || x.size() % b != 0) throw std::invalid_argument("block length must divide n");
  if (k % b != 0) throw std::invalid_argument("block length must divide k");
  const std::uint64_t t = x.size() / b;
  std::vector<double> energy(t, 0.0);
  for (std::uint64_t q = 0; q < t; ++q)
    for (std::uint64_t c = q * b; c < (q + 1) * b; ++c) energy[q] += x[c] * x[c];
  const std::uint64_t keep = std::min(k / b, t);
  std::sort(energy.begin(), energy.end(), std::greater<>());
  double rest = 0.0;
  for (std::uint64_t q = keep; q < t; ++q) rest += energy[q];
  return std::sqrt(rest);
}

BlockSparseSketch build_block_sparse_sketch(const BlockParams& params, std::uint32_t repetitions,
                                            std::uint32_t d) {
  if (repetitions == 0) throw std::invalid_argument("need at least one set-query repetition");
  BlockSparseSketch out{bhh_build(params), {}, {}};
  const double sq_eps = block_set_query_eps(params.eps);
  for (std::uint32_t r = 0; r < repetitions; ++r) {
    out.matrices.emplace_back(
        derive_params(params.n, params.k, sq_eps, Norm::L2, d, stream_seed(params.seed, r + 1)));
    out.sketches.push_back({out.matrices.back().params(), {}});
  }
  return out;
}

void measure(BlockSparseSketch& sketch, std::span<const double> x) {
  bhh_apply(sketch.heavy, x);
  for (std::size_t r = 0; r < sketch.matrices.size(); ++r) sketch.sketches[r] = sqs::apply(sketch.matrices[r], x);
}

SparseSignal recover_block_sparse(const BlockSketch& heavy, std::span<const SketchMatrix> matrices,
                                  std::span<const Sketch> sketches, Rng& rng) {
  const SupportSet support = bhh_locate(heavy, heavy.params.s);
  return recover_robust(matrices, sketches, support, rng);
}

SparseSignal recover_block_sparse(const BlockSparseSketch& sketch, Rng& rng) {
  return recover_block_sparse(sketch.heavy, sketch.matrices, sketch.sketches, rng);
}

namespace serial {

void bhh_apply(BlockSketch& sketch, std::span<const double> x) {
  check_signal(sketch, x);
  std::fill(sketch.tables.begin(), sketch.tables.end(), 0.0);
  const std::uint64_t b = sketch.params.b;
  for (std::uint64_t q = 0; q < sketch.params.t; ++q) {
    for (std::uint64_t i = 0; i < sketch.params.m; ++i) {
      double y = 0.0;
      for (std::uint64_t c = 0; c < b && q * b + c < x.size(); ++c)
        y += sketch.projector[i * b + c] * x[q * b + c];
      sketch.tables[i * sketch.params.l + sketch.bucket(i, q)] += sketch.sign(i, q) * y;
    }
  }
}

}  // namespace serial

}  // namespace sqs
