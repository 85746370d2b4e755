#include "sqs/locators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ranking.hpp"

namespace sqs {

using detail::largest_positions;

CountSketchParams make_count_sketch_params(std::uint64_t n, std::uint64_t k, double eps,
                                           std::uint64_t seed, double c1, double c2) {
  if (n == 0 || k == 0) throw std::invalid_argument("count-sketch needs n, k >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  CountSketchParams p;
  p.n = n;
  p.k = k;
  p.seed = seed;
  p.rows = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(c1 * std::log2(static_cast<double>(n)))));
  p.width = std::max<std::uint64_t>(2 * k, static_cast<std::uint64_t>(std::ceil(c2 * static_cast<double>(k) / (eps * eps))));
  return p;
}

CountSketchTable::CountSketchTable(const CountSketchParams& params) : params_(params) {
  if (params_.rows < 1) throw std::invalid_argument("count-sketch needs at least one row");
  if (params_.width < 2 * params_.k || params_.width == 0)
    throw std::invalid_argument("count-sketch width must be at least 2k");
  row_seeds_.resize(params_.rows);
  for (std::uint64_t r = 0; r < params_.rows; ++r) row_seeds_[r] = stream_seed(params_.seed, r);
  cells_.assign(params_.rows * params_.width, 0.0);
}

std::uint64_t CountSketchTable::bucket(std::uint64_t row, Index i) const noexcept {
  const std::uint64_t h = mix64(row_seeds_[row] ^ mix64(i));
  return static_cast<std::uint64_t>((static_cast<__uint128_t>(h) * params_.width) >> 64);
}

double CountSketchTable::sign(std::uint64_t row, Index i) const noexcept {
  return (mix64(row_seeds_[row] ^ mix64(i)) & 1ULL) ? -1.0 : 1.0;
}

CountSketchTable cs_apply(const CountSketchParams& params, std::span<const double> x) {
  if (x.size() != params.n) throw std::invalid_argument("count-sketch signal dimension mismatch");
  CountSketchTable table(params);
  const auto rows = static_cast<std::int64_t>(params.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    auto cells = table.row_values(static_cast<std::uint64_t>(r));
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] != 0.0) cells[table.bucket(r, i)] += table.sign(r, i) * x[i];
  }
  return table;
}

void cs_update(CountSketchTable& table, Index i, double delta) {
  if (i >= table.params().n) throw std::out_of_range("count-sketch index out of range");
  for (std::uint64_t r = 0; r < table.params().rows; ++r)
    table.row_values(r)[table.bucket(r, i)] += table.sign(r, i) * delta;
}

double cs_estimate(const CountSketchTable& table, Index i) {
  if (i >= table.params().n) throw std::out_of_range("count-sketch index out of range");
  const std::uint64_t rows = table.params().rows;
  double stack[64];
  std::vector<double> heap;
  std::span<double> votes;
  if (rows <= 64) {
    votes = {stack, rows};
  } else {
    heap.resize(rows);
    votes = heap;
  }
  for (std::uint64_t r = 0; r < rows; ++r) votes[r] = table.sign(r, i) * table.row_values(r)[table.bucket(r, i)];
  return median_inplace(votes);
}

SupportSet locate_candidates(const CountSketchTable& table, std::uint64_t k) {
  const std::uint64_t n = table.params().n;
  std::vector<double> estimates(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) estimates[i] = cs_estimate(table, static_cast<Index>(i));
  const auto picked = largest_positions(estimates, table.params().candidate_multiplier * k);
  return SupportSet(std::vector<Index>(picked.begin(), picked.end()));
}

std::vector<double> top_k_threshold(std::span<const double> x, std::uint64_t k) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i : largest_positions(x, k)) out[i] = x[i];
  return out;
}

SparseSignal top_k_threshold(const SparseSignal& x, std::uint64_t k) {
  const SparseSignal sorted = x.sorted();
  std::vector<double> values(sorted.entries.size());
  for (std::size_t e = 0; e < values.size(); ++e) values[e] = sorted.entries[e].value;
  auto picked = largest_positions(values, k);
  std::sort(picked.begin(), picked.end());
  SparseSignal out;
  out.n = x.n;
  // Stored zeros are dropped, as they would be in the dense form.
  for (std::size_t e : picked)
    if (values[e] != 0.0) out.entries.push_back(sorted.entries[e]);
  return out;
}

double err_top_k(std::span<const double> x, std::uint64_t k) {
  std::vector<double> rest(x.begin(), x.end());
  for (std::size_t i : largest_positions(x, k)) rest[i] = 0.0;
  return norm(rest, Norm::L2);
}

double zipfian_set_query_eps(double eps, std::uint64_t n) {
  return eps / (3.0 * std::sqrt(std::log2(static_cast<double>(n))));
}

ZipfianSketch build_zipfian_sketch(const ZipfianConfig& config, std::span<const double> x) {
  if (config.repetitions == 0) throw std::invalid_argument("need at least one set-query repetition");
  const auto cs_params = make_count_sketch_params(config.n, config.k, config.eps, stream_seed(config.seed, 0));
  const std::uint64_t candidates = std::min(cs_params.candidate_multiplier * config.k, config.n);
  const double sq_eps =
      config.set_query_eps > 0.0 ? config.set_query_eps : zipfian_set_query_eps(config.eps, config.n);
  ZipfianSketch out{cs_apply(cs_params, x), {}, {}};
  for (std::uint32_t r = 0; r < config.repetitions; ++r) {
    const auto p = derive_params(config.n, candidates, std::min(sq_eps, 1.0), Norm::L2, config.d,
                                 stream_seed(config.seed, r + 1));
    out.matrices.emplace_back(p);
    out.sketches.push_back(sqs::apply(out.matrices.back(), x));
  }
  return out;
}

SparseSignal recover_zipfian(const CountSketchTable& locator, std::span<const SketchMatrix> matrices,
                             std::span<const Sketch> sketches, std::uint64_t k, Rng& rng) {
  const SupportSet candidates = locate_candidates(locator, k);
  const SparseSignal estimate = recover_robust(matrices, sketches, candidates, rng);
  return top_k_threshold(estimate, k);
}

SparseSignal recover_zipfian(const ZipfianSketch& sketch, std::uint64_t k, Rng& rng) {
  return recover_zipfian(sketch.locator, sketch.matrices, sketch.sketches, k, rng);
}

namespace serial {

CountSketchTable cs_apply(const CountSketchParams& params, std::span<const double> x) {
  if (x.size() != params.n) throw std::invalid_argument("count-sketch signal dimension mismatch");
  CountSketchTable table(params);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) cs_update(table, i, x[i]);
  return table;
}

}  // namespace serial

}  // namespace sqs
