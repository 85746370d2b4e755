#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "sqs/harness.hpp"

namespace sqs {

namespace {

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
}

}  // namespace

SupportSet random_support(std::uint64_t n, std::uint64_t k, Rng& rng) {
  if (k > n) throw std::invalid_argument("support larger than dimension");
  // Floyd's algorithm, O(k) draws.
  std::unordered_set<Index> seen;
  seen.reserve(2 * k);
  std::vector<Index> picked;
  picked.reserve(k);
  for (std::uint64_t t = n - k; t < n; ++t) {
    Index candidate = rng.below(t + 1);
    if (!seen.insert(candidate).second) {
      candidate = t;
      seen.insert(t);
    }
    picked.push_back(candidate);
  }
  return SupportSet(std::move(picked));
}

std::vector<double> gen_zipfian(std::uint64_t n, double alpha, double scale, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("zipfian exponent alpha must be positive");
  Rng rng(seed);
  std::vector<Index> rank(n);
  std::iota(rank.begin(), rank.end(), Index{0});
  shuffle(rank, rng);
  std::vector<double> x(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double magnitude = scale * std::pow(static_cast<double>(i + 1), -alpha);
    x[rank[i]] = rng.coin() ? -magnitude : magnitude;
  }
  return x;
}

PlantedBlocks gen_block_sparse(std::uint64_t n, std::uint64_t b, std::uint64_t k,
                               std::span<const double> block_norms, double tail_sigma,
                               std::uint64_t seed) {
  if (b == 0 || n % b != 0) throw std::invalid_argument("block length must divide n");
  if (k % b != 0) throw std::invalid_argument("block length must divide k");
  const std::uint64_t s = k / b;
  const std::uint64_t t = n / b;
  if (s > t) throw std::invalid_argument("more planted blocks than blocks");
  if (block_norms.size() != s)
    throw std::invalid_argument("need one norm per planted block (" + std::to_string(s) + ")");
  Rng rng(seed);
  const SupportSet chosen = random_support(t, s, rng);
  PlantedBlocks out{std::vector<double>(n, 0.0), {chosen.begin(), chosen.end()}};
  // Random block order, so block_norms[i] lands on a random planted block.
  std::vector<std::uint64_t> order(out.blocks);
  shuffle(order, rng);
  for (std::uint64_t i = 0; i < s; ++i) {
    const std::uint64_t q = order[i];
    double energy = 0.0;
    for (std::uint64_t c = q * b; c < (q + 1) * b; ++c) {
      out.x[c] = rng.normal();
      energy += out.x[c] * out.x[c];
    }
    const double scale = energy > 0.0 ? block_norms[i] / std::sqrt(energy) : 0.0;
    for (std::uint64_t c = q * b; c < (q + 1) * b; ++c) out.x[c] *= scale;
  }
  if (tail_sigma > 0.0) {
    for (std::uint64_t q = 0; q < t; ++q) {
      if (chosen.contains(q)) continue;
      for (std::uint64_t c = q * b; c < (q + 1) * b; ++c) out.x[c] = tail_sigma * rng.normal();
    }
  }
  return out;
}

SetQueryInstance gen_set_query_instance(std::uint64_t n, std::uint64_t k, double head_scale,
                                        double tail_sigma, std::uint64_t seed) {
  Rng rng(seed);
  SetQueryInstance out{std::vector<double>(n, 0.0), random_support(n, k, rng)};
  for (Index i : out.support) out.x[i] = head_scale * rng.normal();
  if (tail_sigma > 0.0) {
    for (std::uint64_t i = 0; i < n; ++i)
      if (!out.support.contains(i)) out.x[i] = tail_sigma * rng.normal();
  }
  return out;
}

NoiseModel parse_noise(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  double sigma = 0.0;
  if (colon != std::string::npos) {
    try {
      sigma = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad noise level in '" + text + "'");
    }
    if (!(sigma >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  }
  if (name == "none") return {NoiseKind::None, 0.0};
  if (colon == std::string::npos) throw std::invalid_argument("noise model '" + text + "' needs ':<sigma>'");
  if (name == "gaussian") return {NoiseKind::Gaussian, sigma};
  if (name == "adversarial_tail") return {NoiseKind::AdversarialTail, sigma};
  throw std::invalid_argument("unknown noise model '" + name + "'");
}

std::string to_string(const NoiseModel& noise) {
  switch (noise.kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Gaussian: return "gaussian:" + std::to_string(noise.sigma);
    case NoiseKind::AdversarialTail: return "adversarial_tail:" + std::to_string(noise.sigma);
  }
  return "none";
}

std::vector<double> gen_noise(const NoiseModel& noise, const SketchMatrix& matrix,
                              const SupportSet& support, Rng& rng) {
  std::vector<double> nu(matrix.rows(), 0.0);
  switch (noise.kind) {
    case NoiseKind::None:
      break;
    case NoiseKind::Gaussian:
      for (auto& v : nu) v = noise.sigma * rng.normal();
      break;
    case NoiseKind::AdversarialTail: {
      std::vector<std::uint32_t> image;
      image.reserve(support.size() * matrix.column_sparsity());
      for (Index j : support)
        for (std::uint32_t q : matrix.column_rows(j)) image.push_back(q);
      std::sort(image.begin(), image.end());
      image.erase(std::unique(image.begin(), image.end()), image.end());
      if (image.empty()) break;
      const double sigma =
          noise.sigma * std::sqrt(static_cast<double>(matrix.rows()) / static_cast<double>(image.size()));
      for (std::uint32_t q : image) nu[q] = sigma * rng.normal();
      break;
    }
  }
  return nu;
}

}  // namespace sqs
