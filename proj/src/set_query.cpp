#include "sqs/set_query.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cell_index.hpp"

namespace sqs {

SupportSet::SupportSet(std::vector<Index> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
    throw std::invalid_argument("support repeats an index");
}

bool SupportSet::contains(Index i) const noexcept {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

namespace {

// Membership bitset over support positions with a Fenwick tree over per-word
// counts: uniform choice by rank in O(log k), and small enough (k / 8 bytes
// plus k / 16) to stay in cache.
class RankedSet {
 public:
  explicit RankedSet(std::size_t size)
      : words_((size + 63) / 64, 0), tree_(words_.size() + 1, 0) {
    top_ = words_.empty() ? 0 : std::bit_floor(words_.size());
  }

  /// Linear-time construction from a membership vector.
  void assign(const std::vector<std::uint8_t>& member) {
    std::fill(words_.begin(), words_.end(), 0);
    for (std::size_t i = 0; i < member.size(); ++i)
      if (member[i]) words_[i / 64] |= std::uint64_t{1} << (i % 64);
    std::fill(tree_.begin(), tree_.end(), 0);
    total_ = 0;
    for (std::size_t i = 1; i < tree_.size(); ++i) {
      const auto count = static_cast<std::int32_t>(std::popcount(words_[i - 1]));
      tree_[i] += count;
      total_ += count;
      const std::size_t parent = i + (i & (~i + 1));
      if (parent < tree_.size()) tree_[parent] += tree_[i];
    }
  }

  /// Adds (delta = 1) or removes (delta = -1) a position; the caller keeps
  /// membership consistent.
  void add(std::size_t pos, std::int32_t delta) {
    words_[pos / 64] ^= std::uint64_t{1} << (pos % 64);
    total_ += delta;
    for (std::size_t i = pos / 64 + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }

  /// Position of the member with the given rank (0-based) in position order.
  std::size_t select(std::uint64_t rank) const {
    std::size_t word = 0;
    for (std::size_t step = top_; step != 0; step >>= 1) {
      const std::size_t next = word + step;
      if (next < tree_.size() && static_cast<std::uint64_t>(tree_[next]) <= rank) {
        word = next;
        rank -= static_cast<std::uint64_t>(tree_[next]);
      }
    }
    // Binary search for the rank-th set bit of the word.
    std::uint64_t bits = words_[word];
    std::size_t bit = 0;
    for (unsigned width = 32; width != 0; width >>= 1) {
      const std::uint64_t low = bits & ((std::uint64_t{1} << width) - 1);
      const auto count = static_cast<std::uint64_t>(std::popcount(low));
      if (rank >= count) {
        rank -= count;
        bits >>= width;
        bit += width;
      } else {
        bits = low;
      }
    }
    return word * 64 + bit;
  }

  std::uint64_t total() const noexcept { return static_cast<std::uint64_t>(total_); }

 private:
  std::vector<std::uint64_t> words_;
  std::vector<std::int32_t> tree_;
  std::int64_t total_ = 0;
  std::size_t top_ = 0;
};

void check_support(const SketchMatrix& matrix, const SupportSet& support) {
  if (!support.empty() && support.indices().back() >= matrix.cols())
    throw std::invalid_argument("support index " + std::to_string(support.indices().back()) +
                                " out of range for n=" + std::to_string(matrix.cols()));
  if (support.size() > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("support too large");
}

}  // namespace

RecoveryResult recover(const SketchMatrix& matrix, const Sketch& sketch, const SupportSet& support,
                       Rng& rng) {
  check_compatible(matrix, sketch);
  check_support(matrix, support);

  const std::size_t k = support.size();
  const std::uint32_t d = matrix.column_sparsity();
  const std::uint32_t need1 = d - 1;
  const std::uint32_t need2 = d >= 2 ? d - 2 : 0;

  // Support columns copied in position order (a forward scan of the matrix).
  detail::HugeVector<std::uint32_t> slot_rows(k * d);
  detail::HugeVector<std::int8_t> slot_signs(k * d);
  for (std::size_t p = 0; p < k; ++p) {
    auto rows = matrix.column_rows(support[p]);
    auto signs = matrix.column_signs(support[p]);
    std::copy(rows.begin(), rows.end(), slot_rows.begin() + p * d);
    std::copy(signs.begin(), signs.end(), slot_signs.begin() + p * d);
  }
  const auto table = detail::index_cells(slot_rows);
  const auto& cell = table.cell_of_slot;

  // Per cell: residual, preimage count, and XOR of the surviving edge
  // positions (identifies the last survivor). Packed so a touch is one line.
  struct Cell {
    double residual;
    std::uint32_t preimages;
    std::uint32_t survivor_xor;
  };
  detail::HugeVector<Cell> cells(table.rows.size());
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = {sketch.values[table.rows[c]], 0, 0};
  for (std::size_t p = 0; p < k; ++p) {
    for (std::uint32_t s = 0; s < d; ++s) {
      Cell& c = cells[cell[p * d + s]];
      ++c.preimages;
      c.survivor_xor ^= static_cast<std::uint32_t>(p);
    }
  }

  struct Edge {
    std::uint32_t isolated;
    bool alive, in_first, in_second;
  };
  detail::HugeVector<Edge> edges(k);
  std::vector<std::uint8_t> in_first(k, 0), in_second(k, 0);
  for (std::size_t p = 0; p < k; ++p) {
    std::uint32_t isolated = 0;
    for (std::uint32_t s = 0; s < d; ++s) isolated += cells[cell[p * d + s]].preimages == 1;
    in_first[p] = isolated >= need1;
    in_second[p] = isolated >= need2;
    edges[p] = {isolated, true, in_first[p] != 0, in_second[p] != 0};
  }
  RankedSet first(k), second(k);
  first.assign(in_first);
  second.assign(in_second);

  RecoveryResult result;
  result.estimate.n = matrix.cols();
  result.estimate.entries.reserve(k);
  result.peel_log.reserve(k);
  result.cells.reserve(k * d);
  std::vector<double> scratch(d);

  for (std::size_t remaining = k; remaining > 0; --remaining) {
    std::size_t p = 0;
    bool fallback = false;
    if (first.total() > 0) {
      p = first.select(rng.below(first.total()));
    } else if (second.total() > 0) {
      p = second.select(rng.below(second.total()));
      fallback = true;
    } else {
      result.status = RecoveryStatus::Aborted;
      for (std::size_t q = 0; q < k; ++q)
        if (edges[q].alive) result.residual.push_back(support[q]);
      return result;
    }

    const std::uint32_t* my_cells = cell.data() + p * d;
    const std::int8_t* signs = slot_signs.data() + p * d;
    std::size_t used = 0;
    const std::uint64_t cells_begin = result.cells.size();
    for (std::uint32_t s = 0; s < d; ++s) {
      const Cell& c = cells[my_cells[s]];
      if (c.preimages == 1) {
        scratch[used++] = signs[s] * c.residual;
        result.cells.push_back(table.rows[my_cells[s]]);
      }
    }
    const double estimate = median_inplace({scratch.data(), used});
    result.estimate.entries.push_back({support[p], estimate});
    result.peel_log.push_back(
        {support[p], static_cast<std::uint32_t>(used), fallback, cells_begin});

    Edge& peeled = edges[p];
    peeled.alive = false;
    if (peeled.in_first) first.add(p, -1);
    if (peeled.in_second) second.add(p, -1);
    peeled.in_first = peeled.in_second = false;

    for (std::uint32_t s = 0; s < d; ++s) {
      Cell& c = cells[my_cells[s]];
      c.residual -= signs[s] * estimate;
      --c.preimages;
      c.survivor_xor ^= static_cast<std::uint32_t>(p);
      if (c.preimages != 1) continue;
      Edge& q = edges[c.survivor_xor];
      ++q.isolated;
      if (!q.in_second && q.isolated >= need2) {
        q.in_second = true;
        second.add(c.survivor_xor, 1);
      }
      if (!q.in_first && q.isolated >= need1) {
        q.in_first = true;
        first.add(c.survivor_xor, 1);
      }
    }
  }
  return result;
}

std::vector<RecoveryResult> recover_each(std::span<const SketchMatrix> matrices,
                                         std::span<const Sketch> sketches,
                                         const SupportSet& support, Rng& rng) {
  if (matrices.size() != sketches.size())
    throw std::invalid_argument("need one sketch per matrix");
  const std::size_t reps = matrices.size();
  std::vector<std::uint64_t> seeds(reps);
  for (auto& s : seeds) s = rng();
  std::vector<RecoveryResult> runs(reps);
  for (std::size_t r = 0; r < reps; ++r) check_compatible(matrices[r], sketches[r]);
  const auto count = static_cast<std::int64_t>(reps);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t r = 0; r < count; ++r) {
    Rng child(seeds[r]);
    runs[r] = recover(matrices[r], sketches[r], support, child);
  }
  return runs;
}

SparseSignal median_combine(std::span<const RecoveryResult> runs, const SupportSet& support) {
  const std::size_t k = support.size();
  const std::size_t reps = runs.size();
  std::vector<double> table(k * reps, 0.0);  // position-major
  SparseSignal out;
  out.n = runs.empty() ? 0 : runs.front().estimate.n;
  for (std::size_t r = 0; r < reps; ++r) {
    for (const auto& e : runs[r].estimate.entries) {
      const auto it = std::lower_bound(support.begin(), support.end(), e.index);
      if (it == support.end() || *it != e.index)
        throw std::invalid_argument("estimate outside the support");
      table[static_cast<std::size_t>(it - support.begin()) * reps + r] = e.value;
    }
  }
  out.entries.reserve(k);
  for (std::size_t p = 0; p < k; ++p)
    out.entries.push_back({support[p], median_inplace({table.data() + p * reps, reps})});
  return out;
}

SparseSignal recover_robust(std::span<const SketchMatrix> matrices, std::span<const Sketch> sketches,
                            const SupportSet& support, Rng& rng) {
  if (matrices.empty()) throw std::invalid_argument("recover_robust needs at least one repetition");
  const auto runs = recover_each(matrices, sketches, support, rng);
  if (std::none_of(runs.begin(), runs.end(), [](const auto& r) { return r.complete(); }))
    throw RecoveryAborted("every set-query repetition aborted");
  return median_combine(runs, support);
}

double error_ratio(const SparseSignal& estimate, std::span<const double> x,
                   const SupportSet& support, std::span<const double> nu, Norm norm) {
  return error_ratio(estimate, x, support, sqs::norm(nu, norm), norm);
}

double error_ratio(const SparseSignal& estimate, std::span<const double> x,
                   const SupportSet& support, double noise_norm, Norm norm) {
  std::vector<double> head_error;
  head_error.reserve(support.size() + estimate.entries.size());
  std::vector<double> estimated(support.size(), 0.0);
  for (const auto& e : estimate.entries) {
    const auto it = std::lower_bound(support.begin(), support.end(), e.index);
    if (it != support.end() && *it == e.index)
      estimated[static_cast<std::size_t>(it - support.begin())] += e.value;
    else
      head_error.push_back(e.value);
  }
  for (std::size_t p = 0; p < support.size(); ++p) head_error.push_back(estimated[p] - x[support[p]]);

  std::vector<double> tail(x.begin(), x.end());
  for (Index i : support) tail[i] = 0.0;
  const double numerator = sqs::norm(head_error, norm);
  const double denominator = sqs::norm(tail, norm) + noise_norm;
  if (denominator == 0.0) return numerator == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return numerator / denominator;
}

std::vector<double> point_errors(const SketchMatrix& matrix, const Sketch& sketch,
                                 std::span<const double> x, const SupportSet& support,
                                 const RecoveryResult& result) {
  check_compatible(matrix, sketch);
  SparseSignal head;
  head.n = matrix.cols();
  for (Index i : support) head.entries.push_back({i, x[i]});
  const Sketch head_sketch = sqs::apply(matrix, head);

  std::vector<double> out;
  out.reserve(result.peel_log.size());
  std::vector<double> scratch;
  for (const auto& rec : result.peel_log) {
    auto rows = matrix.column_rows(rec.index);
    auto signs = matrix.column_signs(rec.index);
    scratch.clear();
    for (std::uint32_t q : result.cells_of(rec)) {
      const auto s = static_cast<std::size_t>(std::find(rows.begin(), rows.end(), q) - rows.begin());
      scratch.push_back(signs[s] * (sketch.values[q] - head_sketch.values[q]));
    }
    out.push_back(median_inplace(scratch));
  }
  return out;
}

}  // namespace sqs
