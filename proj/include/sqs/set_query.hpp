#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sqs/rng.hpp"
#include "sqs/signal.hpp"
#include "sqs/sketch_core.hpp"

namespace sqs {

/// Query support: distinct coordinates, kept sorted ascending.
class SupportSet {
 public:
  SupportSet() = default;
  /// Sorts; throws std::invalid_argument on repeated indices.
  explicit SupportSet(std::vector<Index> indices);

  std::span<const Index> indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  Index operator[](std::size_t pos) const noexcept { return indices_[pos]; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }
  bool contains(Index i) const noexcept;

  friend bool operator==(const SupportSet&, const SupportSet&) = default;

 private:
  std::vector<Index> indices_;
};

struct PeelRecord {
  Index index = 0;
  std::uint32_t isolated = 0;  // |L_j| when peeled
  bool fallback = false;       // chosen from the d-2 queue
  std::uint64_t cells_begin = 0;
};

enum class RecoveryStatus { Complete, Aborted };

/// Output of one peeling run. On abort the estimate holds what was peeled
/// before the decoder got stuck and `residual` the support left over.
struct RecoveryResult {
  RecoveryStatus status = RecoveryStatus::Complete;
  SparseSignal estimate;  // entries in peel order, support within S
  std::vector<PeelRecord> peel_log;
  std::vector<std::uint32_t> cells;  // isolated rows used, record by record
  std::vector<Index> residual;

  bool complete() const noexcept { return status == RecoveryStatus::Complete; }
  std::span<const std::uint32_t> cells_of(const PeelRecord& r) const noexcept {
    return {cells.data() + r.cells_begin, r.isolated};
  }
};

class RecoveryAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Peeling decoder. Repeatedly picks, uniformly at random, a surviving support
/// edge with at least d-1 isolated cells (else one with d-2; else abort),
/// estimates it as the median of A_qj b_q over its isolated cells and
/// subtracts the estimate from the residual sketch.
///
/// Runs in O(d k): preimage counts and the two eligibility queues are
/// maintained incrementally. The uniform choice draws rank `rng.below(|J|)`
/// within the queue ordered by support position, so any reference peeler that
/// uses the same rule consumes the same random draws.
///
/// Throws std::invalid_argument if the sketch does not belong to the matrix or
/// the support leaves [0, n).
RecoveryResult recover(const SketchMatrix& matrix, const Sketch& sketch, const SupportSet& support,
                       Rng& rng);

/// One recover per (matrix, sketch) pair, repetition r using a child
/// generator seeded by the r-th draw from `rng`. Repetitions run in parallel.
std::vector<RecoveryResult> recover_each(std::span<const SketchMatrix> matrices,
                                         std::span<const Sketch> sketches,
                                         const SupportSet& support, Rng& rng);

/// Pointwise median over repetitions; an aborted repetition contributes its
/// partial estimate with zeros elsewhere. Output lists every support index in
/// ascending order.
SparseSignal median_combine(std::span<const RecoveryResult> runs, const SupportSet& support);

/// recover_each + median_combine. Throws RecoveryAborted if every repetition
/// aborts.
SparseSignal recover_robust(std::span<const SketchMatrix> matrices, std::span<const Sketch> sketches,
                            const SupportSet& support, Rng& rng);

/// ||x' - x_S|| / (||x - x_S|| + ||nu||) in the given norm. A zero
/// denominator yields 0 for exact estimates and +inf otherwise.
double error_ratio(const SparseSignal& estimate, std::span<const double> x,
                   const SupportSet& support, std::span<const double> nu, Norm norm);
/// Same, with the noise norm given directly.
double error_ratio(const SparseSignal& estimate, std::span<const double> x,
                   const SupportSet& support, double noise_norm, Norm norm);

/// Point error per peel record: median over the record's cells of
/// A_qj (b - A x_S)_q. Needs the ground-truth signal.
std::vector<double> point_errors(const SketchMatrix& matrix, const Sketch& sketch,
                                 std::span<const double> x, const SupportSet& support,
                                 const RecoveryResult& result);

}  // namespace sqs
