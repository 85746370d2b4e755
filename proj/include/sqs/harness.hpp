#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqs/rng.hpp"
#include "sqs/set_query.hpp"
#include "sqs/sketch_core.hpp"

namespace sqs {

// ---------------------------------------------------------------------------
// Signal generators

/// |x_{r_i}| = scale * i^{-alpha} (i = 1..n) under a seeded random
/// permutation r, with random signs.
std::vector<double> gen_zipfian(std::uint64_t n, double alpha, double scale, std::uint64_t seed);

struct PlantedBlocks {
  std::vector<double> x;
  std::vector<std::uint64_t> blocks;  // planted block indices, ascending
};

/// k / b blocks at random positions, block i with l2 norm block_norms[i] and a
/// uniformly random direction; coordinates outside them get N(0, tail_sigma^2).
PlantedBlocks gen_block_sparse(std::uint64_t n, std::uint64_t b, std::uint64_t k,
                               std::span<const double> block_norms, double tail_sigma,
                               std::uint64_t seed);

struct SetQueryInstance {
  std::vector<double> x;
  SupportSet support;
};

/// Random k-subset S; x_S ~ N(0, head_scale^2), x off S ~ N(0, tail_sigma^2).
SetQueryInstance gen_set_query_instance(std::uint64_t n, std::uint64_t k, double head_scale,
                                        double tail_sigma, std::uint64_t seed);

/// Uniform random k-subset of [0, n).
SupportSet random_support(std::uint64_t n, std::uint64_t k, Rng& rng);

enum class NoiseKind { None, Gaussian, AdversarialTail };

/// `gaussian` puts N(0, sigma^2) on every cell. `adversarial_tail` spends the
/// same expected energy only on the cells hit by the support.
struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double sigma = 0.0;
};

/// Parses "none", "gaussian:<sigma>" or "adversarial_tail:<sigma>".
NoiseModel parse_noise(const std::string& text);
std::string to_string(const NoiseModel& noise);

std::vector<double> gen_noise(const NoiseModel& noise, const SketchMatrix& matrix,
                              const SupportSet& support, Rng& rng);

// ---------------------------------------------------------------------------
// Experiments

enum class ExperimentKind { SetQueryL2, SetQueryL1, Zipfian, BlockSparse, Peelability, RuntimeScaling };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SetQueryL2;
  std::uint64_t n = 20000;
  std::uint64_t k = 200;
  double eps = 0.5;
  std::uint32_t d = kDefaultColumnSparsity;
  std::uint32_t repetitions = 1;
  std::uint64_t trials = 50;
  std::uint64_t seed = 1;
  NoiseModel noise{NoiseKind::Gaussian, 1.0};
  double head_scale = 100.0;  // set query: head std; block sparse: planted block norm
  double tail_sigma = 1.0;
  double alpha = 1.0;          // zipfian exponent
  std::uint64_t block = 64;    // block length
  double set_query_eps = 0.0;  // zipfian: override of the derived set-query eps
  double min_success_rate = 0.0;
  bool record_timing = false;  // wall time makes records run-dependent
};

struct TrialRecord {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  std::string kind;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  std::uint64_t w = 0;
  double eps = 0.0;
  std::uint32_t repetitions = 1;
  double error_ratio = 0.0;
  bool success = false;
  bool aborted = false;
  std::uint32_t aborted_repetitions = 0;
  std::optional<bool> support_hit;  // locator stages only
  std::uint64_t hypertrees = 0;
  std::uint64_t unicyclic = 0;
  std::uint64_t complex = 0;
  std::uint64_t max_component = 0;
  std::optional<double> wall_ms;
};

struct Summary {
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t aborts = 0;
  double success_rate = 0.0;
  double abort_rate = 0.0;
  double ratio_q10 = 0.0;
  double ratio_q50 = 0.0;
  double ratio_q90 = 0.0;
  double ratio_max = 0.0;
  double mean_wall_ms = 0.0;
};

struct Report {
  ExperimentConfig config;
  std::vector<TrialRecord> records;
  Summary summary;
};

/// Runs one trial. Trial t is seeded by stream t of the master seed, so a
/// trial is reproducible on its own.
TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t trial);

/// Runs all trials (in parallel) and summarizes. Records are ordered by trial
/// index, so output does not depend on thread count.
Report run_experiment(const ExperimentConfig& config);

Summary summarize(std::span<const TrialRecord> records);

/// True when there are no trials or the success rate reaches the configured
/// minimum.
bool meets_thresholds(const Report& report);

/// Linear interpolation between order statistics (q in [0, 1]).
double quantile(std::vector<double> values, double q);

std::string to_json_line(const TrialRecord& record);
TrialRecord from_json_line(const std::string& line);
std::vector<TrialRecord> read_records(const std::filesystem::path& path);

std::string summary_csv(const Summary& summary, const ExperimentConfig& config);

/// Writes records.jsonl and summary.csv into `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);

/// Columnar (parameter, quantile) table: one row per (kind, n, k, eps, q) for
/// q in {0.1, 0.25, 0.5, 0.75, 0.9}. Headers only for no records.
std::string report_plot_data(std::span<const TrialRecord> records);

}  // namespace sqs
