#include "sqs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "ranking.hpp"
#include "sqs/block_sparse.hpp"
#include "sqs/hypergraph.hpp"
#include "sqs/locators.hpp"

namespace sqs {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void validate(const ExperimentConfig& c) {
  if (c.n == 0 || c.k == 0 || c.k > c.n) throw std::invalid_argument("need 1 <= k <= n");
  if (!(c.eps > 0.0 && c.eps <= 1.0)) throw std::invalid_argument("eps must lie in (0, 1]");
  if (c.repetitions == 0) throw std::invalid_argument("repetitions must be positive");
  if (c.d < kDefaultColumnSparsity) throw std::invalid_argument("d must be at least 7");
  if (!(c.min_success_rate >= 0.0 && c.min_success_rate <= 1.0))
    throw std::invalid_argument("min_success_rate must lie in [0, 1]");
  if (c.kind == ExperimentKind::BlockSparse) {
    if (c.block == 0 || c.n % c.block != 0 || c.k % c.block != 0)
      throw std::invalid_argument("block_sparse needs block | n and block | k");
  }
  if (c.kind == ExperimentKind::Zipfian && !(c.alpha > 0.0))
    throw std::invalid_argument("alpha must be positive");
}

void fill_components(TrialRecord& rec, const ComponentReport& report) {
  rec.hypertrees = report.class_counts[static_cast<int>(ComponentClass::Hypertree)];
  rec.unicyclic = report.class_counts[static_cast<int>(ComponentClass::Unicyclic)];
  rec.complex = report.class_counts[static_cast<int>(ComponentClass::Complex)];
  rec.max_component = report.max_component_size;
}

// Set query with measurement noise; repetitions median-combined.
void set_query_trial(const ExperimentConfig& c, Norm norm, std::uint64_t seed, TrialRecord& rec) {
  const auto inst = gen_set_query_instance(c.n, c.k, c.head_scale, c.tail_sigma, stream_seed(seed, 0));
  Rng rng(stream_seed(seed, 1));
  std::vector<SketchMatrix> matrices;
  std::vector<Sketch> sketches;
  double noise_energy = 0.0;  // L2: sum of squares; L1: sum of norms
  for (std::uint32_t r = 0; r < c.repetitions; ++r) {
    matrices.emplace_back(derive_params(c.n, c.k, c.eps, norm, c.d, stream_seed(seed, r + 2)));
    Sketch sketch = sqs::apply(matrices.back(), std::span<const double>(inst.x));
    const auto nu = gen_noise(c.noise, matrices.back(), inst.support, rng);
    add_noise(sketch, nu);
    const double nn = sqs::norm(nu, norm);
    noise_energy += norm == Norm::L2 ? nn * nn : nn;
    sketches.push_back(std::move(sketch));
  }
  rec.w = matrices.front().rows();
  fill_components(rec, components(matrices.front(), inst.support));

  const auto runs = recover_each(matrices, sketches, inst.support, rng);
  for (const auto& run : runs) rec.aborted_repetitions += run.complete() ? 0 : 1;
  rec.aborted = rec.aborted_repetitions == c.repetitions;
  const auto estimate = median_combine(runs, inst.support);
  const double mean = noise_energy / c.repetitions;
  const double noise_norm = norm == Norm::L2 ? std::sqrt(mean) : mean;
  rec.error_ratio = error_ratio(estimate, inst.x, inst.support, noise_norm, norm);
  rec.success = !rec.aborted && rec.error_ratio <= c.eps;
}

void zipfian_trial(const ExperimentConfig& c, std::uint64_t seed, TrialRecord& rec) {
  const auto x = gen_zipfian(c.n, c.alpha, c.head_scale, stream_seed(seed, 0));
  ZipfianConfig zc;
  zc.n = c.n;
  zc.k = c.k;
  zc.eps = c.eps;
  zc.set_query_eps = c.set_query_eps;
  zc.repetitions = c.repetitions;
  zc.d = c.d;
  zc.seed = stream_seed(seed, 1);
  const auto sketch = build_zipfian_sketch(zc, x);
  rec.w = sketch.matrices.front().rows();

  const auto candidates = locate_candidates(sketch.locator, c.k);
  const auto top = detail::largest_positions(x, c.k);
  rec.support_hit = std::all_of(top.begin(), top.end(), [&](std::size_t i) { return candidates.contains(i); });

  Rng rng(stream_seed(seed, 2));
  const double bound = 1.0 + c.eps / std::sqrt(std::log2(static_cast<double>(c.n)));
  try {
    const auto estimate = recover_zipfian(sketch, c.k, rng);
    const auto dense = estimate.to_dense();
    const double err = err_top_k(x, c.k);
    const double diff = norm_of_difference(dense, x, Norm::L2);
    rec.error_ratio = err > 0.0 ? diff / err : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rec.success = rec.error_ratio <= bound;
  } catch (const RecoveryAborted&) {
    rec.aborted = true;
    rec.aborted_repetitions = c.repetitions;
    rec.error_ratio = std::numeric_limits<double>::infinity();
  }
}

void block_sparse_trial(const ExperimentConfig& c, std::uint64_t seed, TrialRecord& rec) {
  const std::uint64_t s = c.k / c.block;
  const std::vector<double> norms(s, c.head_scale);
  const auto planted = gen_block_sparse(c.n, c.block, c.k, norms, c.tail_sigma, stream_seed(seed, 0));
  const auto params = make_block_params(c.n, c.block, c.k, c.eps, stream_seed(seed, 1));
  auto sketch = build_block_sparse_sketch(params, c.repetitions, c.d);
  measure(sketch, planted.x);
  rec.w = sketch.matrices.front().rows();

  const double err = err_block(planted.x, c.k, c.block);
  const auto located = bhh_locate(sketch.heavy, s);
  std::vector<double> outside(planted.x);
  for (Index i : located) outside[i] = 0.0;
  rec.support_hit = sqs::norm(outside, Norm::L2) <= (1.0 + c.eps) * err;

  Rng rng(stream_seed(seed, 2));
  try {
    const auto estimate = recover_block_sparse(sketch, rng);
    const double diff = norm_of_difference(estimate.to_dense(), planted.x, Norm::L2);
    rec.error_ratio = err > 0.0 ? diff / err : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rec.success = rec.error_ratio <= 1.0 + c.eps;
  } catch (const RecoveryAborted&) {
    rec.aborted = true;
    rec.aborted_repetitions = c.repetitions;
    rec.error_ratio = std::numeric_limits<double>::infinity();
  }
}

// Noiseless single decode at the sparsity bound w = 2d(d-1)k. Returns the
// decode time.
double noiseless_trial(const ExperimentConfig& c, std::uint64_t seed, TrialRecord& rec,
                       bool classify_components) {
  const auto inst = gen_set_query_instance(c.n, c.k, c.head_scale, 0.0, stream_seed(seed, 0));
  // eps = 1 makes the sparsity term dominate.
  const SketchMatrix matrix(derive_params(c.n, c.k, 1.0, Norm::L2, c.d, stream_seed(seed, 1)));
  SparseSignal head;
  head.n = c.n;
  for (Index i : inst.support) head.entries.push_back({i, inst.x[i]});
  const Sketch sketch = sqs::apply(matrix, head);
  rec.w = matrix.rows();

  Rng rng(stream_seed(seed, 2));
  const auto start = Clock::now();
  const auto result = recover(matrix, sketch, inst.support, rng);
  const double ms = elapsed_ms(start);

  rec.aborted = !result.complete();
  rec.aborted_repetitions = rec.aborted ? 1 : 0;
  rec.error_ratio = error_ratio(result.estimate, inst.x, inst.support, 0.0, Norm::L2);
  if (classify_components) {
    const auto report = components(matrix, inst.support);
    fill_components(rec, report);
    // Success: the certificate was not contradicted.
    rec.success = !(peelability(report) == Peelability::AllGood && rec.aborted);
  } else {
    rec.success = !rec.aborted;
  }
  return ms;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SetQueryL2: return "set_query_l2";
    case ExperimentKind::SetQueryL1: return "set_query_l1";
    case ExperimentKind::Zipfian: return "zipfian";
    case ExperimentKind::BlockSparse: return "block_sparse";
    case ExperimentKind::Peelability: return "peelability";
    case ExperimentKind::RuntimeScaling: return "runtime_scaling";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  for (auto kind : {ExperimentKind::SetQueryL2, ExperimentKind::SetQueryL1, ExperimentKind::Zipfian,
                    ExperimentKind::BlockSparse, ExperimentKind::Peelability, ExperimentKind::RuntimeScaling})
    if (to_string(kind) == text) return kind;
  throw std::invalid_argument("unknown experiment kind '" + text + "'");
}

TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t trial) {
  validate(config);
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = stream_seed(config.seed, trial);
  rec.kind = to_string(config.kind);
  rec.n = config.n;
  rec.k = config.k;
  rec.eps = config.eps;
  rec.repetitions = config.repetitions;

  const auto start = Clock::now();
  std::optional<double> timed;
  switch (config.kind) {
    case ExperimentKind::SetQueryL2: set_query_trial(config, Norm::L2, rec.seed, rec); break;
    case ExperimentKind::SetQueryL1: set_query_trial(config, Norm::L1, rec.seed, rec); break;
    case ExperimentKind::Zipfian: zipfian_trial(config, rec.seed, rec); break;
    case ExperimentKind::BlockSparse: block_sparse_trial(config, rec.seed, rec); break;
    case ExperimentKind::Peelability: noiseless_trial(config, rec.seed, rec, true); break;
    case ExperimentKind::RuntimeScaling: timed = noiseless_trial(config, rec.seed, rec, false); break;
  }
  if (timed) {
    rec.wall_ms = *timed;
  } else if (config.record_timing) {
    rec.wall_ms = elapsed_ms(start);
  }
  return rec;
}

Report run_experiment(const ExperimentConfig& config) {
  validate(config);
  Report report;
  report.config = config;
  report.records.resize(config.trials);
  std::exception_ptr failure;
  const auto count = static_cast<std::int64_t>(config.trials);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t t = 0; t < count; ++t) {
    try {
      report.records[t] = run_trial(config, static_cast<std::uint64_t>(t));
    } catch (...) {
#pragma omp critical(sqs_experiment_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  report.summary = summarize(report.records);
  return report;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

Summary summarize(std::span<const TrialRecord> records) {
  Summary s;
  s.trials = records.size();
  if (records.empty()) return s;
  std::vector<double> ratios;
  ratios.reserve(records.size());
  double wall = 0.0;
  std::uint64_t timed = 0;
  for (const auto& r : records) {
    s.successes += r.success ? 1 : 0;
    s.aborts += r.aborted ? 1 : 0;
    ratios.push_back(r.error_ratio);
    if (r.wall_ms) {
      wall += *r.wall_ms;
      ++timed;
    }
  }
  s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.trials);
  s.abort_rate = static_cast<double>(s.aborts) / static_cast<double>(s.trials);
  s.ratio_q10 = quantile(ratios, 0.1);
  s.ratio_q50 = quantile(ratios, 0.5);
  s.ratio_q90 = quantile(ratios, 0.9);
  s.ratio_max = *std::max_element(ratios.begin(), ratios.end());
  s.mean_wall_ms = timed ? wall / static_cast<double>(timed) : 0.0;
  return s;
}

bool meets_thresholds(const Report& report) {
  if (report.summary.trials == 0) return true;
  return report.summary.success_rate >= report.config.min_success_rate;
}

// Non-finite error ratios are written as null and read back as +inf.
std::string to_json_line(const TrialRecord& r) {
  nlohmann::ordered_json j;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["kind"] = r.kind;
  j["n"] = r.n;
  j["k"] = r.k;
  j["w"] = r.w;
  j["eps"] = r.eps;
  j["repetitions"] = r.repetitions;
  if (std::isfinite(r.error_ratio))
    j["error_ratio"] = r.error_ratio;
  else
    j["error_ratio"] = nullptr;
  j["success"] = r.success;
  j["aborted"] = r.aborted;
  j["aborted_repetitions"] = r.aborted_repetitions;
  if (r.support_hit) j["support_hit"] = *r.support_hit;
  j["hypertrees"] = r.hypertrees;
  j["unicyclic"] = r.unicyclic;
  j["complex"] = r.complex;
  j["max_component"] = r.max_component;
  if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
  return j.dump();
}

TrialRecord from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("malformed record: not an object");
  TrialRecord r;
  try {
    r.trial = j.at("trial").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.kind = j.at("kind").get<std::string>();
    r.n = j.at("n").get<std::uint64_t>();
    r.k = j.at("k").get<std::uint64_t>();
    r.w = j.at("w").get<std::uint64_t>();
    r.eps = j.at("eps").get<double>();
    r.repetitions = j.at("repetitions").get<std::uint32_t>();
    const auto& ratio = j.at("error_ratio");
    r.error_ratio = ratio.is_null() ? std::numeric_limits<double>::infinity() : ratio.get<double>();
    r.success = j.at("success").get<bool>();
    r.aborted = j.at("aborted").get<bool>();
    r.aborted_repetitions = j.at("aborted_repetitions").get<std::uint32_t>();
    if (j.contains("support_hit")) r.support_hit = j["support_hit"].get<bool>();
    r.hypertrees = j.at("hypertrees").get<std::uint64_t>();
    r.unicyclic = j.at("unicyclic").get<std::uint64_t>();
    r.complex = j.at("complex").get<std::uint64_t>();
    r.max_component = j.at("max_component").get<std::uint64_t>();
    if (j.contains("wall_ms")) r.wall_ms = j["wall_ms"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed record: ") + e.what());
  }
  return r;
}

std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  std::uint64_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::string summary_csv(const Summary& s, const ExperimentConfig& c) {
  std::ostringstream out;
  out << "kind,n,k,eps,repetitions,trials,successes,aborts,success_rate,abort_rate,"
         "ratio_q10,ratio_q50,ratio_q90,ratio_max,mean_wall_ms\n";
  out << to_string(c.kind) << ',' << c.n << ',' << c.k << ',' << format_double(c.eps) << ','
      << c.repetitions << ',' << s.trials << ',' << s.successes << ',' << s.aborts << ','
      << format_double(s.success_rate) << ',' << format_double(s.abort_rate) << ','
      << format_double(s.ratio_q10) << ',' << format_double(s.ratio_q50) << ','
      << format_double(s.ratio_q90) << ',' << format_double(s.ratio_max) << ','
      << format_double(s.mean_wall_ms) << '\n';
  return out.str();
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "records.jsonl", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "records.jsonl").string());
    for (const auto& r : report.records) out << to_json_line(r) << '\n';
    if (!out) throw std::runtime_error("failed writing records");
  }
  std::ofstream out(dir / "summary.csv", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "summary.csv").string());
  out << summary_csv(report.summary, report.config);
  if (!out) throw std::runtime_error("failed writing summary");
}

std::string report_plot_data(std::span<const TrialRecord> records) {
  static constexpr double kLevels[] = {0.1, 0.25, 0.5, 0.75, 0.9};
  using Key = std::tuple<std::string, std::uint64_t, std::uint64_t, double>;
  struct Group {
    std::vector<double> ratios;
    std::vector<double> wall;
  };
  std::map<Key, Group> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.kind, r.n, r.k, r.eps}];
    g.ratios.push_back(r.error_ratio);
    if (r.wall_ms) g.wall.push_back(*r.wall_ms);
  }
  std::ostringstream out;
  out << "kind,n,k,eps,quantile,error_ratio,wall_ms\n";
  for (const auto& [key, g] : groups) {
    for (double q : kLevels) {
      out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
          << format_double(std::get<3>(key)) << ',' << format_double(q) << ','
          << format_double(quantile(g.ratios, q)) << ',';
      if (!g.wall.empty()) out << format_double(quantile(g.wall, q));
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace sqs
