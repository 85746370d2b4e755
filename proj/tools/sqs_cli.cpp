// Command-line front end. Exit codes: 0 success, 1 threshold failure, 2 usage
// or input error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sqs/block_sparse.hpp"
#include "sqs/harness.hpp"
#include "sqs/locators.hpp"
#include "sqs/serialize.hpp"
#include "sqs/set_query.hpp"
#include "sqs/sketch_core.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace sqs;

namespace {

constexpr int kExitThreshold = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::uint64_t seed = 1;
  std::uint64_t trials = 50;
  fs::path out;
  bool json = false;
};

// Signal files: {"n": .., "support": [..], "x": [..]}.
void write_signal(const fs::path& path, std::span<const double> x, const SupportSet& support) {
  ordered_json j;
  j["n"] = x.size();
  j["support"] = std::vector<Index>(support.begin(), support.end());
  j["x"] = std::vector<double>(x.begin(), x.end());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

struct SignalFile {
  std::vector<double> x;
  SupportSet support;
};

SignalFile read_signal(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    SignalFile s{j.at("x").get<std::vector<double>>(), SupportSet(j.at("support").get<std::vector<Index>>())};
    if (s.x.size() != j.at("n").get<std::uint64_t>()) throw std::invalid_argument("length does not match n");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

fs::path require_out(const Common& c, const char* what) {
  if (c.out.empty()) throw std::invalid_argument(std::string(what) + " needs --out");
  return c.out;
}

void emit(const Common& c, const ordered_json& j, const std::string& text) {
  if (c.json)
    std::cout << j.dump() << '\n';
  else
    std::cout << text << '\n';
}

void add_config(CLI::App* app, fs::path& path) {
  app->add_option("--config", path, "key=value file using the long option names; flags win")
      ->check(CLI::ExistingFile);
}

// Fills every option not given on the command line from a key=value file.
void apply_config(CLI::App* app, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    const std::string key = CLI::detail::trim_copy(line.substr(0, eq));
    if (key.empty()) continue;
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": expected key = value");
    const std::string value = CLI::detail::trim_copy(line.substr(eq + 1));
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config")
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--trials", c.trials, "Trial count");
  app->add_option("--out", c.out, "Output path");
  app->add_flag("--json", c.json, "Machine-readable output on stdout");
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string kind = "set_query";
  std::uint64_t n = 20000;
  std::uint64_t k = 200;
  double alpha = 1.0;
  std::uint64_t block = 64;
  double head_scale = 100.0;
  double tail_sigma = 1.0;
};

int run_gen(const GenArgs& a, const Common& c) {
  const fs::path out = require_out(c, "gen");
  std::vector<double> x;
  SupportSet support;
  if (a.kind == "set_query") {
    auto inst = gen_set_query_instance(a.n, a.k, a.head_scale, a.tail_sigma, c.seed);
    x = std::move(inst.x);
    support = std::move(inst.support);
  } else if (a.kind == "zipfian") {
    x = gen_zipfian(a.n, a.alpha, a.head_scale, c.seed);
    const auto top = top_k_threshold(SparseSignal{a.n, to_sparse(x).entries}, a.k);
    std::vector<Index> idx;
    for (const auto& e : top.entries) idx.push_back(e.index);
    support = SupportSet(idx);
  } else if (a.kind == "block_sparse") {
    if (a.block == 0 || a.k % a.block != 0) throw std::invalid_argument("--block must divide --k");
    const std::vector<double> norms(a.k / a.block, a.head_scale);
    auto planted = gen_block_sparse(a.n, a.block, a.k, norms, a.tail_sigma, c.seed);
    std::vector<Index> idx;
    for (auto q : planted.blocks)
      for (std::uint64_t i = q * a.block; i < (q + 1) * a.block; ++i) idx.push_back(i);
    x = std::move(planted.x);
    support = SupportSet(idx);
  } else {
    throw std::invalid_argument("unknown signal kind '" + a.kind + "'");
  }
  write_signal(out, x, support);
  ordered_json j{{"signal", out.string()}, {"n", x.size()}, {"support", support.size()}};
  emit(c, j, "wrote " + out.string() + " (n=" + std::to_string(x.size()) + ", |S|=" +
                 std::to_string(support.size()) + ")");
  return 0;
}

// ---------------------------------------------------------------------------

struct SketchArgs {
  fs::path signal;
  double eps = 0.5;
  std::string norm = "l2";
  std::uint32_t d = kDefaultColumnSparsity;
  std::uint32_t repetitions = 1;
  std::string noise = "none";
};

Norm parse_norm(const std::string& s) {
  if (s == "l2") return Norm::L2;
  if (s == "l1") return Norm::L1;
  throw std::invalid_argument("--norm must be l2 or l1");
}

int run_sketch(const SketchArgs& a, const Common& c) {
  const fs::path dir = require_out(c, "sketch");
  const auto sig = read_signal(a.signal);
  const auto noise = parse_noise(a.noise);
  fs::create_directories(dir);
  Rng rng(stream_seed(c.seed, 0));
  ordered_json files = ordered_json::array();
  for (std::uint32_t r = 0; r < a.repetitions; ++r) {
    const SketchMatrix m(
        derive_params(sig.x.size(), sig.support.size(), a.eps, parse_norm(a.norm), a.d, stream_seed(c.seed, r + 1)));
    Sketch b = sqs::apply(m, sig.x);
    add_noise(b, gen_noise(noise, m, sig.support, rng));
    const auto mpath = dir / ("matrix." + std::to_string(r) + ".sqs");
    const auto spath = dir / ("sketch." + std::to_string(r) + ".sqs");
    write_file(mpath, serialize(m));
    write_file(spath, serialize(b));
    files.push_back({{"matrix", mpath.string()}, {"sketch", spath.string()}, {"w", m.rows()}});
  }
  emit(c, ordered_json{{"repetitions", a.repetitions}, {"files", files}},
       "wrote " + std::to_string(a.repetitions) + " matrix/sketch pair(s) to " + dir.string());
  return 0;
}

// ---------------------------------------------------------------------------

struct RecoverArgs {
  fs::path in;
  fs::path signal;
};

int run_recover(const RecoverArgs& a, const Common& c) {
  const auto sig = read_signal(a.signal);
  std::vector<SketchMatrix> ms;
  std::vector<Sketch> bs;
  for (std::uint32_t r = 0;; ++r) {
    const auto mpath = a.in / ("matrix." + std::to_string(r) + ".sqs");
    if (!fs::exists(mpath)) break;
    ms.push_back(deserialize_matrix(read_file(mpath)));
    bs.push_back(deserialize_sketch(read_file(a.in / ("sketch." + std::to_string(r) + ".sqs"))));
  }
  if (ms.empty()) throw std::invalid_argument("no matrix.0.sqs in " + a.in.string());
  Rng rng(c.seed);
  const auto runs = recover_each(ms, bs, sig.support, rng);
  std::uint32_t aborted = 0;
  for (const auto& run : runs) aborted += run.complete() ? 0 : 1;
  const auto estimate = median_combine(runs, sig.support);
  const Norm norm = ms.front().params().norm;
  // Without the noise vector the ratio is taken against the tail alone.
  const double ratio = error_ratio(estimate, sig.x, sig.support, 0.0, norm);

  ordered_json j;
  j["repetitions"] = ms.size();
  j["aborted_repetitions"] = aborted;
  if (std::isfinite(ratio))
    j["error_ratio_vs_tail"] = ratio;
  else
    j["error_ratio_vs_tail"] = nullptr;
  if (!c.out.empty()) {
    ordered_json est;
    est["n"] = estimate.n;
    est["entries"] = ordered_json::array();
    for (const auto& e : estimate.entries) est["entries"].push_back({e.index, e.value});
    std::ofstream out(c.out);
    if (!out) throw std::runtime_error("cannot write " + c.out.string());
    out << est.dump() << '\n';
    j["estimate"] = c.out.string();
  }
  char line[160];
  std::snprintf(line, sizeof line, "recovered %zu coordinates, %u/%zu repetitions aborted, error ratio vs tail %.6g",
                estimate.entries.size(), aborted, ms.size(), ratio);
  emit(c, j, line);
  return aborted == ms.size() ? kExitThreshold : 0;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string kind = "set_query_l2";
  std::string noise = "gaussian:1";
  ExperimentConfig config;
};

int run_experiment_cmd(ExperimentArgs& a, const Common& c) {
  ExperimentConfig cfg = a.config;
  cfg.kind = parse_experiment_kind(a.kind);
  cfg.noise = parse_noise(a.noise);
  cfg.seed = c.seed;
  cfg.trials = c.trials;
  const Report report = run_experiment(cfg);
  if (!c.out.empty()) write_report(report, c.out);
  const bool ok = meets_thresholds(report);
  const auto& s = report.summary;
  ordered_json j;
  j["kind"] = a.kind;
  j["trials"] = s.trials;
  j["successes"] = s.successes;
  j["aborts"] = s.aborts;
  j["success_rate"] = s.success_rate;
  j["ratio_q50"] = std::isfinite(s.ratio_q50) ? ordered_json(s.ratio_q50) : ordered_json(nullptr);
  j["meets_thresholds"] = ok;
  if (!c.out.empty()) j["out"] = c.out.string();
  std::string text = summary_csv(s, cfg);
  if (!text.empty() && text.back() == '\n') text.pop_back();
  emit(c, j, text);
  return ok ? 0 : kExitThreshold;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  fs::path records;
};

int run_report(const ReportArgs& a, const Common& c) {
  const auto records = read_records(a.records);
  const std::string table = report_plot_data(records);
  if (!c.out.empty()) {
    std::ofstream out(c.out);
    if (!out) throw std::runtime_error("cannot write " + c.out.string());
    out << table;
  }
  const auto s = summarize(records);
  ordered_json j{{"records", records.size()}, {"success_rate", s.success_rate}};
  if (!c.out.empty()) j["out"] = c.out.string();
  emit(c, j, c.out.empty() ? table.substr(0, table.size() - 1) : "wrote " + c.out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-query sketches: generate signals, sketch, recover and run experiments"};
  app.require_subcommand(1);

  Common common;
  fs::path config_files[4];

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a signal file");
  add_common(g, common);
  add_config(g, config_files[0]);
  g->add_option("--kind", gen.kind, "set_query | zipfian | block_sparse")->capture_default_str();
  g->add_option("--n", gen.n)->capture_default_str();
  g->add_option("--k", gen.k)->capture_default_str();
  g->add_option("--alpha", gen.alpha, "Zipfian exponent")->capture_default_str();
  g->add_option("--block", gen.block, "Block length")->capture_default_str();
  g->add_option("--head_scale", gen.head_scale)->capture_default_str();
  g->add_option("--tail_sigma", gen.tail_sigma)->capture_default_str();

  SketchArgs sk;
  auto* s = app.add_subcommand("sketch", "Sketch a signal file into SQS1 matrix/sketch pairs");
  add_common(s, common);
  add_config(s, config_files[1]);
  s->add_option("--signal", sk.signal)->required()->check(CLI::ExistingFile);
  s->add_option("--eps", sk.eps)->capture_default_str();
  s->add_option("--norm", sk.norm, "l2 | l1")->capture_default_str();
  s->add_option("--d", sk.d)->capture_default_str();
  s->add_option("--repetitions", sk.repetitions)->capture_default_str();
  s->add_option("--noise", sk.noise, "none | gaussian:<sigma> | adversarial_tail:<sigma>")->capture_default_str();

  RecoverArgs rc;
  auto* r = app.add_subcommand("recover", "Recover a signal on its support from sketch files");
  add_common(r, common);
  add_config(r, config_files[2]);
  r->add_option("--in", rc.in, "Directory written by `sketch`")->required()->check(CLI::ExistingDirectory);
  r->add_option("--signal", rc.signal, "Signal file holding the support")->required()->check(CLI::ExistingFile);

  ExperimentArgs ex;
  auto* e = app.add_subcommand("experiment", "Run seeded trials; writes records.jsonl and summary.csv to --out");
  add_common(e, common);
  add_config(e, config_files[3]);
  auto& cfg = ex.config;
  e->add_option("--kind", ex.kind,
                "set_query_l2 | set_query_l1 | zipfian | block_sparse | peelability | runtime_scaling")
      ->capture_default_str();
  e->add_option("--n", cfg.n)->capture_default_str();
  e->add_option("--k", cfg.k)->capture_default_str();
  e->add_option("--eps", cfg.eps)->capture_default_str();
  e->add_option("--d", cfg.d)->capture_default_str();
  e->add_option("--repetitions", cfg.repetitions)->capture_default_str();
  e->add_option("--noise", ex.noise)->capture_default_str();
  e->add_option("--head_scale", cfg.head_scale)->capture_default_str();
  e->add_option("--tail_sigma", cfg.tail_sigma)->capture_default_str();
  e->add_option("--alpha", cfg.alpha)->capture_default_str();
  e->add_option("--block", cfg.block)->capture_default_str();
  e->add_option("--set_query_eps", cfg.set_query_eps, "Zipfian: override the derived set-query eps")
      ->capture_default_str();
  e->add_option("--min_success_rate", cfg.min_success_rate, "Exit 1 below this success rate")
      ->capture_default_str();
  e->add_flag("--record_timing", cfg.record_timing, "Store wall time in every record");

  ReportArgs rp;
  auto* p = app.add_subcommand("report", "Quantile table for plotting from records.jsonl");
  add_common(p, common);
  p->add_option("--records", rp.records)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    CLI::App* subs[] = {g, s, r, e};
    for (int i = 0; i < 4; ++i)
      if (subs[i]->parsed() && !config_files[i].empty()) apply_config(subs[i], config_files[i]);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }

  try {
    if (g->parsed()) return run_gen(gen, common);
    if (s->parsed()) return run_sketch(sk, common);
    if (r->parsed()) return run_recover(rc, common);
    if (e->parsed()) return run_experiment_cmd(ex, common);
    if (p->parsed()) return run_report(rp, common);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
