#include "symts_cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "symts/expr.hpp"
#include "symts/library.hpp"
#include "symts/mcts.hpp"
#include "symts/pvnet.hpp"
#include "symts/random.hpp"

namespace symts::cli {
namespace {

using nlohmann::json;

constexpr int kReportVersion = 1;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

Error bad_value(std::string_view key, std::string_view value) {
  return Error(ErrorKind::Configuration,
               "invalid value '" + std::string(value) + "' for " + std::string(key));
}

double parse_real(std::string_view key, std::string_view value) {
  auto v = to_double(value);
  if (!v || !std::isfinite(*v)) throw bad_value(key, value);
  return *v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  value = trim(value);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw bad_value(key, value);
  }
  return v;
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

int parse_int(std::string_view key, std::string_view value) {
  value = trim(value);
  int v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw bad_value(key, value);
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  value = trim(value);
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw bad_value(key, value);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

bool apply_optimizer(OptimizerConfig& o, std::string_view field, std::string_view key,
                     std::string_view value) {
  if (field == "max_outer_iters") o.max_outer_iters = parse_int(key, value);
  else if (field == "f_tol") o.f_tol = parse_real(key, value);
  else if (field == "line_search_tol") o.line_search_tol = parse_real(key, value);
  else if (field == "n_restarts") o.n_restarts = parse_int(key, value);
  else if (field == "init_scale") o.init_scale = parse_real(key, value);
  else if (field == "screen_samples") o.screen_samples = parse_int(key, value);
  else return false;
  return true;
}

json counter_json(const StepCounter& c) {
  return {{"simulation_steps", c.simulation_steps},
          {"simulations", c.simulations},
          {"network_calls", c.network_calls},
          {"coefficient_fits", c.coefficient_fits}};
}

json optimizer_json(const OptimizerConfig& o) {
  return {{"max_outer_iters", o.max_outer_iters}, {"f_tol", o.f_tol},
          {"line_search_tol", o.line_search_tol}, {"n_restarts", o.n_restarts},
          {"init_scale", o.init_scale},           {"screen_samples", o.screen_samples}};
}

json config_json(const RunConfig& cfg, const ExperimentConfig& e) {
  json j;
  j["input"] = cfg.input.generic_string();
  j["model"] = needs_network(e.search.mode) ? cfg.model.generic_string() : "";
  j["library"] = cfg.library.generic_string();
  j["seed"] = cfg.seed;
  j["window"] = e.window_length;
  j["mode"] = cfg.mode;
  j["iterations"] = e.search.iterations_per_episode;
  j["eta"] = e.search.reward.eta;
  j["topk"] = e.sas.k;
  j["workers"] = e.workers;
  j["search"] = {{"c", e.search.c},
                 {"max_path_length", e.search.max_path_length},
                 {"rollout_steps", e.search.rollout_steps}};
  j["rollout"] = optimizer_json(e.search.rollout_optimizer);
  j["optimizer"] = optimizer_json(e.optimizer);
  j["net"] = {{"embedding_dim", e.net.embedding_dim}, {"hidden_dim", e.net.hidden_dim},
              {"trunk_layers", e.net.trunk_layers},   {"tcn_levels", e.net.tcn_levels},
              {"kernel_size", e.net.kernel_size}};
  j["train"] = {{"theta1", e.train.theta1},
                {"theta2", e.train.theta2},
                {"learning_rate", e.train.learning_rate},
                {"batch_size", e.train.batch_size},
                {"epochs", e.train.epochs},
                {"max_grad_norm", e.train.max_grad_norm},
                {"policy_direction", e.train.policy_direction == PolicyLossDirection::PriorToTarget
                                         ? "prior_to_target"
                                         : "target_to_prior"},
                {"rounds", e.training_rounds},
                {"episodes_per_window", e.episodes_per_window},
                {"iterations", e.training_iterations}};
  j["sas"] = {{"threshold", e.sas.reward_threshold}, {"k", e.sas.k}, {"enabled", e.use_sas}};
  j["experiment"] = {{"train_fraction", e.train_fraction},
                     {"fit_length", e.fit_length},
                     {"horizon", e.horizon},
                     {"stride", e.effective_stride()},
                     {"normalize", e.normalize}};
  if (cfg.command == "synth") {
    j["synth"] = {{"generator", cfg.generator}, {"n", cfg.n}, {"noise", cfg.noise}};
  }
  return j;
}

json header(const RunConfig& cfg, const ExperimentConfig& e, std::string_view stream) {
  return {{"record", "header"},
          {"format", "symts-report"},
          {"version", kReportVersion},
          {"command", cfg.command},
          {"stream", stream},
          {"config", config_json(cfg, e)}};
}

json fit_json(const FitResult& f) {
  return {{"backbone", f.backbone.to_prefix()},
          {"expression", f.expression_text},
          {"coefficients", f.coefficients},
          {"reward", f.reward},
          {"r2", f.r2_defined ? json(f.r2) : json(nullptr)},
          {"corr", f.corr_defined ? json(f.corr) : json(nullptr)},
          {"r2_defined", f.r2_defined},
          {"corr_defined", f.corr_defined},
          {"counters", counter_json(f.counter)}};
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& file) : file_(file) {
    out_.open(file, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorKind::Io, "cannot write " + file.string());
  }
  void write(const json& record) {
    out_ << record.dump() << '\n';
    if (!out_) throw Error(ErrorKind::Io, "write failed for " + file_.string());
  }

 private:
  std::filesystem::path file_;
  std::ofstream out_;
};

std::filesystem::path out_dir(const RunConfig& cfg) {
  std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(".") : cfg.out;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string());
  return dir;
}

std::optional<PolicyValueNet> load_model(const RunConfig& cfg, SearchMode mode) {
  if (!needs_network(mode)) return std::nullopt;
  if (cfg.model.empty()) {
    throw Error(ErrorKind::Configuration,
                "mode " + cfg.mode + " requires a weights file; pass --model");
  }
  if (!std::filesystem::exists(cfg.model)) {
    throw Error(ErrorKind::Configuration, "weights file not found: " + cfg.model.string());
  }
  return load_weights(cfg.model);
}

FunctionLibrary load_library(const RunConfig& cfg) {
  FunctionLibrary lib = cfg.library.empty() ? FunctionLibrary() : FunctionLibrary::load(cfg.library);
  return cfg.mode == "no_sas" ? lib.without_augmented() : lib;
}

TimeSeries require_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw Error(ErrorKind::Configuration, "--input is required");
  return ingest_csv(cfg.input);
}

void print_fit(std::ostream& out, const FitResult& f) {
  out << "backbone:   " << f.backbone.to_prefix() << '\n'
      << "expression: " << f.expression_text << '\n'
      << "reward:     " << format_number(f.reward) << '\n'
      << "r2:         " << (f.r2_defined ? format_number(f.r2) : "undefined") << '\n'
      << "corr:       " << (f.corr_defined ? format_number(f.corr) : "undefined") << '\n';
}

void run_synth(const RunConfig& cfg, std::ostream& out) {
  const TimeSeries s = synth(cfg.generator, cfg.n, cfg.noise, cfg.seed);
  if (cfg.out.empty()) {
    write_csv(s, out);
    return;
  }
  if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
  std::ofstream f(cfg.out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + cfg.out.string());
  write_csv(s, f);
}

void run_train(const RunConfig& cfg, const ExperimentConfig& e, std::ostream& out) {
  const TimeSeries data = require_input(cfg);
  const auto dir = out_dir(cfg);
  const std::filesystem::path model = cfg.model.empty() ? dir / "model.bin" : cfg.model;
  const std::filesystem::path library = dir / "library.txt";
  FunctionLibrary base =
      cfg.library.empty() ? FunctionLibrary() : FunctionLibrary::load(cfg.library);

  TrainResult r = train(data, e, base.without_augmented());
  save_weights(r.net, model);
  r.library.save(library);

  JsonlWriter w(dir / "train.jsonl");
  w.write(header(cfg, e, "train"));
  for (const TrainHistory& h : r.history) {
    w.write({{"record", "round"},
             {"round", h.round},
             {"examples", h.examples},
             {"loss_total", h.loss_total},
             {"loss_ps", h.loss_ps},
             {"loss_re", h.loss_re}});
  }
  json patterns = json::array();
  for (const AugmentedEntry& a : r.library.augmented_entries()) {
    patterns.push_back(
        {{"pattern", a.pattern.to_prefix()}, {"count", a.count}, {"mean_reward", a.mean_reward}});
  }
  w.write({{"record", "summary"},
           {"train_windows", r.train_windows},
           {"test_windows", r.test_windows},
           {"parameter_count", r.net.parameter_count()},
           {"augmented", patterns}});
  out << "trained on " << r.train_windows << " windows (" << r.test_windows
      << " held out); weights -> " << model.string() << ", library -> " << library.string()
      << '\n';
}

void run_fit(const RunConfig& cfg, const ExperimentConfig& e, std::ostream& out) {
  const TimeSeries series = require_input(cfg);
  const auto net = load_model(cfg, e.search.mode);
  const FunctionLibrary lib = load_library(cfg);
  const auto dir = out_dir(cfg);
  const FitResult f = fit_series(series, net ? &*net : nullptr, lib, e, e.seed);

  JsonlWriter w(dir / "fit.jsonl");
  w.write(header(cfg, e, "fit"));
  json rec = fit_json(f);
  rec["record"] = "fit";
  w.write(rec);

  JsonlWriter t(dir / "timing.jsonl");
  t.write(header(cfg, e, "timing"));
  t.write({{"record", "timing"}, {"elapsed_seconds", f.elapsed_seconds}});

  if (cfg.curve) {
    std::ofstream c(dir / "curve.csv", std::ios::binary | std::ios::trunc);
    if (!c) throw Error(ErrorKind::Io, "cannot write curve table");
    const std::vector<double> fitted = f.predict_at(series.timestamps());
    c << "t,actual,fitted\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      c << format_number(series.timestamps()[i]) << ',' << format_number(series.values()[i])
        << ',' << format_number(fitted[i]) << '\n';
    }
  }
  print_fit(out, f);
}

void write_evaluation(const RunConfig& cfg, const ExperimentConfig& e,
                      const EvaluationReport& rep, const std::filesystem::path& dir) {
  JsonlWriter w(dir / "evaluate.jsonl");
  w.write(header(cfg, e, "evaluate"));
  for (const WindowReport& row : rep.rows) {
    json rec = fit_json(row.fit);
    rec["record"] = "window";
    rec["index"] = row.index;
    w.write(rec);
  }
  w.write({{"record", "summary"},
           {"windows", rep.rows.size()},
           {"window_length", rep.window_length},
           {"mean_r2", rep.r2_count ? json(rep.mean_r2) : json(nullptr)},
           {"mean_corr", rep.corr_count ? json(rep.mean_corr) : json(nullptr)},
           {"r2_count", rep.r2_count},
           {"corr_count", rep.corr_count},
           {"counters", counter_json(rep.counter)}});

  JsonlWriter t(dir / "timing.jsonl");
  t.write(header(cfg, e, "timing"));
  for (const WindowReport& row : rep.rows) {
    t.write({{"record", "timing"}, {"index", row.index},
             {"elapsed_seconds", row.fit.elapsed_seconds}});
  }
  t.write({{"record", "summary"},
           {"window_length", rep.window_length},
           {"total_seconds", rep.total_seconds},
           {"atc", rep.atc}});
}

void run_evaluate(const RunConfig& cfg, const ExperimentConfig& e, std::ostream& out) {
  const TimeSeries data = require_input(cfg);
  const auto net = load_model(cfg, e.search.mode);
  const FunctionLibrary lib = load_library(cfg);
  const auto dir = out_dir(cfg);
  const EvaluationReport rep = evaluate(data, net ? &*net : nullptr, lib, e);
  write_evaluation(cfg, e, rep, dir);
  out << "windows: " << rep.rows.size() << "  mean r2: "
      << (rep.r2_count ? format_number(rep.mean_r2) : "undefined")
      << "  mean corr: " << (rep.corr_count ? format_number(rep.mean_corr) : "undefined")
      << "  atc: " << format_number(rep.atc) << " s\n";
}

void run_extrapolate(const RunConfig& cfg, const ExperimentConfig& e, std::ostream& out) {
  const TimeSeries series = require_input(cfg);
  const auto net = load_model(cfg, e.search.mode);
  const FunctionLibrary lib = load_library(cfg);
  const auto dir = out_dir(cfg);
  const ExtrapolationResult x = extrapolate(series, net ? &*net : nullptr, lib, e, e.seed);

  JsonlWriter w(dir / "extrapolate.jsonl");
  w.write(header(cfg, e, "extrapolate"));
  json fit = fit_json(x.fit);
  fit["record"] = "fit";
  w.write(fit);
  w.write({{"record", "extrapolation"},
           {"timestamps", x.timestamps},
           {"predictions", x.predictions},
           {"actual", x.actual},
           {"r2", x.r2_defined ? json(x.r2) : json(nullptr)},
           {"corr", x.corr_defined ? json(x.corr) : json(nullptr)}});

  JsonlWriter t(dir / "timing.jsonl");
  t.write(header(cfg, e, "timing"));
  t.write({{"record", "timing"}, {"elapsed_seconds", x.fit.elapsed_seconds}});

  print_fit(out, x.fit);
  out << "horizon r2:   " << (x.r2_defined ? format_number(x.r2) : "undefined") << '\n'
      << "horizon corr: " << (x.corr_defined ? format_number(x.corr) : "undefined") << '\n';
}

void run_bench(const RunConfig& cfg, const ExperimentConfig& e, std::ostream& out) {
  const TimeSeries data = require_input(cfg);
  const auto dir = out_dir(cfg);
  std::vector<TimeSeries> windows = sliding_windows(data, e.window_length, e.effective_stride());
  if (windows.size() > cfg.bench_windows) {
    windows.erase(windows.begin() + static_cast<std::ptrdiff_t>(cfg.bench_windows), windows.end());
  }
  if (cfg.bench_modes.empty()) throw Error(ErrorKind::Configuration, "no bench modes given");

  struct Row {
    std::string mode;
    EvaluationReport rep;
  };
  std::vector<Row> rows;
  for (const std::string& m : cfg.bench_modes) {
    RunConfig mc = cfg;
    mc.mode = m;
    const ExperimentConfig me = resolve_experiment(mc);
    const auto net = load_model(mc, me.search.mode);
    const FunctionLibrary lib = load_library(mc);
    rows.push_back({m, evaluate_windows(windows, net ? &*net : nullptr, lib, me)});
  }

  JsonlWriter w(dir / "bench.jsonl");
  w.write(header(cfg, e, "bench"));
  out << std::left << std::setw(8) << "mode" << std::right << std::setw(14) << "sim_steps"
      << std::setw(12) << "net_calls" << std::setw(10) << "fits" << std::setw(12) << "mean_r2"
      << std::setw(12) << "atc_s" << '\n';
  for (const Row& r : rows) {
    const StepCounter& c = r.rep.counter;
    w.write({{"record", "mode"},
             {"mode", r.mode},
             {"windows", r.rep.rows.size()},
             {"counters", counter_json(c)},
             {"mean_r2", r.rep.r2_count ? json(r.rep.mean_r2) : json(nullptr)},
             {"atc", r.rep.atc},
             {"phase_seconds",
              {{"select", c.select_seconds},
               {"expand", c.expand_seconds},
               {"simulate", c.simulate_seconds},
               {"backprop", c.backprop_seconds}}}});
    out << std::left << std::setw(8) << r.mode << std::right << std::setw(14)
        << c.simulation_steps << std::setw(12) << c.network_calls << std::setw(10)
        << c.coefficient_fits << std::setw(12)
        << (r.rep.r2_count ? format_number(std::round(r.rep.mean_r2 * 1e4) / 1e4) : "-")
        << std::setw(12) << format_number(std::round(r.rep.atc * 1e4) / 1e4) << '\n';
  }
  auto find = [&](std::string_view m) -> const Row* {
    for (const Row& r : rows) {
      if (r.mode == m) return &r;
    }
    return nullptr;
  };
  const Row* full = find("full");
  for (const Row& r : rows) {
    if (!full || &r == full) continue;
    const double fs = static_cast<double>(full->rep.counter.simulation_steps);
    const double step_ratio =
        fs > 0 ? static_cast<double>(r.rep.counter.simulation_steps) / fs : 0.0;
    const double atc_ratio = full->rep.atc > 0 ? r.rep.atc / full->rep.atc : 0.0;
    w.write({{"record", "ratio"},
             {"baseline", "full"},
             {"mode", r.mode},
             {"step_ratio", step_ratio},
             {"atc_ratio", atc_ratio}});
    out << r.mode << "/full step ratio: " << format_number(std::round(step_ratio * 100) / 100)
        << "  atc ratio: " << format_number(std::round(atc_ratio * 100) / 100) << '\n';
  }
}

}  // namespace

ExitCode exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Configuration:
      return ExitCode::Usage;
    case ErrorKind::Parse:
    case ErrorKind::Ordering:
    case ErrorKind::Shape:
    case ErrorKind::InsufficientData:
    case ErrorKind::Format:
    case ErrorKind::Io:
    case ErrorKind::UndefinedVariance:
      return ExitCode::Data;
    default:
      return ExitCode::Runtime;
  }
}

SearchMode search_mode(std::string_view mode) {
  if (mode == "full" || mode == "no_sas") return SearchMode::Full;
  if (mode == "no_ps") return SearchMode::NoPolicySelector;
  if (mode == "no_re") return SearchMode::NoRewardEstimator;
  if (mode == "no_pvn") return SearchMode::NoPvn;
  throw Error(ErrorKind::Configuration, "unknown mode '" + std::string(mode) + "'");
}

void apply_setting(RunConfig& cfg, std::string_view raw_key, std::string_view value) {
  const std::string_view key = trim(raw_key);
  value = trim(value);
  ExperimentConfig& e = cfg.experiment;
  const auto dot = key.find('.');
  const std::string_view section = dot == std::string_view::npos ? std::string_view{} : key.substr(0, dot);
  const std::string_view field = dot == std::string_view::npos ? key : key.substr(dot + 1);

  if (section.empty()) {
    if (key == "input") cfg.input = std::string(value);
    else if (key == "out") cfg.out = std::string(value);
    else if (key == "model") cfg.model = std::string(value);
    else if (key == "library") cfg.library = std::string(value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "window") cfg.window = parse_size(key, value);
    else if (key == "mode") {
      search_mode(value);
      cfg.mode = std::string(value);
    } else if (key == "iterations") cfg.iterations = parse_size(key, value);
    else if (key == "eta") cfg.eta = parse_real(key, value);
    else if (key == "topk") cfg.topk = parse_size(key, value);
    else if (key == "workers") cfg.workers = parse_size(key, value);
    else if (key == "generator") cfg.generator = std::string(value);
    else if (key == "n") cfg.n = parse_size(key, value);
    else if (key == "noise") cfg.noise = parse_real(key, value);
    else if (key == "curve") cfg.curve = parse_bool(key, value);
    else throw Error(ErrorKind::Configuration, "unknown setting '" + std::string(key) + "'");
    return;
  }
  bool ok = true;
  if (section == "search") {
    if (field == "c") e.search.c = parse_real(key, value);
    else if (field == "max_path_length") e.search.max_path_length = parse_size(key, value);
    else if (field == "rollout_steps") e.search.rollout_steps = parse_size(key, value);
    else if (field == "iterations") cfg.iterations = parse_size(key, value);
    else if (field == "eta") cfg.eta = parse_real(key, value);
    else ok = false;
  } else if (section == "rollout") {
    ok = apply_optimizer(e.search.rollout_optimizer, field, key, value);
  } else if (section == "optimizer") {
    ok = apply_optimizer(e.optimizer, field, key, value);
  } else if (section == "net") {
    if (field == "embedding_dim") e.net.embedding_dim = parse_size(key, value);
    else if (field == "hidden_dim") e.net.hidden_dim = parse_size(key, value);
    else if (field == "trunk_layers") e.net.trunk_layers = parse_size(key, value);
    else if (field == "tcn_levels") e.net.tcn_levels = parse_size(key, value);
    else if (field == "kernel_size") e.net.kernel_size = parse_size(key, value);
    else ok = false;
  } else if (section == "train") {
    if (field == "theta1") e.train.theta1 = parse_real(key, value);
    else if (field == "theta2") e.train.theta2 = parse_real(key, value);
    else if (field == "learning_rate") e.train.learning_rate = parse_real(key, value);
    else if (field == "batch_size") e.train.batch_size = parse_size(key, value);
    else if (field == "epochs") e.train.epochs = parse_size(key, value);
    else if (field == "max_grad_norm") e.train.max_grad_norm = parse_real(key, value);
    else if (field == "seed") e.train.seed = parse_u64(key, value);
    else if (field == "policy_direction") {
      if (value == "prior_to_target") e.train.policy_direction = PolicyLossDirection::PriorToTarget;
      else if (value == "target_to_prior") e.train.policy_direction = PolicyLossDirection::TargetToPrior;
      else throw bad_value(key, value);
    } else if (field == "rounds") e.training_rounds = parse_size(key, value);
    else if (field == "episodes_per_window") e.episodes_per_window = parse_size(key, value);
    else if (field == "iterations") e.training_iterations = parse_size(key, value);
    else ok = false;
  } else if (section == "sas") {
    if (field == "threshold") e.sas.reward_threshold = parse_real(key, value);
    else if (field == "k") cfg.topk = parse_size(key, value);
    else ok = false;
  } else if (section == "experiment") {
    if (field == "train_fraction") e.train_fraction = parse_real(key, value);
    else if (field == "fit_length") e.fit_length = parse_size(key, value);
    else if (field == "horizon") e.horizon = parse_size(key, value);
    else if (field == "stride") e.stride = parse_size(key, value);
    else if (field == "normalize") e.normalize = parse_bool(key, value);
    else ok = false;
  } else if (section == "bench") {
    if (field == "modes") {
      cfg.bench_modes = split_list(value);
      for (const auto& m : cfg.bench_modes) search_mode(m);
    } else if (field == "windows") cfg.bench_windows = parse_size(key, value);
    else ok = false;
  } else {
    ok = false;
  }
  if (!ok) throw Error(ErrorKind::Configuration, "unknown setting '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Configuration, "cannot read config file " + file.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos || trim(s.substr(0, eq)).empty()) {
      throw Error(ErrorKind::Configuration, file.string() + ":" + std::to_string(lineno) +
                                                ": expected key = value");
    }
    out.emplace_back(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
  }
  return out;
}

ExperimentConfig resolve_experiment(const RunConfig& cfg) {
  ExperimentConfig e = cfg.experiment;
  e.window_length = cfg.window;
  e.seed = cfg.seed;
  e.workers = cfg.workers;
  e.search.mode = search_mode(cfg.mode);
  e.search.reward.eta = cfg.eta;
  e.search.iterations_per_episode = cfg.iterations.value_or(default_iterations(cfg.window));
  e.sas.k = cfg.topk;
  e.net.window_length = cfg.window;
  e.use_sas = cfg.mode != "no_sas";
  e.validate();
  return e;
}

TimeSeries parse_csv(std::string_view text, std::string_view source) {
  std::vector<double> ts;
  std::vector<double> vs;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::Parse,
                 std::string(source) + ":" + std::to_string(lineno) + ": " + why);
  };
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") {
      line.remove_prefix(3);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw fail("expected two comma-separated columns");
    const std::string_view a = line.substr(0, comma);
    const std::string_view b = line.substr(comma + 1);
    if (b.find(',') != std::string_view::npos) throw fail("expected two columns");
    const auto t = to_double(a);
    const auto v = to_double(b);
    if (lineno == 1 && !t && !v) continue;  // header
    if (!t || !std::isfinite(*t)) throw fail("malformed timestamp '" + std::string(trim(a)) + "'");
    if (!v || !std::isfinite(*v)) throw fail("malformed value '" + std::string(trim(b)) + "'");
    if (!ts.empty() && !(*t > ts.back())) {
      throw Error(ErrorKind::Ordering, std::string(source) + ":" + std::to_string(lineno) +
                                           ": timestamp " + format_number(*t) +
                                           " does not increase");
    }
    ts.push_back(*t);
    vs.push_back(*v);
  }
  return TimeSeries(std::move(ts), std::move(vs));
}

TimeSeries ingest_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), file.string());
}

void write_csv(const TimeSeries& series, std::ostream& out) {
  out << "t,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_number(series.timestamps()[i]) << ',' << format_number(series.values()[i])
        << '\n';
  }
}

double composite(double t) noexcept {
  return 0.0974 * t * std::pow(std::log(1.6042 * t), 2.65) +
         0.9 * t * std::cos(std::pow(0.11 * t, 1.66));
}

TimeSeries synth(std::string_view generator, std::size_t n, double noise, std::uint64_t seed) {
  double (*f)(double) = nullptr;
  if (generator == "linear") f = [](double t) { return t; };
  else if (generator == "sine") f = [](double t) { return std::sin(t); };
  else if (generator == "sine-plus-trend") f = [](double t) { return std::sin(t) + 0.5 * t; };
  else if (generator == "log-trend") f = [](double t) { return std::log(t) + 0.1 * t; };
  else if (generator == "composite") f = &composite;
  else throw Error(ErrorKind::Configuration, "unknown generator '" + std::string(generator) + "'");
  if (n < 2) throw Error(ErrorKind::InsufficientData, "synth needs n >= 2");
  if (!(noise >= 0.0)) throw Error(ErrorKind::Configuration, "noise must be >= 0");

  Rng rng(derive_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> ts(n);
  std::vector<double> vs(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = static_cast<double>(i + 1);
    vs[i] = f(ts[i]);
    if (noise > 0.0) vs[i] += noise * gauss(rng);
  }
  return TimeSeries(std::move(ts), std::move(vs));
}

std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out) {
  CLI::App app{"Symbolic regression for time series with neural-guided tree search", "symts"};
  app.require_subcommand(1, 1);

  struct Flags {
    std::string input, out, model, library, config, mode, generator, bench_modes;
    std::uint64_t seed = 0;
    std::size_t window = 0, iterations = 0, topk = 0, workers = 0, n = 0, bench_windows = 0;
    double eta = 0.0, noise = 0.0;
    bool curve = false;
    std::vector<std::string> sets;
  } f;

  struct Bound {
    CLI::App* sub;
    std::vector<std::pair<CLI::Option*, std::string>> opts;
  };
  std::vector<Bound> subs;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    Bound b{s, {}};
    auto reg = [&](CLI::Option* o, std::string key) { b.opts.emplace_back(o, std::move(key)); };
    reg(s->add_option("--input", f.input, "Input CSV (timestamp,value)"), "input");
    reg(s->add_option("--out", f.out, "Output directory (synth: output CSV file)"), "out");
    reg(s->add_option("--seed", f.seed, "Master random seed"), "seed");
    reg(s->add_option("--window", f.window, "Window length (36 or 72)")
            ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20)),
        "window");
    reg(s->add_option("--mode", f.mode, "Search mode")
            ->check(CLI::IsMember({"full", "no_ps", "no_re", "no_pvn", "no_sas"})),
        "mode");
    reg(s->add_option("--model", f.model, "Weights file"), "model");
    reg(s->add_option("--library", f.library, "Function library file"), "library");
    reg(s->add_option("--iterations", f.iterations, "Search iterations per episode"),
        "iterations");
    reg(s->add_option("--eta", f.eta, "Parsimony factor in (0, 1)"), "eta");
    reg(s->add_option("--topk", f.topk, "Augmented patterns kept after training"), "topk");
    reg(s->add_option("--workers", f.workers, "Concurrent window fits"), "workers");
    s->add_option("--config", f.config, "key = value config file");
    s->add_option("--set", f.sets, "Override a dotted setting, key=value")->take_all();
    if (name == "synth") {
      reg(s->add_option("--generator", f.generator,
                        "linear | sine | sine-plus-trend | log-trend | composite"),
          "generator");
      reg(s->add_option("--n", f.n, "Number of points"), "n");
      reg(s->add_option("--noise", f.noise, "Gaussian noise standard deviation"), "noise");
    }
    if (name == "fit") {
      auto* o = s->add_flag("--curve", f.curve, "Also write the fitted curve table");
      b.opts.emplace_back(o, "curve");
    }
    if (name == "bench") {
      reg(s->add_option("--bench-modes", f.bench_modes, "Comma-separated modes to compare"),
          "bench.modes");
      reg(s->add_option("--bench-windows", f.bench_windows, "Windows per mode"),
          "bench.windows");
    }
    subs.push_back(std::move(b));
  };
  add("train", "Train the policy-value network and mine augmented patterns");
  add("fit", "Fit one expression to the whole input series");
  add("evaluate", "Fit every test window and report mean R2, CORR and ATC");
  add("extrapolate", "Fit the leading points and predict the following horizon");
  add("bench", "Compare step counters and time cost across modes");
  add("synth", "Write a synthetic series as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, out);
    return std::nullopt;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, out);
    return std::nullopt;
  }

  const Bound* used = nullptr;
  for (const Bound& b : subs) {
    if (b.sub->parsed()) used = &b;
  }
  RunConfig cfg;
  cfg.command = used->sub->get_name();
  if (cfg.command == "synth") cfg.out.clear();

  if (!f.config.empty()) {
    cfg.config_file = f.config;
    for (const auto& [k, v] : read_config_file(f.config)) apply_setting(cfg, k, v);
  }
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Configuration, "--set expects key=value, got '" + s + "'");
    }
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [opt, key] : used->opts) {
    if (opt->count() == 0) continue;
    if (key == "curve") {
      cfg.curve = f.curve;
      continue;
    }
    const auto& results = opt->results();
    apply_setting(cfg, key, results.empty() ? std::string() : results.back());
  }
  return cfg;
}

void run(const RunConfig& cfg, std::ostream& out) {
  if (cfg.command == "synth") {
    run_synth(cfg, out);
    return;
  }
  const ExperimentConfig e = resolve_experiment(cfg);
  if (cfg.command == "train") run_train(cfg, e, out);
  else if (cfg.command == "fit") run_fit(cfg, e, out);
  else if (cfg.command == "evaluate") run_evaluate(cfg, e, out);
  else if (cfg.command == "extrapolate") run_extrapolate(cfg, e, out);
  else if (cfg.command == "bench") run_bench(cfg, e, out);
  else throw Error(ErrorKind::Configuration, "unknown command '" + cfg.command + "'");
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto report = [&](std::string_view kind, const std::string& message, ExitCode code) {
    json j{{"error", kind}, {"message", message}, {"exit", static_cast<int>(code)}};
    err << j.dump() << '\n';
    return static_cast<int>(code);
  };
  try {
    auto cfg = parse_args(argc, argv, out);
    if (!cfg) return 0;
    run(*cfg, out);
    return 0;
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), ExitCode::Usage);
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return report("runtime", e.what(), ExitCode::Runtime);
  }
}

}  // namespace symts::cli
