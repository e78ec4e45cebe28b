#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "symts/error.hpp"
#include "symts/pipeline.hpp"
#include "symts/time_series.hpp"

namespace symts::cli {

enum class ExitCode : int { Ok = 0, Usage = 1, Data = 2, Runtime = 3 };

ExitCode exit_code_for(ErrorKind kind) noexcept;

/// Everything a command needs; built from defaults, then the config file,
/// then the command line.
struct RunConfig {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path out = ".";
  std::filesystem::path model;
  std::filesystem::path library;
  std::filesystem::path config_file;
  std::uint64_t seed = 0;
  std::size_t window = 36;
  /// full | no_ps | no_re | no_pvn | no_sas
  std::string mode = "full";
  /// Unset means default_iterations(window).
  std::optional<std::size_t> iterations;
  double eta = 0.99;
  std::size_t topk = 10;
  std::size_t workers = 1;

  // synth
  std::string generator = "linear";
  std::size_t n = 100;
  double noise = 0.0;

  // fit
  bool curve = false;

  // bench
  std::vector<std::string> bench_modes{"full", "no_re"};
  std::size_t bench_windows = 4;

  /// Remaining numeric knobs, keyed like the config file.
  ExperimentConfig experiment;
};

/// Applies one dotted `key = value` setting. Throws Configuration on an
/// unknown key or a malformed value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
/// Reads `key = value` lines; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& file);

/// The experiment config implied by `cfg` (mode, eta, top-k, window, ...).
ExperimentConfig resolve_experiment(const RunConfig& cfg);
SearchMode search_mode(std::string_view mode);

/// Two-column CSV (timestamp, value); an optional non-numeric header row.
TimeSeries ingest_csv(const std::filesystem::path& file);
TimeSeries parse_csv(std::string_view text, std::string_view source = "<input>");
void write_csv(const TimeSeries& series, std::ostream& out);

/// Generators: linear, sine, sine-plus-trend, log-trend, composite, on t = 1..n
/// with additive Gaussian noise of standard deviation `noise`.
TimeSeries synth(std::string_view generator, std::size_t n, double noise, std::uint64_t seed);
double composite(double t) noexcept;

/// Parses argv into a RunConfig. Returns nullopt and prints to `out` when
/// the invocation only asked for help.
std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out);

/// Executes a parsed command, writing artifacts under cfg.out.
void run(const RunConfig& cfg, std::ostream& out);

/// Full entry point: parse, run, report a one-line error on failure.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace symts::cli
