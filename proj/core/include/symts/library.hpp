#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symts/expr.hpp"
#include "symts/random.hpp"

namespace symts {

/// A mined composite pattern exposed through the augmented token.
struct AugmentedEntry {
  ExpressionPath pattern;  // complete, base symbols only, size >= 2
  std::uint64_t count = 1;
  double mean_reward = 0.0;

  friend bool operator==(const AugmentedEntry&, const AugmentedEntry&) = default;
};

/// Base operators and terminals plus the mined patterns. Immutable once
/// built; mining returns a new library.
class FunctionLibrary {
 public:
  /// add sub mul div sin cos log exp sqrt pow t C
  FunctionLibrary();
  explicit FunctionLibrary(std::vector<Symbol> base,
                           std::vector<AugmentedEntry> augmented = {});

  static FunctionLibrary from_names(std::span<const std::string> names);
  static std::vector<Symbol> default_base();

  std::span<const Symbol> base_symbols() const noexcept { return base_; }
  std::span<const AugmentedEntry> augmented_entries() const noexcept { return augmented_; }
  bool has_augmented_token() const noexcept { return !augmented_.empty(); }
  bool contains(Symbol s) const noexcept;

  FunctionLibrary with_augmented(std::vector<AugmentedEntry> entries) const;
  FunctionLibrary without_augmented() const { return FunctionLibrary(base_); }

  /// Text form: version line, base ids, then one tab-separated
  /// `pattern count mean_reward` row per augmented entry.
  std::string serialize() const;
  static FunctionLibrary parse(std::string_view text);
  void save(const std::filesystem::path& file) const;
  static FunctionLibrary load(const std::filesystem::path& file);

  friend bool operator==(const FunctionLibrary&, const FunctionLibrary&) = default;

 private:
  std::vector<Symbol> base_;
  std::vector<AugmentedEntry> augmented_;
};

/// Actions that keep `path` completable within `max_length` tokens, in
/// ascending symbol order. The augmented token is listed when at least one
/// pattern fits. Complete or full-length paths have none.
std::vector<Symbol> eligible_actions(const FunctionLibrary& lib, const ExpressionPath& path,
                                     std::size_t max_length);

/// Whether `pattern` can be inlined into the next slot of `path` within budget.
bool pattern_fits(const ExpressionPath& path, const ExpressionPath& pattern,
                  std::size_t max_length) noexcept;

/// Uniform draw over the eligible set.
Symbol sample_uniform(std::span<const Symbol> eligible, Rng& rng);
/// Uniform draw over every base symbol plus the augmented token, if present.
Symbol sample_uniform(const FunctionLibrary& lib, Rng& rng);

/// Picks entry i with probability count_i / sum(count).
const ExpressionPath& secondary_sample(const FunctionLibrary& lib, Rng& rng);
/// Same, restricted to the patterns that fit `path` within `max_length`.
const ExpressionPath& secondary_sample(const FunctionLibrary& lib, Rng& rng,
                                       const ExpressionPath& path, std::size_t max_length);

struct RecorderConfig {
  double reward_threshold = 0.5;
  std::size_t k = 10;
};

/// Frequency and reward statistics of high-reward complete paths, keyed by
/// their prefix text.
class SASRecorder {
 public:
  struct Stats {
    std::uint64_t count = 0;
    double reward_sum = 0.0;
    double mean_reward() const noexcept {
      return count ? reward_sum / static_cast<double>(count) : 0.0;
    }
  };

  explicit SASRecorder(RecorderConfig cfg = {}) : cfg_(cfg) {}

  /// Counts `path` when reward >= threshold.
  void record(const ExpressionPath& path, double reward);
  void merge(const SASRecorder& other);

  const RecorderConfig& config() const noexcept { return cfg_; }
  const std::map<std::string, Stats>& stats() const noexcept { return stats_; }
  std::optional<Stats> find(const ExpressionPath& path) const;

 private:
  RecorderConfig cfg_;
  std::map<std::string, Stats> stats_;
};

SASRecorder record(SASRecorder rec, const ExpressionPath& path, double reward);

/// Replaces the library's augmented entries with the recorder's top-k
/// patterns: highest count first, then higher mean reward, then key order.
/// Single-token paths are never mined.
FunctionLibrary mine_top_k(const SASRecorder& rec, const FunctionLibrary& lib);

}  // namespace symts
