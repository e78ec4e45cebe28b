#include "symts/library.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "symts/error.hpp"

namespace symts {
namespace {

constexpr std::string_view kHeader = "symts-library v1";

std::size_t min_length_after(const ExpressionPath& path, Symbol s) noexcept {
  // Each remaining slot needs at least one token.
  return path.size() + 1 + (path.open_slots() - 1) + static_cast<std::size_t>(arity(s));
}

void validate_entry(const AugmentedEntry& e, const std::vector<Symbol>& base) {
  if (!e.pattern.is_complete() || e.pattern.size() < 2) {
    throw Error(ErrorKind::Grammar, "augmented pattern '" + e.pattern.to_prefix() +
                                        "' must be complete with size >= 2");
  }
  for (Symbol s : e.pattern.tokens()) {
    if (std::find(base.begin(), base.end(), s) == base.end()) {
      throw Error(ErrorKind::Grammar, "augmented pattern uses '" + std::string(name(s)) +
                                          "', which is not a base symbol");
    }
  }
  if (e.count < 1) throw Error(ErrorKind::Contract, "augmented entry count must be >= 1");
  if (!(e.mean_reward >= 0.0 && e.mean_reward <= 1.0)) {
    throw Error(ErrorKind::Contract, "augmented entry mean reward must lie in [0, 1]");
  }
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = text.find(sep, pos);
    out.push_back(text.substr(pos, end == std::string_view::npos ? end : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Format, "library file line " + std::to_string(line) +
                                       ": bad number '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<Symbol> FunctionLibrary::default_base() {
  return {Symbol::Add, Symbol::Sub, Symbol::Mul, Symbol::Div, Symbol::Sin, Symbol::Cos,
          Symbol::Log, Symbol::Exp, Symbol::Sqrt, Symbol::Pow, Symbol::Var, Symbol::Const};
}

FunctionLibrary::FunctionLibrary() : FunctionLibrary(default_base()) {}

FunctionLibrary::FunctionLibrary(std::vector<Symbol> base, std::vector<AugmentedEntry> augmented)
    : base_(std::move(base)), augmented_(std::move(augmented)) {
  std::sort(base_.begin(), base_.end());
  if (std::adjacent_find(base_.begin(), base_.end()) != base_.end()) {
    throw Error(ErrorKind::Configuration, "duplicate symbol in function library");
  }
  if (contains(Symbol::Augmented)) {
    throw Error(ErrorKind::Configuration,
                "the augmented token is implied by mined entries, not listed as a base symbol");
  }
  if (!contains(Symbol::Var)) {
    throw Error(ErrorKind::Configuration, "function library must contain the variable t");
  }
  if (contains(Symbol::Pow) && !contains(Symbol::Const)) {
    throw Error(ErrorKind::Configuration,
                "pow takes a constant exponent and needs the constant placeholder C");
  }
  for (const auto& e : augmented_) validate_entry(e, base_);
}

FunctionLibrary FunctionLibrary::from_names(std::span<const std::string> names) {
  std::vector<Symbol> base;
  for (const auto& n : names) {
    auto s = symbol_from_name(n);
    if (!s) throw Error(ErrorKind::Configuration, "unknown library symbol '" + n + "'");
    base.push_back(*s);
  }
  return FunctionLibrary(std::move(base));
}

bool FunctionLibrary::contains(Symbol s) const noexcept {
  return std::binary_search(base_.begin(), base_.end(), s);
}

FunctionLibrary FunctionLibrary::with_augmented(std::vector<AugmentedEntry> entries) const {
  return FunctionLibrary(base_, std::move(entries));
}

std::string FunctionLibrary::serialize() const {
  std::ostringstream out;
  out << kHeader << '\n';
  out << "base";
  for (Symbol s : base_) out << ' ' << name(s);
  out << '\n';
  out << "augmented " << augmented_.size() << '\n';
  for (const auto& e : augmented_) {
    out << e.pattern.to_prefix() << '\t' << e.count << '\t' << format_number(e.mean_reward)
        << '\n';
  }
  return out.str();
}

FunctionLibrary FunctionLibrary::parse(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 3 || lines[0] != kHeader) {
    throw Error(ErrorKind::Format, "not a symts library file (missing '" +
                                       std::string(kHeader) + "' header)");
  }
  auto base_fields = split(lines[1], ' ');
  if (base_fields.empty() || base_fields[0] != "base") {
    throw Error(ErrorKind::Format, "library file line 2: expected 'base'");
  }
  std::vector<Symbol> base;
  for (std::size_t i = 1; i < base_fields.size(); ++i) {
    auto s = symbol_from_name(base_fields[i]);
    if (!s) {
      throw Error(ErrorKind::Format,
                  "library file line 2: unknown symbol '" + std::string(base_fields[i]) + "'");
    }
    base.push_back(*s);
  }
  auto aug_fields = split(lines[2], ' ');
  if (aug_fields.size() != 2 || aug_fields[0] != "augmented") {
    throw Error(ErrorKind::Format, "library file line 3: expected 'augmented <n>'");
  }
  const auto n = parse_number<std::size_t>(aug_fields[1], 3);
  if (lines.size() != 3 + n) {
    throw Error(ErrorKind::Format, "library file declares " + std::to_string(n) +
                                       " entries but has " + std::to_string(lines.size() - 3));
  }
  std::vector<AugmentedEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = 4 + i;
    auto fields = split(lines[3 + i], '\t');
    if (fields.size() != 3) {
      throw Error(ErrorKind::Format,
                  "library file line " + std::to_string(line_no) + ": expected 3 fields");
    }
    AugmentedEntry e;
    try {
      e.pattern = parse_prefix(fields[0]);
    } catch (const Error& err) {
      throw Error(ErrorKind::Format,
                  "library file line " + std::to_string(line_no) + ": " + err.what());
    }
    e.count = parse_number<std::uint64_t>(fields[1], line_no);
    e.mean_reward = parse_number<double>(fields[2], line_no);
    entries.push_back(std::move(e));
  }
  try {
    return FunctionLibrary(std::move(base), std::move(entries));
  } catch (const Error& err) {
    throw Error(ErrorKind::Format, std::string("invalid library file: ") + err.what());
  }
}

void FunctionLibrary::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write library file " + file.string());
  out << serialize();
  if (!out) throw Error(ErrorKind::Io, "failed writing library file " + file.string());
}

FunctionLibrary FunctionLibrary::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read library file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool pattern_fits(const ExpressionPath& path, const ExpressionPath& pattern,
                  std::size_t max_length) noexcept {
  if (!path.accepts_pattern(pattern)) return false;
  return path.size() + pattern.size() + (path.open_slots() - 1) <= max_length;
}

std::vector<Symbol> eligible_actions(const FunctionLibrary& lib, const ExpressionPath& path,
                                     std::size_t max_length) {
  std::vector<Symbol> out;
  if (path.is_complete() || path.size() >= max_length) return out;
  for (Symbol s : lib.base_symbols()) {
    if (path.accepts(s) && min_length_after(path, s) <= max_length) out.push_back(s);
  }
  for (const auto& e : lib.augmented_entries()) {
    if (pattern_fits(path, e.pattern, max_length)) {
      out.push_back(Symbol::Augmented);
      break;
    }
  }
  return out;
}

Symbol sample_uniform(std::span<const Symbol> eligible, Rng& rng) {
  if (eligible.empty()) throw Error(ErrorKind::ExhaustedLibrary, "no eligible symbol to sample");
  return eligible[uniform_index(rng, eligible.size())];
}

Symbol sample_uniform(const FunctionLibrary& lib, Rng& rng) {
  std::vector<Symbol> all(lib.base_symbols().begin(), lib.base_symbols().end());
  if (lib.has_augmented_token()) all.push_back(Symbol::Augmented);
  return sample_uniform(all, rng);
}

namespace {

const ExpressionPath& weighted_pick(const FunctionLibrary& lib, Rng& rng,
                                    const std::vector<std::size_t>& candidates) {
  if (candidates.empty()) {
    throw Error(ErrorKind::ExhaustedLibrary, "no augmented pattern available for sampling");
  }
  auto entries = lib.augmented_entries();
  std::uint64_t total = 0;
  for (std::size_t i : candidates) total += entries[i].count;
  std::uint64_t draw = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
  for (std::size_t i : candidates) {
    if (draw < entries[i].count) return entries[i].pattern;
    draw -= entries[i].count;
  }
  return entries[candidates.back()].pattern;
}

}  // namespace

const ExpressionPath& secondary_sample(const FunctionLibrary& lib, Rng& rng) {
  std::vector<std::size_t> all(lib.augmented_entries().size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return weighted_pick(lib, rng, all);
}

const ExpressionPath& secondary_sample(const FunctionLibrary& lib, Rng& rng,
                                       const ExpressionPath& path, std::size_t max_length) {
  std::vector<std::size_t> fitting;
  auto entries = lib.augmented_entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (pattern_fits(path, entries[i].pattern, max_length)) fitting.push_back(i);
  }
  return weighted_pick(lib, rng, fitting);
}

// --- SASRecorder ------------------------------------------------------------

void SASRecorder::record(const ExpressionPath& path, double reward) {
  if (!path.is_complete()) {
    throw Error(ErrorKind::Grammar, "only complete paths can be recorded");
  }
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw Error(ErrorKind::Contract, "recorded reward must lie in [0, 1]");
  }
  if (reward < cfg_.reward_threshold) return;
  auto& s = stats_[path.to_prefix()];
  s.count += 1;
  s.reward_sum += reward;
}

void SASRecorder::merge(const SASRecorder& other) {
  for (const auto& [key, s] : other.stats_) {
    auto& mine = stats_[key];
    mine.count += s.count;
    mine.reward_sum += s.reward_sum;
  }
}

std::optional<SASRecorder::Stats> SASRecorder::find(const ExpressionPath& path) const {
  auto it = stats_.find(path.to_prefix());
  if (it == stats_.end()) return std::nullopt;
  return it->second;
}

SASRecorder record(SASRecorder rec, const ExpressionPath& path, double reward) {
  rec.record(path, reward);
  return rec;
}

FunctionLibrary mine_top_k(const SASRecorder& rec, const FunctionLibrary& lib) {
  struct Candidate {
    const std::string* key;
    SASRecorder::Stats stats;
    ExpressionPath pattern;
  };
  std::vector<Candidate> candidates;
  for (const auto& [key, s] : rec.stats()) {
    ExpressionPath p = parse_prefix(key);
    if (p.size() < 2) continue;
    bool in_base = true;
    for (Symbol sym : p.tokens()) in_base = in_base && lib.contains(sym);
    if (!in_base) continue;
    candidates.push_back({&key, s, std::move(p)});
  }
  if (candidates.empty()) return lib;

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.stats.count != b.stats.count) return a.stats.count > b.stats.count;
    const double ma = a.stats.mean_reward();
    const double mb = b.stats.mean_reward();
    if (ma != mb) return ma > mb;
    return *a.key < *b.key;
  });
  const std::size_t k = std::min(rec.config().k, candidates.size());
  std::vector<AugmentedEntry> entries;
  entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    double mean = std::clamp(candidates[i].stats.mean_reward(), 0.0, 1.0);
    entries.push_back({std::move(candidates[i].pattern), candidates[i].stats.count, mean});
  }
  return lib.with_augmented(std::move(entries));
}

}  // namespace symts
