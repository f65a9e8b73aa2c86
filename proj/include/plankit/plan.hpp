#pragma once

// Domain types for visual semantic plans: actions, normalized arguments,
// {command, arg1, arg2} triples, plans, corpus records and vocabularies.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace plankit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Action
// ============================================================================

enum class Action { goto_, pickup, put, cool, heat, clean, slice, toggle };

inline constexpr std::array<Action, 8> kAllActions = {
    Action::goto_, Action::pickup, Action::put,   Action::cool,
    Action::heat,  Action::clean,  Action::slice, Action::toggle};

inline constexpr std::string_view action_name(Action a) {
  switch (a) {
    case Action::goto_: return "goto";
    case Action::pickup: return "pickup";
    case Action::put: return "put";
    case Action::cool: return "cool";
    case Action::heat: return "heat";
    case Action::clean: return "clean";
    case Action::slice: return "slice";
    case Action::toggle: return "toggle";
  }
  return "?";
}

inline std::optional<Action> try_parse_action(std::string_view name) {
  for (Action a : kAllActions)
    if (action_name(a) == name) return a;
  return std::nullopt;
}

inline Action parse_action(std::string_view name) {
  if (auto a = try_parse_action(name)) return *a;
  throw Error("unknown action '" + std::string(name) + "'");
}

// Which argument slots an action accepts.
enum class Arity { required, optional, forbidden };

inline constexpr Arity arg2_arity(Action a) {
  switch (a) {
    case Action::put: return Arity::required;
    case Action::goto_:
    case Action::toggle: return Arity::forbidden;
    default: return Arity::optional;
  }
}

// ============================================================================
// Argument
// ============================================================================

enum class ArgClass { object, receptacle, location, unconstrained };

inline constexpr std::string_view arg_class_name(ArgClass c) {
  switch (c) {
    case ArgClass::object: return "object";
    case ArgClass::receptacle: return "receptacle";
    case ArgClass::location: return "location";
    case ArgClass::unconstrained: return "unconstrained";
  }
  return "?";
}

// Class assigned by slot: goto.arg1 is a location; put.arg2 and the optional
// arg2 of pickup/cool/heat/clean are receptacles; everything else is an object.
inline constexpr ArgClass slot_class(Action a, int slot) {
  if (slot == 1) return a == Action::goto_ ? ArgClass::location : ArgClass::object;
  switch (a) {
    case Action::put:
    case Action::pickup:
    case Action::cool:
    case Action::heat:
    case Action::clean: return ArgClass::receptacle;
    default: return ArgClass::object;
  }
}

inline bool is_delimiter_char(char c) {
  return c == '<' || c == '>' || c == '[' || c == ']';
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_edge_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace detail

struct Argument {
  std::vector<std::string> tokens;
  ArgClass cls = ArgClass::unconstrained;

  std::string text() const { return detail::join(tokens); }

  // Identity is the token sequence; the class is derived from the slot.
  friend bool operator==(const Argument& a, const Argument& b) { return a.tokens == b.tokens; }
  friend bool operator<(const Argument& a, const Argument& b) { return a.tokens < b.tokens; }
};

using OptArgument = std::optional<Argument>;

// Lowercases, splits on whitespace and strips punctuation from token edges.
// Throws when nothing survives.
inline Argument normalize_argument(std::string_view raw, ArgClass cls = ArgClass::unconstrained) {
  Argument arg;
  arg.cls = cls;
  for (auto& tok : detail::split_ws(detail::to_lower(raw))) {
    std::size_t b = 0, e = tok.size();
    while (b < e && detail::is_edge_punct(tok[b])) ++b;
    while (e > b && detail::is_edge_punct(tok[e - 1])) --e;
    std::string core = tok.substr(b, e - b);
    // Interior delimiter characters cannot survive into an argument token.
    std::erase_if(core, is_delimiter_char);
    if (!core.empty()) arg.tokens.push_back(std::move(core));
  }
  if (arg.tokens.empty())
    throw Error("argument is empty after normalization: '" + std::string(raw) + "'");
  return arg;
}

inline Argument make_argument(Action a, int slot, std::string_view raw) {
  return normalize_argument(raw, slot_class(a, slot));
}

// ============================================================================
// CommandTriple / Plan
// ============================================================================

struct CommandTriple {
  Action action = Action::goto_;
  OptArgument arg1;
  OptArgument arg2;

  friend bool operator==(const CommandTriple&, const CommandTriple&) = default;
};

// Convenience constructor; empty strings mean "absent".
inline CommandTriple make_triple(Action a, std::string_view arg1 = {}, std::string_view arg2 = {}) {
  CommandTriple t;
  t.action = a;
  if (!arg1.empty()) t.arg1 = make_argument(a, 1, arg1);
  if (!arg2.empty()) t.arg2 = make_argument(a, 2, arg2);
  return t;
}

inline std::string to_string(const CommandTriple& t) {
  std::string s = "{";
  s += action_name(t.action);
  s += ", ";
  s += t.arg1 ? t.arg1->text() : "-";
  s += ", ";
  s += t.arg2 ? t.arg2->text() : "-";
  s += "}";
  return s;
}

using Plan = std::vector<CommandTriple>;

enum class LintCode {
  missing_arg1,
  missing_arg2,
  unexpected_arg2,
  invalid_token,
  empty_plan,
  length_outlier,
  filler_word_collision,
  duplicate_id,
  inconsistent_plan_group,
  start_location_mismatch,
};

inline constexpr std::string_view lint_code_name(LintCode c) {
  switch (c) {
    case LintCode::missing_arg1: return "missing-arg1";
    case LintCode::missing_arg2: return "missing-arg2";
    case LintCode::unexpected_arg2: return "unexpected-arg2";
    case LintCode::invalid_token: return "invalid-token";
    case LintCode::empty_plan: return "empty-plan";
    case LintCode::length_outlier: return "length-outlier";
    case LintCode::filler_word_collision: return "filler-word-collision";
    case LintCode::duplicate_id: return "duplicate-id";
    case LintCode::inconsistent_plan_group: return "inconsistent-plan-group";
    case LintCode::start_location_mismatch: return "start-location-mismatch";
  }
  return "?";
}

struct LintFinding {
  LintCode code;
  std::string detail;

  friend bool operator==(const LintFinding&, const LintFinding&) = default;
};

namespace detail {

inline bool token_ok(const std::string& tok) {
  if (tok.empty()) return false;
  for (char c : tok) {
    if (std::isspace(static_cast<unsigned char>(c)) || is_delimiter_char(c)) return false;
    if (std::isupper(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace detail

inline std::vector<LintFinding> validate_triple(const CommandTriple& t) {
  std::vector<LintFinding> out;
  const std::string where = to_string(t);
  if (!t.arg1) out.push_back({LintCode::missing_arg1, where});
  switch (arg2_arity(t.action)) {
    case Arity::required:
      if (!t.arg2) out.push_back({LintCode::missing_arg2, where});
      break;
    case Arity::forbidden:
      if (t.arg2) out.push_back({LintCode::unexpected_arg2, where});
      break;
    case Arity::optional: break;
  }
  for (const OptArgument* arg : {&t.arg1, &t.arg2}) {
    if (!*arg) continue;
    const auto& toks = (*arg)->tokens;
    if (toks.empty() || !std::all_of(toks.begin(), toks.end(), detail::token_ok))
      out.push_back({LintCode::invalid_token, where});
  }
  return out;
}

inline bool is_valid(const CommandTriple& t) { return validate_triple(t).empty(); }

inline bool is_valid(const Plan& p) {
  return !p.empty() && std::all_of(p.begin(), p.end(), [](const auto& t) { return is_valid(t); });
}

inline constexpr std::size_t kMinPlanLength = 3;
inline constexpr std::size_t kMaxPlanLength = 20;

inline std::vector<LintFinding> validate_plan(const Plan& p) {
  std::vector<LintFinding> out;
  if (p.empty()) {
    out.push_back({LintCode::empty_plan, ""});
    return out;
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& f : validate_triple(p[i]))
      out.push_back({f.code, "triple " + std::to_string(i) + " " + f.detail});
  if (p.size() < kMinPlanLength || p.size() > kMaxPlanLength)
    out.push_back({LintCode::length_outlier, "length " + std::to_string(p.size())});
  return out;
}

// ============================================================================
// Record / Corpus
// ============================================================================

struct Record {
  std::string id;
  std::string plan_id;
  std::string task_type;
  std::string directive;
  Plan gold;
  OptArgument start_location;
  // Opaque upstream scene identifier; only carried when the source has one.
  std::optional<std::string> scene;

  friend bool operator==(const Record&, const Record&) = default;
};

using Vocabulary = std::set<std::vector<std::string>>;

struct Vocabularies {
  Vocabulary object;
  Vocabulary receptacle;
  Vocabulary location;

  const Vocabulary& of(ArgClass c) const {
    switch (c) {
      case ArgClass::receptacle: return receptacle;
      case ArgClass::location: return location;
      default: return object;
    }
  }

  friend bool operator==(const Vocabularies&, const Vocabularies&) = default;
};

inline Vocabularies build_vocabularies(const std::vector<Record>& records) {
  Vocabularies v;
  auto add = [&v](Action a, int slot, const OptArgument& arg) {
    if (!arg) return;
    switch (slot_class(a, slot)) {
      case ArgClass::location: v.location.insert(arg->tokens); break;
      case ArgClass::receptacle: v.receptacle.insert(arg->tokens); break;
      default: v.object.insert(arg->tokens); break;
    }
  };
  for (const auto& r : records)
    for (const auto& t : r.gold) {
      add(t.action, 1, t.arg1);
      add(t.action, 2, t.arg2);
    }
  return v;
}

struct Corpus {
  std::vector<Record> records;
  Vocabularies vocab;

  Corpus() = default;
  explicit Corpus(std::vector<Record> recs) : records(std::move(recs)), vocab(build_vocabularies(records)) {}

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Words the text templates use as fillers; an argument containing one of them
// cannot be recovered unambiguously from rendered text.
inline constexpr std::array<std::string_view, 7> kFillerWords = {"the", "a", "an", "in", "on", "from", "with"};

inline bool is_filler_word(std::string_view tok) {
  return std::find(kFillerWords.begin(), kFillerWords.end(), tok) != kFillerWords.end();
}

struct CorpusFinding {
  std::string record_id;
  LintFinding finding;
};

// Non-fatal checks over a whole corpus.
inline std::vector<CorpusFinding> lint_corpus(const std::vector<Record>& records) {
  std::vector<CorpusFinding> out;
  std::set<std::string> seen;
  std::map<std::string, const Record*> group_head;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) out.push_back({r.id, {LintCode::duplicate_id, r.id}});
    auto [it, fresh] = group_head.emplace(r.plan_id, &r);
    if (!fresh && it->second->gold != r.gold)
      out.push_back({r.id, {LintCode::inconsistent_plan_group, r.plan_id}});
    for (auto& f : validate_plan(r.gold)) out.push_back({r.id, f});
    for (std::size_t i = 0; i < r.gold.size(); ++i)
      for (const OptArgument* arg : {&r.gold[i].arg1, &r.gold[i].arg2})
        if (*arg && std::any_of((*arg)->tokens.begin(), (*arg)->tokens.end(),
                                [](const std::string& t) { return is_filler_word(t); }))
          out.push_back({r.id, {LintCode::filler_word_collision, "triple " + std::to_string(i) + " '" + (*arg)->text() + "'"}});
    if (r.start_location) {
      if (!r.gold.empty() && r.gold.front().action == Action::goto_ && r.gold.front().arg1 != r.start_location)
        out.push_back({r.id, {LintCode::start_location_mismatch, r.start_location->text()}});
    }
  }
  return out;
}

}  // namespace plankit
