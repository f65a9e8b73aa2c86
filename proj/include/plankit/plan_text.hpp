#pragma once

// Text form of plans used for language-model training and generation:
//
//   <directive> [SEP] <tuple> [CSEP] <tuple> ... [CSEP] <tuple> [EOS]
//
// where each tuple is rendered from a per-action template carrying <arg1> and
// <arg2> tags, e.g. "put <arg1> the spoon <arg2> in the mug".  Also holds the
// post-generation repair pipeline applied before parsing model output.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plankit/plan.hpp"

namespace plankit {

inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kCsep = "[CSEP]";
inline constexpr std::string_view kEos = "[EOS]";
inline constexpr std::string_view kArg1Tag = "<arg1>";
inline constexpr std::string_view kArg2Tag = "<arg2>";

inline bool is_sequence_delimiter(std::string_view tok) { return tok == kSep || tok == kCsep || tok == kEos; }

// ============================================================================
// Templates
// ============================================================================

struct TupleTemplate {
  Action action;
  std::vector<std::string> phrase;  // leading keyword phrase, unique per action
  std::string arg2_preposition;     // empty when the action never takes arg2
};

inline const std::vector<TupleTemplate>& tuple_templates() {
  static const std::vector<TupleTemplate> table = {
      {Action::goto_, {"go", "to"}, ""},
      {Action::pickup, {"pick", "up"}, "from"},
      {Action::put, {"put"}, "in"},
      {Action::cool, {"cool"}, "in"},
      {Action::heat, {"heat"}, "in"},
      {Action::clean, {"clean"}, "in"},
      {Action::slice, {"slice"}, "with"},
      {Action::toggle, {"toggle"}, ""},
  };
  return table;
}

inline const TupleTemplate& template_for(Action a) {
  for (const auto& t : tuple_templates())
    if (t.action == a) return t;
  throw Error("no template for action");
}

inline std::vector<std::string> triple_tokens(const CommandTriple& t) {
  if (auto findings = validate_triple(t); !findings.empty())
    throw Error("cannot render " + to_string(t) + ": " + std::string(lint_code_name(findings.front().code)));
  const auto& tpl = template_for(t.action);
  std::vector<std::string> out = tpl.phrase;
  out.emplace_back(kArg1Tag);
  out.emplace_back("the");
  out.insert(out.end(), t.arg1->tokens.begin(), t.arg1->tokens.end());
  if (t.arg2) {
    out.emplace_back(kArg2Tag);
    out.push_back(tpl.arg2_preposition);
    out.emplace_back("the");
    out.insert(out.end(), t.arg2->tokens.begin(), t.arg2->tokens.end());
  }
  return out;
}

inline std::string triple_to_text(const CommandTriple& t) { return detail::join(triple_tokens(t)); }

inline std::string serialize_plan(const Plan& p) {
  if (p.empty()) throw Error("cannot serialize an empty plan");
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) {
      out += ' ';
      out += kCsep;
      out += ' ';
    }
    out += triple_to_text(p[i]);
  }
  out += ' ';
  out += kEos;
  return out;
}

inline std::string serialize_example(std::string_view directive, const Plan& p) {
  for (const auto& tok : detail::split_ws(directive))
    if (is_sequence_delimiter(tok)) throw Error("directive contains a sequence delimiter: " + tok);
  std::string out(directive);
  out += ' ';
  out += kSep;
  out += ' ';
  out += serialize_plan(p);
  return out;
}

// The prompt a generator is given: directive followed by the separator.
inline std::string prompt_for(std::string_view directive) { return std::string(directive) + " " + std::string(kSep); }

// ============================================================================
// Parsing
// ============================================================================

enum class ParseFailure { empty_segment, unknown_action, missing_arg1, malformed_tags, empty_argument, invalid_token };

inline constexpr std::string_view parse_failure_name(ParseFailure f) {
  switch (f) {
    case ParseFailure::empty_segment: return "empty-segment";
    case ParseFailure::unknown_action: return "unknown-action";
    case ParseFailure::missing_arg1: return "missing-arg1";
    case ParseFailure::malformed_tags: return "malformed-tags";
    case ParseFailure::empty_argument: return "empty-argument";
    case ParseFailure::invalid_token: return "invalid-token";
  }
  return "?";
}

class ParseError : public Error {
 public:
  ParseError(std::size_t segment, ParseFailure reason, const std::string& detail)
      : Error("segment " + std::to_string(segment) + ": " + std::string(parse_failure_name(reason)) +
              (detail.empty() ? "" : " (" + detail + ")")),
        segment_(segment),
        reason_(reason) {}

  std::size_t segment() const { return segment_; }
  ParseFailure reason() const { return reason_; }

 private:
  std::size_t segment_;
  ParseFailure reason_;
};

struct ParsedPlan {
  Plan plan;
  bool truncated = false;       // no [EOS] was seen
  bool dropped_partial = false;  // a failing final segment of a truncated text was discarded
};

namespace detail {

using Tokens = std::vector<std::string>;

// Length of the action phrase at the start of [first, last), with the action.
inline std::optional<std::pair<Action, std::size_t>> match_action_phrase(const Tokens& toks, std::size_t first,
                                                                        std::size_t last) {
  const TupleTemplate* best = nullptr;
  for (const auto& tpl : tuple_templates()) {
    const std::size_t n = tpl.phrase.size();
    if (last - first < n) continue;
    bool ok = true;
    for (std::size_t k = 0; k < n && ok; ++k) ok = to_lower(toks[first + k]) == tpl.phrase[k];
    if (ok && (!best || n > best->phrase.size())) best = &tpl;
  }
  if (!best) return std::nullopt;
  return std::make_pair(best->action, best->phrase.size());
}

inline bool is_article(std::string_view t) { return t == "the" || t == "a" || t == "an"; }
inline bool is_preposition(std::string_view t) { return t == "in" || t == "on" || t == "from" || t == "with"; }

inline Argument argument_from_tokens(const Tokens& raw, std::size_t segment, ArgClass cls) {
  Argument arg;
  arg.cls = cls;
  for (const auto& r : raw) {
    std::string tok = to_lower(r);
    std::size_t b = 0, e = tok.size();
    while (b < e && is_edge_punct(tok[b]) && !is_delimiter_char(tok[b])) ++b;
    while (e > b && is_edge_punct(tok[e - 1]) && !is_delimiter_char(tok[e - 1])) --e;
    tok = tok.substr(b, e - b);
    if (std::any_of(tok.begin(), tok.end(), is_delimiter_char))
      throw ParseError(segment, ParseFailure::invalid_token, r);
    if (!tok.empty()) arg.tokens.push_back(std::move(tok));
  }
  if (arg.tokens.empty()) throw ParseError(segment, ParseFailure::empty_argument, "");
  return arg;
}

inline CommandTriple parse_segment(const Tokens& seg, std::size_t index) {
  if (seg.empty()) throw ParseError(index, ParseFailure::empty_segment, "");
  auto hit = match_action_phrase(seg, 0, seg.size());
  if (!hit) throw ParseError(index, ParseFailure::unknown_action, seg.front());
  const auto [action, phrase_len] = *hit;
  if (phrase_len >= seg.size() || seg[phrase_len] != kArg1Tag)
    throw ParseError(index, ParseFailure::missing_arg1, "");

  std::size_t arg2_at = seg.size();
  for (std::size_t i = phrase_len + 1; i < seg.size(); ++i) {
    if (seg[i] == kArg1Tag) throw ParseError(index, ParseFailure::malformed_tags, "repeated <arg1>");
    if (seg[i] == kArg2Tag) {
      if (arg2_at != seg.size()) throw ParseError(index, ParseFailure::malformed_tags, "repeated <arg2>");
      arg2_at = i;
    }
  }

  std::size_t a1 = phrase_len + 1;
  while (a1 < arg2_at && is_article(seg[a1])) ++a1;
  CommandTriple t;
  t.action = action;
  t.arg1 = argument_from_tokens(Tokens(seg.begin() + a1, seg.begin() + arg2_at), index, slot_class(action, 1));
  if (arg2_at < seg.size()) {
    std::size_t a2 = arg2_at + 1;
    while (a2 < seg.size() && is_preposition(seg[a2])) ++a2;
    while (a2 < seg.size() && is_article(seg[a2])) ++a2;
    t.arg2 = argument_from_tokens(Tokens(seg.begin() + a2, seg.end()), index, slot_class(action, 2));
  }
  return t;
}

// Tokens after the first [SEP] (or all tokens when there is none).
inline Tokens body_tokens(std::string_view text, Tokens* prefix = nullptr) {
  Tokens toks = split_ws(text);
  auto sep = std::find(toks.begin(), toks.end(), kSep);
  if (sep == toks.end()) return toks;
  if (prefix) prefix->assign(toks.begin(), sep + 1);
  return Tokens(sep + 1, toks.end());
}

}  // namespace detail

// Parses generated plan text.  Accepts either the continuation after [SEP] or
// a full sequence string; [EOS] is optional.  When [EOS] is missing and the
// final segment does not parse, that segment is dropped.
inline ParsedPlan parse_generated_detailed(std::string_view text) {
  detail::Tokens body = detail::body_tokens(text);
  ParsedPlan out;
  auto eos = std::find(body.begin(), body.end(), kEos);
  out.truncated = eos == body.end();
  body.erase(eos, body.end());

  std::vector<detail::Tokens> segments(1);
  for (auto& tok : body) {
    if (tok == kCsep)
      segments.emplace_back();
    else
      segments.back().push_back(std::move(tok));
  }

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const bool last = i + 1 == segments.size();
    try {
      out.plan.push_back(detail::parse_segment(segments[i], i));
    } catch (const ParseError&) {
      if (!(last && out.truncated && i > 0)) throw;
      out.dropped_partial = true;
    }
  }
  return out;
}

inline Plan parse_generated(std::string_view text) { return parse_generated_detailed(text).plan; }

// ============================================================================
// Repair
// ============================================================================

struct RepairTable {
  // Token-sequence rewrites for dropped second words of two-word phrases.
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> bigram_fixes = {
      {{"pick", "<arg1>"}, {"pick", "up", "<arg1>"}},
      {{"go", "<arg1>"}, {"go", "to", "<arg1>"}},
  };
};

enum class RepairRule { token_doubling, bigram_completion, arg1_tag_insertion, arg2_tag_insertion };

inline constexpr std::string_view repair_rule_name(RepairRule r) {
  switch (r) {
    case RepairRule::token_doubling: return "token-doubling";
    case RepairRule::bigram_completion: return "bigram-completion";
    case RepairRule::arg1_tag_insertion: return "arg1-tag-insertion";
    case RepairRule::arg2_tag_insertion: return "arg2-tag-insertion";
  }
  return "?";
}

struct RepairResult {
  std::string text;
  std::vector<RepairRule> applied;  // in pipeline order, each at most once

  bool changed() const { return !applied.empty(); }
};

namespace detail {

inline bool collapse_doubling(Tokens& toks) {
  auto end = std::unique(toks.begin(), toks.end());
  const bool changed = end != toks.end();
  toks.erase(end, toks.end());
  return changed;
}

inline bool complete_bigrams(Tokens& toks, const RepairTable& table) {
  Tokens out;
  bool changed = false;
  for (std::size_t i = 0; i < toks.size();) {
    bool hit = false;
    for (const auto& [pattern, replacement] : table.bigram_fixes) {
      if (pattern.empty() || i + pattern.size() > toks.size()) continue;
      if (!std::equal(pattern.begin(), pattern.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      out.insert(out.end(), replacement.begin(), replacement.end());
      i += pattern.size();
      hit = changed = true;
      break;
    }
    if (!hit) out.push_back(toks[i++]);
  }
  toks = std::move(out);
  return changed;
}

inline void insert_missing_tags(Tokens& toks, bool& arg1_added, bool& arg2_added) {
  std::size_t seg_begin = 0;
  while (seg_begin <= toks.size()) {
    std::size_t seg_end = seg_begin;
    while (seg_end < toks.size() && !is_sequence_delimiter(toks[seg_end])) ++seg_end;

    if (auto hit = match_action_phrase(toks, seg_begin, seg_end)) {
      const auto [action, phrase_len] = *hit;
      const std::size_t after = seg_begin + phrase_len;
      auto has = [&](std::string_view tag) {
        return std::find(toks.begin() + static_cast<std::ptrdiff_t>(seg_begin),
                         toks.begin() + static_cast<std::ptrdiff_t>(seg_end), tag) !=
               toks.begin() + static_cast<std::ptrdiff_t>(seg_end);
      };
      if (after < seg_end && !has(kArg1Tag)) {
        toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(after), std::string(kArg1Tag));
        ++seg_end;
        arg1_added = true;
      }
      if (action == Action::put && has(kArg1Tag) && !has(kArg2Tag)) {
        const std::size_t tag_at = static_cast<std::size_t>(
            std::find(toks.begin() + static_cast<std::ptrdiff_t>(seg_begin),
                      toks.begin() + static_cast<std::ptrdiff_t>(seg_end), kArg1Tag) -
            toks.begin());
        // Last "(in|on) the X..." with a real word between <arg1> and the preposition.
        for (std::size_t p = seg_end; p-- > tag_at + 1;) {
          if (p + 2 >= seg_end) continue;
          if (toks[p] != "in" && toks[p] != "on") continue;
          if (toks[p + 1] != "the") continue;
          bool has_word = false;
          for (std::size_t k = tag_at + 1; k < p; ++k) has_word = has_word || !is_article(toks[k]);
          if (!has_word) break;
          toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(p), std::string(kArg2Tag));
          ++seg_end;
          arg2_added = true;
          break;
        }
      }
    }
    seg_begin = seg_end + 1;
  }
}

inline bool parses_cleanly(std::string_view text) {
  try {
    auto parsed = parse_generated_detailed(text);
    return !parsed.dropped_partial && is_valid(parsed.plan);
  } catch (const ParseError&) {
    return false;
  }
}

}  // namespace detail

// Best-effort repair of generated text.  Text that already parses into a
// valid plan is returned untouched; otherwise token doubling is collapsed,
// truncated bigrams are completed and missing argument tags are inserted.
// Only the part after [SEP] is rewritten when a directive prefix is present.
inline RepairResult repair_detailed(std::string_view text, const RepairTable& table = {}) {
  if (detail::parses_cleanly(text)) return {std::string(text), {}};

  detail::Tokens prefix;
  detail::Tokens toks = detail::body_tokens(text, &prefix);
  RepairResult res;
  if (detail::collapse_doubling(toks)) res.applied.push_back(RepairRule::token_doubling);
  if (detail::complete_bigrams(toks, table)) res.applied.push_back(RepairRule::bigram_completion);
  bool arg1_added = false, arg2_added = false;
  detail::insert_missing_tags(toks, arg1_added, arg2_added);
  if (arg1_added) res.applied.push_back(RepairRule::arg1_tag_insertion);
  if (arg2_added) res.applied.push_back(RepairRule::arg2_tag_insertion);

  prefix.insert(prefix.end(), toks.begin(), toks.end());
  res.text = detail::join(prefix);
  return res;
}

inline std::string repair(std::string_view text, const RepairTable& table = {}) {
  return repair_detailed(text, table).text;
}

}  // namespace plankit
