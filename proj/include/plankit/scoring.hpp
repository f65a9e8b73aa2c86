#pragma once

// Strict / permissive accuracy of predicted plans against gold plans at the
// component (command, arg1, arg2), triple, full-sequence and
// full-minus-first levels, with a per-command breakdown of triple accuracy.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "plankit/parallel.hpp"
#include "plankit/plan.hpp"

namespace plankit {

enum class MatchMode { strict, permissive };

inline constexpr std::array<MatchMode, 2> kAllModes = {MatchMode::strict, MatchMode::permissive};

inline constexpr std::string_view mode_name(MatchMode m) { return m == MatchMode::strict ? "strict" : "permissive"; }

inline MatchMode parse_mode(std::string_view s) {
  if (s == "strict") return MatchMode::strict;
  if (s == "permissive") return MatchMode::permissive;
  throw Error("unknown match mode '" + std::string(s) + "'");
}

// Strict: identical token sequences.  Permissive: at least one shared token.
// Absent only ever matches absent.
inline bool match_argument(const OptArgument& gold, const OptArgument& pred, MatchMode mode) {
  if (!gold || !pred) return !gold && !pred;
  if (mode == MatchMode::strict) return gold->tokens == pred->tokens;
  for (const auto& g : gold->tokens)
    if (std::find(pred->tokens.begin(), pred->tokens.end(), g) != pred->tokens.end()) return true;
  return false;
}

inline bool score_triple(const CommandTriple& gold, const CommandTriple& pred, MatchMode mode) {
  return gold.action == pred.action && match_argument(gold.arg1, pred.arg1, mode) &&
         match_argument(gold.arg2, pred.arg2, mode);
}

// Positionwise outcomes, one entry per gold triple.
struct PlanScores {
  std::vector<bool> command;
  std::vector<bool> arg1;
  std::vector<std::optional<bool>> arg2;  // nullopt where gold has no arg2
  std::vector<bool> triple;
  bool full_sequence = false;
  bool full_minus_first = false;
};

namespace detail {

inline bool sequences_match(const Plan& gold, const Plan& pred, std::size_t from, MatchMode mode) {
  if (gold.size() != pred.size()) return false;
  for (std::size_t i = from; i < gold.size(); ++i)
    if (!score_triple(gold[i], pred[i], mode)) return false;
  return true;
}

}  // namespace detail

inline PlanScores score_plan(const Plan& gold, const Plan& pred, MatchMode mode) {
  if (gold.empty()) throw Error("score_plan: gold plan is empty");
  PlanScores s;
  const std::size_t n = gold.size();
  s.command.resize(n);
  s.arg1.resize(n);
  s.arg2.resize(n);
  s.triple.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = gold[i];
    const bool have = i < pred.size();
    s.command[i] = have && g.action == pred[i].action;
    s.arg1[i] = have && match_argument(g.arg1, pred[i].arg1, mode);
    if (g.arg2) s.arg2[i] = have && match_argument(g.arg2, pred[i].arg2, mode);
    s.triple[i] = have && score_triple(g, pred[i], mode);
  }
  s.full_sequence = detail::sequences_match(gold, pred, 0, mode);
  // Both plans lose their first triple; an empty prediction never counts.
  s.full_minus_first = !pred.empty() && detail::sequences_match(gold, pred, 1, mode);
  return s;
}

// ============================================================================
// Aggregation
// ============================================================================

enum class Averaging { micro, macro };

inline constexpr std::string_view averaging_name(Averaging a) { return a == Averaging::micro ? "micro" : "macro"; }

inline Averaging parse_averaging(std::string_view s) {
  if (s == "micro") return Averaging::micro;
  if (s == "macro") return Averaging::macro;
  throw Error("unknown averaging '" + std::string(s) + "'");
}

// numerator / denominator.  Under micro averaging the numerator is a count;
// under macro averaging it is a sum of per-record rates.
struct Cell {
  double numerator = 0;
  std::uint64_t denominator = 0;

  double value() const { return denominator ? numerator / static_cast<double>(denominator) : 0.0; }
  bool reported() const { return denominator > 0; }

  void add(bool ok) {
    numerator += ok ? 1 : 0;
    ++denominator;
  }

  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class Metric { command, arg1, arg2, triple, full_sequence, full_minus_first };

inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::command, Metric::arg1,          Metric::arg2,
                                                     Metric::triple,  Metric::full_sequence, Metric::full_minus_first};

inline constexpr std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::command: return "command";
    case Metric::arg1: return "arg1";
    case Metric::arg2: return "arg2";
    case Metric::triple: return "triple";
    case Metric::full_sequence: return "full_sequence";
    case Metric::full_minus_first: return "full_minus_first";
  }
  return "?";
}

struct ModeScores {
  std::array<Cell, 6> cells{};
  std::map<Action, Cell> per_command;  // triple accuracy pooled by gold action

  Cell& operator[](Metric m) { return cells[static_cast<std::size_t>(m)]; }
  const Cell& operator[](Metric m) const { return cells[static_cast<std::size_t>(m)]; }
};

struct RecordOutcome {
  std::string id;
  bool prediction_missing = false;
  std::map<MatchMode, PlanScores> scores;
};

struct ScoreReport {
  Averaging averaging = Averaging::micro;
  std::vector<MatchMode> modes;
  std::map<MatchMode, ModeScores> by_mode;
  std::vector<RecordOutcome> records;  // in gold order
  std::size_t missing_predictions = 0;
};

struct Prediction {
  std::string id;
  Plan plan;
};

namespace detail {

inline void accumulate_micro(ModeScores& m, const Plan& gold, const PlanScores& s) {
  for (std::size_t i = 0; i < gold.size(); ++i) {
    m[Metric::command].add(s.command[i]);
    m[Metric::arg1].add(s.arg1[i]);
    if (s.arg2[i]) m[Metric::arg2].add(*s.arg2[i]);
    m[Metric::triple].add(s.triple[i]);
    m.per_command[gold[i].action].add(s.triple[i]);
  }
  m[Metric::full_sequence].add(s.full_sequence);
  m[Metric::full_minus_first].add(s.full_minus_first);
}

inline void accumulate_macro(ModeScores& m, const Plan& gold, const PlanScores& s) {
  auto rate = [](Cell& into, const Cell& local) {
    if (!local.reported()) return;
    into.numerator += local.value();
    ++into.denominator;
  };
  ModeScores local;
  accumulate_micro(local, gold, s);
  for (Metric metric : {Metric::command, Metric::arg1, Metric::arg2, Metric::triple}) rate(m[metric], local[metric]);
  for (auto& [a, c] : local.per_command) rate(m.per_command[a], c);
  m[Metric::full_sequence].add(s.full_sequence);
  m[Metric::full_minus_first].add(s.full_minus_first);
}

}  // namespace detail

// Scores every gold record against its prediction (matched by id).  A gold
// record without a prediction is scored against the empty plan.
inline ScoreReport aggregate(const std::vector<Record>& gold, const std::vector<Prediction>& predictions,
                             const std::vector<MatchMode>& modes = {kAllModes.begin(), kAllModes.end()},
                             Averaging averaging = Averaging::micro, unsigned workers = 1) {
  std::map<std::string, const Plan*> by_id;
  for (const auto& p : predictions)
    if (!by_id.emplace(p.id, &p.plan).second) throw Error("duplicate prediction id '" + p.id + "'");
  std::set<std::string> gold_ids;
  for (const auto& r : gold)
    if (!gold_ids.insert(r.id).second) throw Error("duplicate gold id '" + r.id + "'");
  for (const auto& p : predictions)
    if (!gold_ids.count(p.id)) throw Error("prediction id '" + p.id + "' has no gold record");

  ScoreReport report;
  report.averaging = averaging;
  report.modes = modes;
  report.records.resize(gold.size());
  const Plan empty;
  parallel_for(gold.size(), workers, [&](std::size_t i) {
    const auto& r = gold[i];
    auto it = by_id.find(r.id);
    auto& out = report.records[i];
    out.id = r.id;
    out.prediction_missing = it == by_id.end();
    const Plan& pred = out.prediction_missing ? empty : *it->second;
    for (MatchMode m : modes) out.scores.emplace(m, score_plan(r.gold, pred, m));
  });

  // Reduction runs in gold order so results are independent of scheduling.
  for (MatchMode m : modes) {
    auto& ms = report.by_mode[m];
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (averaging == Averaging::micro)
        detail::accumulate_micro(ms, gold[i].gold, report.records[i].scores.at(m));
      else
        detail::accumulate_macro(ms, gold[i].gold, report.records[i].scores.at(m));
    }
  }
  for (const auto& r : report.records) report.missing_predictions += r.prediction_missing ? 1 : 0;
  return report;
}

// Violations of the metric ordering guarantees; empty on a sound report.
inline std::vector<std::string> check_monotonicity(const ScoreReport& report) {
  std::vector<std::string> problems;
  const double eps = 1e-12;
  auto s = report.by_mode.find(MatchMode::strict);
  auto p = report.by_mode.find(MatchMode::permissive);
  if (s != report.by_mode.end() && p != report.by_mode.end()) {
    for (Metric m : kAllMetrics)
      if (p->second[m].value() + eps < s->second[m].value())
        problems.push_back("permissive < strict for " + std::string(metric_name(m)));
    for (Action a : kAllActions) {
      auto si = s->second.per_command.find(a);
      auto pi = p->second.per_command.find(a);
      if (si != s->second.per_command.end() && pi != p->second.per_command.end() &&
          pi->second.value() + eps < si->second.value())
        problems.push_back("permissive < strict for per-command " + std::string(action_name(a)));
    }
  }
  for (const auto& [mode, ms] : report.by_mode)
    if (ms[Metric::full_minus_first].value() + eps < ms[Metric::full_sequence].value())
      problems.push_back("full_minus_first < full_sequence under " + std::string(mode_name(mode)));
  return problems;
}

}  // namespace plankit
