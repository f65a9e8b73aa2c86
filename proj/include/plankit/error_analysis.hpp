#pragma once

// Minimal edit-script alignment between gold and predicted plans and a rule
// based classifier mapping edit operations onto prediction error classes.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "plankit/parallel.hpp"
#include "plankit/plan.hpp"
#include "plankit/scoring.hpp"

namespace plankit {

enum class EditKind { match, substitute, insert, remove };

inline constexpr std::string_view edit_kind_name(EditKind k) {
  switch (k) {
    case EditKind::match: return "match";
    case EditKind::substitute: return "substitute";
    case EditKind::insert: return "insert";
    case EditKind::remove: return "delete";
  }
  return "?";
}

struct EditOp {
  EditKind kind = EditKind::match;
  std::optional<std::size_t> gold_index;  // absent for insert
  std::optional<std::size_t> pred_index;  // absent for delete
  std::optional<CommandTriple> value;     // triple written by insert/substitute
  // Fields that differ, for substitute.
  bool action_differs = false;
  bool arg1_differs = false;
  bool arg2_differs = false;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct EditScript {
  std::vector<EditOp> ops;

  std::size_t cost() const {
    return static_cast<std::size_t>(
        std::count_if(ops.begin(), ops.end(), [](const EditOp& op) { return op.kind != EditKind::match; }));
  }
};

// Unit-cost alignment under strict triple equality.  Among minimal scripts the
// walk from the front prefers match, then substitute, then delete, then insert.
inline EditScript align(const Plan& gold, const Plan& pred) {
  if (gold.empty()) throw Error("align: gold plan is empty");
  const std::size_t n = gold.size(), m = pred.size();
  // cost[i][j]: distance between gold[i:] and pred[j:]
  std::vector<std::vector<std::size_t>> cost(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n + 1; i-- > 0;)
    for (std::size_t j = m + 1; j-- > 0;) {
      if (i == n) {
        cost[i][j] = m - j;
      } else if (j == m) {
        cost[i][j] = n - i;
      } else {
        const std::size_t diag = cost[i + 1][j + 1] + (gold[i] == pred[j] ? 0 : 1);
        cost[i][j] = std::min({diag, cost[i + 1][j] + 1, cost[i][j + 1] + 1});
      }
    }

  EditScript script;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    EditOp op;
    if (i < n && j < m && gold[i] == pred[j] && cost[i][j] == cost[i + 1][j + 1]) {
      op.kind = EditKind::match;
      op.gold_index = i++;
      op.pred_index = j++;
    } else if (i < n && j < m && gold[i] != pred[j] && cost[i][j] == cost[i + 1][j + 1] + 1) {
      op.kind = EditKind::substitute;
      op.action_differs = gold[i].action != pred[j].action;
      op.arg1_differs = gold[i].arg1 != pred[j].arg1;
      op.arg2_differs = gold[i].arg2 != pred[j].arg2;
      op.value = pred[j];
      op.gold_index = i++;
      op.pred_index = j++;
    } else if (i < n && cost[i][j] == cost[i + 1][j] + 1) {
      op.kind = EditKind::remove;
      op.gold_index = i++;
    } else {
      op.kind = EditKind::insert;
      op.value = pred[j];
      op.pred_index = j++;
    }
    script.ops.push_back(std::move(op));
  }
  return script;
}

// Applies the script to the gold plan.
inline Plan replay(const Plan& gold, const EditScript& script) {
  Plan out;
  for (const auto& op : script.ops) {
    switch (op.kind) {
      case EditKind::match:
        if (!op.gold_index || *op.gold_index >= gold.size()) throw Error("replay: match index out of range");
        out.push_back(gold[*op.gold_index]);
        break;
      case EditKind::substitute:
      case EditKind::insert:
        if (!op.value) throw Error("replay: edit without a value");
        out.push_back(*op.value);
        break;
      case EditKind::remove: break;
    }
  }
  return out;
}

// ============================================================================
// Classification
// ============================================================================

enum class ErrorLabel {
  wrong_location,
  wrong_object,
  extra_incorrect,
  extra_not_harmful,
  missed_action,
  order_swapped,
  offset_error,
  unexplained,
  // Only ever supplied by a manual overlay.
  gold_instructions_incorrect,
  gold_instructions_incomplete,
};

inline constexpr std::array<ErrorLabel, 10> kAllErrorLabels = {
    ErrorLabel::wrong_location,  ErrorLabel::wrong_object,  ErrorLabel::extra_incorrect,
    ErrorLabel::extra_not_harmful, ErrorLabel::missed_action, ErrorLabel::order_swapped,
    ErrorLabel::offset_error,    ErrorLabel::unexplained,   ErrorLabel::gold_instructions_incorrect,
    ErrorLabel::gold_instructions_incomplete};

inline constexpr std::string_view error_label_name(ErrorLabel l) {
  switch (l) {
    case ErrorLabel::wrong_location: return "wrong_location";
    case ErrorLabel::wrong_object: return "wrong_object";
    case ErrorLabel::extra_incorrect: return "extra_incorrect";
    case ErrorLabel::extra_not_harmful: return "extra_not_harmful";
    case ErrorLabel::missed_action: return "missed_action";
    case ErrorLabel::order_swapped: return "order_swapped";
    case ErrorLabel::offset_error: return "offset_error";
    case ErrorLabel::unexplained: return "unexplained";
    case ErrorLabel::gold_instructions_incorrect: return "gold_instructions_incorrect";
    case ErrorLabel::gold_instructions_incomplete: return "gold_instructions_incomplete";
  }
  return "?";
}

inline ErrorLabel parse_error_label(std::string_view s) {
  for (ErrorLabel l : kAllErrorLabels)
    if (error_label_name(l) == s) return l;
  throw Error("unknown error label '" + std::string(s) + "'");
}

struct Attribution {
  ErrorLabel label;
  std::vector<std::size_t> ops;  // indices into EditScript::ops

  friend bool operator==(const Attribution&, const Attribution&) = default;
};

struct Classification {
  std::set<ErrorLabel> labels;
  std::vector<Attribution> attributions;
};

namespace detail {

inline void check_script(const Plan& gold, const Plan& pred, const EditScript& script) {
  std::size_t gi = 0, pj = 0;
  for (const auto& op : script.ops) {
    const bool consumes_gold = op.kind != EditKind::insert;
    const bool consumes_pred = op.kind != EditKind::remove;
    if (consumes_gold != op.gold_index.has_value() || consumes_pred != op.pred_index.has_value())
      throw Error("edit script does not match plan pair: bad op indices");
    if (consumes_gold && *op.gold_index != gi++) throw Error("edit script does not match plan pair: gold order");
    if (consumes_pred && *op.pred_index != pj++) throw Error("edit script does not match plan pair: pred order");
    if (gi > gold.size() || pj > pred.size()) throw Error("edit script does not match plan pair: out of range");
    if (op.kind == EditKind::match && gold[*op.gold_index] != pred[*op.pred_index])
      throw Error("edit script does not match plan pair: match of unequal triples");
  }
  if (gi != gold.size() || pj != pred.size()) throw Error("edit script does not match plan pair: incomplete");
  if (replay(gold, script) != pred) throw Error("edit script does not match plan pair: replay differs");
}

inline ErrorLabel classify_substitute(const CommandTriple& g, const EditOp& op) {
  if (op.action_differs || op.arg1_differs == op.arg2_differs) return ErrorLabel::unexplained;
  const ArgClass cls = slot_class(g.action, op.arg1_differs ? 1 : 2);
  return cls == ArgClass::object ? ErrorLabel::wrong_object : ErrorLabel::wrong_location;
}

}  // namespace detail

inline Classification classify(const Plan& gold, const Plan& pred, const EditScript& script) {
  detail::check_script(gold, pred, script);
  const auto& ops = script.ops;
  Classification out;
  auto attribute = [&out](ErrorLabel label, std::vector<std::size_t> which) {
    out.labels.insert(label);
    out.attributions.push_back({label, std::move(which)});
  };

  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto& op = ops[k];
    switch (op.kind) {
      case EditKind::match: break;
      case EditKind::substitute: {
        const std::size_t gi = *op.gold_index, pj = *op.pred_index;
        if (k + 1 < ops.size() && ops[k + 1].kind == EditKind::substitute && *ops[k + 1].gold_index == gi + 1 &&
            *ops[k + 1].pred_index == pj + 1 && gold[gi] == pred[pj + 1] && gold[gi + 1] == pred[pj]) {
          attribute(ErrorLabel::order_swapped, {k, k + 1});
          ++k;
          break;
        }
        attribute(detail::classify_substitute(gold[gi], op), {k});
        break;
      }
      case EditKind::insert: {
        const auto& extra = pred[*op.pred_index];
        bool harmless = false;
        if (extra.action == Action::goto_ && extra.arg1) {
          auto next = std::find_if(ops.begin() + static_cast<std::ptrdiff_t>(k) + 1, ops.end(),
                                   [](const EditOp& o) { return o.kind == EditKind::match; });
          if (next != ops.end()) {
            const auto& target = gold[*next->gold_index];
            harmless = extra.arg1 == target.arg1 || extra.arg1 == target.arg2;
          }
        }
        attribute(harmless ? ErrorLabel::extra_not_harmful : ErrorLabel::extra_incorrect, {k});
        break;
      }
      case EditKind::remove: attribute(ErrorLabel::missed_action, {k}); break;
    }
  }

  // Supplementary: an insertion or deletion shifts every later matched triple.
  std::vector<std::size_t> shifting;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (ops[k].kind != EditKind::insert && ops[k].kind != EditKind::remove) continue;
    const bool later_match = std::any_of(ops.begin() + static_cast<std::ptrdiff_t>(k) + 1, ops.end(),
                                         [](const EditOp& o) { return o.kind == EditKind::match; });
    if (later_match) shifting.push_back(k);
  }
  if (!shifting.empty()) attribute(ErrorLabel::offset_error, std::move(shifting));
  return out;
}

inline Classification classify(const Plan& gold, const Plan& pred) { return classify(gold, pred, align(gold, pred)); }

// ============================================================================
// Corpus report
// ============================================================================

struct ErrorPair {
  std::string id;
  Plan gold;
  Plan pred;
};

using Overlay = std::map<std::string, std::vector<ErrorLabel>>;

struct PairAnalysis {
  std::string id;
  bool errorful = false;
  std::size_t edit_cost = 0;
  std::set<ErrorLabel> automatic;
  std::set<ErrorLabel> manual;

  std::set<ErrorLabel> labels() const {
    auto all = automatic;
    all.insert(manual.begin(), manual.end());
    return all;
  }
};

struct ErrorReport {
  std::size_t pairs = 0;
  std::size_t errorful = 0;
  std::size_t overlay_ignored = 0;  // overlay entries on pairs that were not errorful
  std::map<ErrorLabel, std::size_t> counts;
  std::vector<PairAnalysis> details;  // input order

  double proportion(ErrorLabel l) const {
    auto it = counts.find(l);
    return errorful && it != counts.end() ? static_cast<double>(it->second) / static_cast<double>(errorful) : 0.0;
  }
};

// Label proportions over the pairs that strict full-sequence scoring rejects.
// A pair can carry several labels, so proportions may sum past one.
inline ErrorReport error_report(const std::vector<ErrorPair>& pairs, const Overlay& overlay = {},
                                unsigned workers = 1) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (!index.emplace(pairs[i].id, i).second) throw Error("duplicate pair id '" + pairs[i].id + "'");
  for (const auto& [id, labels] : overlay)
    if (!index.count(id)) throw Error("overlay references unknown id '" + id + "'");

  ErrorReport report;
  report.pairs = pairs.size();
  report.details.resize(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const auto& p = pairs[i];
    auto& d = report.details[i];
    d.id = p.id;
    d.errorful = !score_plan(p.gold, p.pred, MatchMode::strict).full_sequence;
    if (!d.errorful) return;
    auto script = align(p.gold, p.pred);
    d.edit_cost = script.cost();
    d.automatic = classify(p.gold, p.pred, script).labels;
  });

  for (auto& d : report.details) {
    auto it = overlay.find(d.id);
    if (it != overlay.end()) {
      if (!d.errorful) {
        ++report.overlay_ignored;
        continue;
      }
      d.manual.insert(it->second.begin(), it->second.end());
    }
    if (!d.errorful) continue;
    ++report.errorful;
    for (ErrorLabel l : d.labels()) ++report.counts[l];
  }
  return report;
}

}  // namespace plankit
