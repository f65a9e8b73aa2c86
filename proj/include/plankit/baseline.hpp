#pragma once

// Nearest-neighbour retrieval planner: TF-IDF cosine over training directives,
// returning the gold plan of the closest training record.  Optional lexical
// argument substitution and start-location conditioning refine the copy.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plankit/json_io.hpp"
#include "plankit/parallel.hpp"
#include "plankit/plan.hpp"

namespace plankit {

// Lowercased alphanumeric runs.
inline std::vector<std::string> directive_terms(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Neighbor {
  Plan plan;
  std::string neighbor_id;
  double similarity = 0;
  bool fallback = false;  // no term overlap with any training directive
};

class DirectiveIndex {
 public:
  using SparseVector = std::vector<std::pair<std::size_t, double>>;  // (term id, weight), sorted by term

  explicit DirectiveIndex(const std::vector<Record>& train) {
    if (train.empty()) throw Error("cannot build an index over an empty corpus");
    std::vector<const Record*> docs;
    for (const auto& r : train) docs.push_back(&r);
    std::sort(docs.begin(), docs.end(), [](const Record* a, const Record* b) { return a->id < b->id; });
    for (std::size_t i = 1; i < docs.size(); ++i)
      if (docs[i]->id == docs[i - 1]->id) throw Error("duplicate training id '" + docs[i]->id + "'");

    std::vector<std::map<std::string, std::size_t>> counts(docs.size());
    std::map<std::string, std::size_t> df;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (auto& t : directive_terms(docs[d]->directive)) ++counts[d][t];
      for (const auto& [t, c] : counts[d]) ++df[t];
    }
    std::size_t next = 0;
    for (const auto& [t, n] : df) {
      term_ids_.emplace(t, next++);
      // Smoothed idf stays positive, so every nonempty directive has a nonzero norm.
      idf_.push_back(std::log((1.0 + static_cast<double>(docs.size())) / (1.0 + static_cast<double>(n))) + 1.0);
    }

    postings_.resize(idf_.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      ids_.push_back(docs[d]->id);
      plans_.push_back(docs[d]->gold);
      directives_.push_back(docs[d]->directive);
      SparseVector v = weigh(counts[d]);
      double sq = 0;
      for (const auto& [term, w] : v) {
        sq += w * w;
        postings_[term].emplace_back(d, w);
      }
      squared_norms_.push_back(sq);
      vectors_.push_back(std::move(v));
    }
    pick_modal_plan();
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const SparseVector& vector_of(std::size_t doc) const { return vectors_[doc]; }
  const std::string& directive_of(std::size_t doc) const { return directives_[doc]; }
  const Plan& plan_of(std::size_t doc) const { return plans_[doc]; }

  // TF-IDF vector of arbitrary text; terms unseen in training are ignored.
  SparseVector vectorize(std::string_view text) const {
    std::map<std::string, std::size_t> counts;
    for (auto& t : directive_terms(text)) ++counts[t];
    return weigh(counts);
  }

  Neighbor predict(std::string_view directive) const {
    const SparseVector q = vectorize(directive);
    double q_sq = 0;
    for (const auto& [term, w] : q) q_sq += w * w;
    if (q.empty() || q_sq == 0) return {plans_[modal_doc_], ids_[modal_doc_], 0.0, true};

    std::vector<double> dot(ids_.size(), 0.0);
    for (const auto& [term, qw] : q)
      for (const auto& [doc, dw] : postings_[term]) dot[doc] += qw * dw;

    std::size_t best = 0;
    double best_sim = -1;
    for (std::size_t d = 0; d < dot.size(); ++d) {
      if (dot[d] == 0) continue;
      const double sim = dot[d] / std::sqrt(q_sq * squared_norms_[d]);
      if (sim > best_sim) {  // strict: the earlier (smaller) id wins ties
        best_sim = sim;
        best = d;
      }
    }
    return {plans_[best], ids_[best], std::min(best_sim, 1.0), false};
  }

  const std::string& modal_id() const { return ids_[modal_doc_]; }

  friend bool operator==(const DirectiveIndex& a, const DirectiveIndex& b) {
    return a.ids_ == b.ids_ && a.term_ids_ == b.term_ids_ && a.idf_ == b.idf_ && a.vectors_ == b.vectors_ &&
           a.squared_norms_ == b.squared_norms_ && a.modal_doc_ == b.modal_doc_;
  }

 private:
  SparseVector weigh(const std::map<std::string, std::size_t>& counts) const {
    SparseVector v;
    for (const auto& [t, c] : counts) {
      auto it = term_ids_.find(t);
      if (it == term_ids_.end()) continue;
      v.emplace_back(it->second, static_cast<double>(c) * idf_[it->second]);
    }
    std::sort(v.begin(), v.end());
    return v;
  }

  void pick_modal_plan() {
    std::map<std::string, std::pair<std::size_t, std::size_t>> freq;  // plan key -> (count, first doc)
    for (std::size_t d = 0; d < plans_.size(); ++d) {
      auto [it, fresh] = freq.emplace(plan_to_json(plans_[d]).dump(), std::make_pair(0, d));
      ++it->second.first;
    }
    std::size_t best_count = 0;
    for (const auto& [key, cf] : freq)
      if (cf.first > best_count || (cf.first == best_count && cf.second < modal_doc_)) {
        best_count = cf.first;
        modal_doc_ = cf.second;
      }
  }

  std::vector<std::string> ids_;
  std::vector<Plan> plans_;
  std::vector<std::string> directives_;
  std::map<std::string, std::size_t> term_ids_;
  std::vector<double> idf_;
  std::vector<SparseVector> vectors_;
  std::vector<double> squared_norms_;
  std::vector<std::vector<std::pair<std::size_t, double>>> postings_;
  std::size_t modal_doc_ = 0;
};

inline DirectiveIndex build_index(const Corpus& train) { return DirectiveIndex(train.records); }

// ============================================================================
// Refinements
// ============================================================================

namespace detail {

struct Mention {
  std::size_t begin, end;
  std::vector<std::string> item;
  ArgClass cls;
};

// Vocabulary items found in the directive that are not inside a longer match.
inline std::map<ArgClass, std::set<std::vector<std::string>>> maximal_mentions(std::string_view directive,
                                                                              const Vocabularies& vocab) {
  const auto terms = directive_terms(directive);
  std::vector<Mention> found;
  for (ArgClass cls : {ArgClass::object, ArgClass::receptacle, ArgClass::location})
    for (const auto& item : vocab.of(cls)) {
      if (item.empty() || item.size() > terms.size()) continue;
      for (std::size_t b = 0; b + item.size() <= terms.size(); ++b)
        if (std::equal(item.begin(), item.end(), terms.begin() + static_cast<std::ptrdiff_t>(b)))
          found.push_back({b, b + item.size(), item, cls});
    }
  std::map<ArgClass, std::set<std::vector<std::string>>> out;
  for (const auto& m : found) {
    const bool inside = std::any_of(found.begin(), found.end(), [&](const Mention& o) {
      return o.begin <= m.begin && m.end <= o.end && (o.end - o.begin) > (m.end - m.begin);
    });
    if (!inside) out[m.cls].insert(m.item);
  }
  return out;
}

}  // namespace detail

// Swaps an argument the neighbour's directive mentions for the one the test
// directive mentions instead, when that correspondence is unambiguous: within
// a class exactly one item disappears and exactly one new item appears.
inline Plan substitute_arguments(const Plan& plan, std::string_view train_directive, std::string_view test_directive,
                                 const Vocabularies& vocab) {
  auto train = detail::maximal_mentions(train_directive, vocab);
  auto test = detail::maximal_mentions(test_directive, vocab);

  std::map<std::vector<std::string>, std::optional<std::vector<std::string>>> mapping;  // nullopt: conflicting
  for (ArgClass cls : {ArgClass::object, ArgClass::receptacle, ArgClass::location}) {
    std::vector<std::vector<std::string>> gone, fresh;
    std::set_difference(train[cls].begin(), train[cls].end(), test[cls].begin(), test[cls].end(),
                        std::back_inserter(gone));
    std::set_difference(test[cls].begin(), test[cls].end(), train[cls].begin(), train[cls].end(),
                        std::back_inserter(fresh));
    if (gone.size() != 1 || fresh.size() != 1) continue;
    auto [it, inserted] = mapping.emplace(gone.front(), fresh.front());
    if (!inserted && it->second != fresh.front()) it->second.reset();
  }

  Plan out = plan;
  for (auto& t : out)
    for (OptArgument* arg : {&t.arg1, &t.arg2}) {
      if (!*arg) continue;
      auto it = mapping.find((*arg)->tokens);
      if (it != mapping.end() && it->second) (*arg)->tokens = *it->second;
    }
  return out;
}

inline Plan condition_on_start(const Plan& plan, const Argument& start) {
  if (start.tokens.empty()) throw Error("start location is empty");
  Argument loc = start;
  loc.cls = ArgClass::location;
  Plan out = plan;
  if (!out.empty() && out.front().action == Action::goto_) {
    out.front().arg1 = loc;
  } else {
    out.insert(out.begin(), CommandTriple{Action::goto_, loc, std::nullopt});
  }
  return out;
}

// ============================================================================
// Planner
// ============================================================================

struct PlannerOptions {
  bool condition_start = false;
  bool substitute_args = false;
};

class BaselinePlanner {
 public:
  BaselinePlanner(const Corpus& train, PlannerOptions options)
      : index_(train.records), vocab_(train.vocab), options_(options) {
    for (std::size_t d = 0; d < index_.size(); ++d) directive_by_id_.emplace(index_.ids()[d], d);
  }

  const DirectiveIndex& index() const { return index_; }

  PredictionRecord predict(const Record& test) const {
    Neighbor n = index_.predict(test.directive);
    PredictionRecord out;
    out.id = test.id;
    out.neighbor_id = n.neighbor_id;
    out.similarity = n.similarity;
    out.plan = std::move(n.plan);
    if (n.fallback) out.flags.emplace_back("fallback");
    if (options_.substitute_args) {
      const auto& neighbor_directive = index_.directive_of(directive_by_id_.at(n.neighbor_id));
      Plan swapped = substitute_arguments(out.plan, neighbor_directive, test.directive, vocab_);
      if (swapped != out.plan) out.flags.emplace_back("substituted");
      out.plan = std::move(swapped);
    }
    if (options_.condition_start) {
      if (test.start_location) {
        out.plan = condition_on_start(out.plan, *test.start_location);
        out.flags.emplace_back("conditioned");
      } else {
        out.flags.emplace_back("no-start-location");
      }
    }
    return out;
  }

  std::vector<PredictionRecord> predict_all(const std::vector<Record>& tests, unsigned workers = 1) const {
    std::vector<PredictionRecord> out(tests.size());
    parallel_for(tests.size(), workers, [&](std::size_t i) { out[i] = predict(tests[i]); });
    return out;
  }

 private:
  DirectiveIndex index_;
  Vocabularies vocab_;
  PlannerOptions options_;
  std::map<std::string, std::size_t> directive_by_id_;
};

}  // namespace plankit
