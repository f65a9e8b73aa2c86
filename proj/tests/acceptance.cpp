// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.  Each check carries its own runtime budget.

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "plankit/plankit.hpp"
#include "support/cli_runner.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace plankit;
namespace t = plankit::testkit;

namespace {

// Collects the first few failure messages of a check.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (messages_.size() < 5) messages_.push_back(what);
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failures_) + " failure(s)";
    for (const auto& m : messages_) s += "; " + m;
    return s;
  }
  void note(const std::string& n) { notes_ = n; }
  const std::string& notes() const { return notes_; }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> messages_;
  std::string notes_;
};

// Every report produced by this suite is checked for metric ordering.
std::size_t g_score_runs = 0;
std::vector<std::string> g_monotonicity_problems;

ScoreReport scored(const std::vector<Record>& gold, const std::vector<Prediction>& preds,
                   Averaging averaging = Averaging::micro) {
  auto r = aggregate(gold, preds, {MatchMode::strict, MatchMode::permissive}, averaging, 0);
  ++g_score_runs;
  for (auto& p : check_monotonicity(r)) g_monotonicity_problems.push_back(p);
  return r;
}

Record record(const std::string& id, Plan gold, std::string directive = "do it") {
  Record r;
  r.id = id;
  r.plan_id = id;
  r.directive = std::move(directive);
  r.gold = std::move(gold);
  r.start_location = extract_start_location(r);
  return r;
}

std::string bag_key(const std::string& directive) {
  auto terms = directive_terms(directive);
  std::sort(terms.begin(), terms.end());
  return detail::join(terms);
}

// ----------------------------------------------------------------------------

void scoring_fixtures(Check& c) {
  c.expect(!match_argument(normalize_argument("butter knife"), normalize_argument("knife"), MatchMode::strict),
           "strict(butter knife, knife) should be false");
  c.expect(match_argument(normalize_argument("desk lamp"), normalize_argument("lamp"), MatchMode::permissive),
           "permissive(desk lamp, lamp) should be true");

  std::vector<Record> gold = {record("knife", {make_triple(Action::pickup, "butter knife")}),
                              record("lamp", {make_triple(Action::toggle, "desk lamp")})};
  std::vector<Prediction> pred = {{"knife", {make_triple(Action::pickup, "knife")}},
                                  {"lamp", {make_triple(Action::toggle, "lamp")}}};
  auto r = scored(gold, pred);
  const auto& s = r.by_mode.at(MatchMode::strict);
  const auto& p = r.by_mode.at(MatchMode::permissive);
  c.expect(s[Metric::arg1].numerator == 0 && s[Metric::arg1].denominator == 2, "strict arg1 should be 0/2");
  c.expect(p[Metric::arg1].numerator == 2 && p[Metric::arg1].denominator == 2, "permissive arg1 should be 2/2");
  c.expect(s[Metric::command].value() == 1.0 && p[Metric::command].value() == 1.0, "commands agree");
  c.expect(s[Metric::full_sequence].value() == 0.0 && p[Metric::full_sequence].value() == 1.0,
           "full sequence differs only through the argument pairs");
  // The modes disagree on exactly these two arg1 positions.
  for (const auto& rec : r.records)
    c.expect(rec.scores.at(MatchMode::strict).arg1 == std::vector<bool>{false} &&
                 rec.scores.at(MatchMode::permissive).arg1 == std::vector<bool>{true},
             "record " + rec.id + " arg1 outcomes");
}

void round_trip(Check& c) {
  std::mt19937_64 rng(20240601);
  std::size_t checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const Plan p = t::random_valid_plan(rng, 1, 20);
    const std::string text = serialize_example("randomized directive " + std::to_string(i), p);
    try {
      c.expect(parse_generated(text) == p, "round trip differs: " + text);
    } catch (const std::exception& e) {
      c.expect(false, std::string("parse failed: ") + e.what());
    }
    ++checked;
  }
  c.note(std::to_string(checked) + " plans");
}

bool same_scores(const PlanScores& s, const t::OracleScores& o) {
  if (s.command.size() != o.command.size()) return false;
  for (std::size_t i = 0; i < s.command.size(); ++i) {
    if (s.command[i] != (o.command[i] == 1) || s.arg1[i] != (o.arg1[i] == 1) || s.triple[i] != (o.triple[i] == 1))
      return false;
    const std::optional<bool> a2 = o.arg2[i] < 0 ? std::nullopt : std::optional<bool>(o.arg2[i] == 1);
    if (s.arg2[i] != a2) return false;
  }
  return s.full_sequence == o.full_sequence && s.full_minus_first == o.full_minus_first;
}

void scorer_oracle(Check& c) {
  // Six triples over the five tokens {desk, lamp, butter, knife, mug}, chosen
  // so that strict and permissive matching, absent arguments and arity
  // differences all occur.
  const Plan alphabet = {make_triple(Action::goto_, "desk"),       make_triple(Action::goto_, "desk lamp"),
                         make_triple(Action::toggle, "lamp"),      make_triple(Action::put, "butter knife", "mug"),
                         make_triple(Action::pickup, "knife"),     make_triple(Action::pickup, "knife", "desk")};
  std::vector<Plan> plans = {{}};
  for (std::size_t len = 1, begin = 0; len <= 4; ++len) {
    const std::size_t end = plans.size();
    for (std::size_t k = begin; k < end; ++k)
      for (const auto& tr : alphabet) {
        Plan p = plans[k];
        p.push_back(tr);
        plans.push_back(std::move(p));
      }
    begin = end;
  }
  std::size_t pairs = 0;
  for (const auto& g : plans) {
    if (g.empty()) continue;
    for (const auto& p : plans) {
      for (MatchMode m : kAllModes) {
        const bool permissive = m == MatchMode::permissive;
        if (!same_scores(score_plan(g, p, m), t::oracle_score(g, p, permissive)))
          c.expect(false, "score_plan differs from oracle on " + std::to_string(g.size()) + "x" + std::to_string(p.size()));
      }
      ++pairs;
    }
  }

  // Longer random pairs, compared plan by plan and through corpus aggregation.
  std::mt19937_64 rng(77);
  std::vector<Record> gold;
  std::vector<Prediction> preds;
  for (int i = 0; i < 10000; ++i) {
    Plan g = t::random_valid_plan(rng, 5, 20);
    Plan p = g;
    for (auto& tr : p)
      if (std::bernoulli_distribution(0.15)(rng)) tr = t::random_valid_triple(rng);
    if (std::bernoulli_distribution(0.2)(rng)) p.pop_back();
    if (std::bernoulli_distribution(0.2)(rng)) p.push_back(t::random_valid_triple(rng));
    for (MatchMode m : kAllModes)
      if (!same_scores(score_plan(g, p, m), t::oracle_score(g, p, m == MatchMode::permissive)))
        c.expect(false, "random pair " + std::to_string(i) + " differs from oracle");
    gold.push_back(record("r" + std::to_string(i), std::move(g)));
    if (i % 50 != 0) preds.push_back({gold.back().id, std::move(p)});  // a few missing predictions
    ++pairs;
  }
  auto report = scored(gold, preds);
  for (MatchMode m : kAllModes) {
    auto oracle = t::oracle_aggregate(gold, preds, m == MatchMode::permissive);
    const auto& got = report.by_mode.at(m);
    for (Metric metric : kAllMetrics) {
      const auto& o = oracle.cells[std::string(metric_name(metric))];
      c.expect(got[metric].numerator == static_cast<double>(o.num) &&
                   got[metric].denominator == static_cast<std::uint64_t>(o.den),
               std::string(mode_name(m)) + " " + std::string(metric_name(metric)) + " cell differs from oracle");
    }
    for (const auto& [a, cell] : got.per_command) {
      const auto& o = oracle.per_command[std::string(action_name(a))];
      c.expect(cell.numerator == static_cast<double>(o.num) && cell.denominator == static_cast<std::uint64_t>(o.den),
               "per-command cell differs for " + std::string(action_name(a)));
    }
    c.expect(got.per_command.size() == oracle.per_command.size(), "per-command table size");
  }
  c.note(std::to_string(pairs) + " plan pairs");
}

void monotonicity(Check& c) {
  // Extra random evaluation runs under both averaging schemes, on top of every
  // run made by the other checks.
  std::mt19937_64 rng(5);
  for (int run = 0; run < 50; ++run) {
    std::vector<Record> gold;
    std::vector<Prediction> preds;
    for (int i = 0; i < 100; ++i) {
      gold.push_back(record("r" + std::to_string(i), t::random_valid_plan(rng, 1, 8)));
      Plan p = gold.back().gold;
      for (auto& tr : p)
        if (std::bernoulli_distribution(0.3)(rng)) {
          // Keep the action, perturb an argument: exercises permissive matches.
          CommandTriple other = t::random_valid_triple(rng);
          if (other.action == tr.action) tr = other;
          else if (tr.arg1) tr.arg1->tokens.push_back("x1");
        }
      preds.push_back({gold.back().id, std::move(p)});
    }
    scored(gold, preds, run % 2 ? Averaging::macro : Averaging::micro);
  }
  for (const auto& p : g_monotonicity_problems) c.expect(false, p);
  c.note(std::to_string(g_score_runs) + " library score runs");
}

std::string fuzz_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pool = {
      "go",   "to",   "pick", "up",    "put",    "cool",   "heat",   "clean",  "slice", "toggle", "the",
      "a",    "in",   "on",   "from",  "with",   "<arg1>", "<arg2>", "[CSEP]", "[EOS]", "[SEP]",  "mug",
      "spoon", "desk", "lamp", "fridge", "apple", "knife",  "sink",   "basin",  "dance", "Pick",   "<arg1>x"};
  std::uniform_int_distribution<std::size_t> len(0, 30), pick(0, pool.size() - 1);
  std::string s;
  for (std::size_t n = len(rng); n > 0; --n) {
    if (!s.empty()) s += ' ';
    s += pool[pick(rng)];
  }
  return s;
}

void repair_fixtures(Check& c) {
  auto expect_repair = [&](const std::string& in, const std::string& out) {
    const std::string got = repair(in);
    c.expect(got == out, "repair(\"" + in + "\") = \"" + got + "\", expected \"" + out + "\"");
  };
  expect_repair("pick <arg1> the apple [EOS]", "pick up <arg1> the apple [EOS]");
  expect_repair("go to to <arg1> the the countertop [EOS]", "go to <arg1> the countertop [EOS]");
  expect_repair("put the spoon <arg2> in the mug [EOS]", "put <arg1> the spoon <arg2> in the mug [EOS]");
  expect_repair("put <arg1> the spoon in the mug [EOS]", "put <arg1> the spoon <arg2> in the mug [EOS]");
  c.expect(parse_generated(repair("pick <arg1> the apple")) == Plan{make_triple(Action::pickup, "apple")},
           "repaired bigram parses");

  std::mt19937_64 rng(99);
  for (int i = 0; i < 10000; ++i) {
    const std::string s = fuzz_text(rng);
    const std::string once = repair(s);
    c.expect(repair(once) == once, "not idempotent on: " + s);
  }
  c.note("10000 fuzzed strings");
}

void alignment_oracle(Check& c) {
  const Plan alphabet = {make_triple(Action::goto_, "desk"), make_triple(Action::pickup, "pen"),
                         make_triple(Action::put, "pen", "shelf")};
  std::vector<Plan> plans = {{}};
  for (std::size_t len = 1, begin = 0; len <= 5; ++len) {
    const std::size_t end = plans.size();
    for (std::size_t k = begin; k < end; ++k)
      for (const auto& tr : alphabet) {
        Plan p = plans[k];
        p.push_back(tr);
        plans.push_back(std::move(p));
      }
    begin = end;
  }
  std::size_t pairs = 0;
  for (const auto& g : plans) {
    if (g.empty()) continue;
    for (const auto& p : plans) {
      const auto script = align(g, p);
      const std::size_t expect = t::oracle_levenshtein(g, p);
      if (script.cost() != expect)
        c.expect(false, "cost " + std::to_string(script.cost()) + " != oracle " + std::to_string(expect));
      if (replay(g, script) != p) c.expect(false, "replay does not reproduce prediction");
      ++pairs;
    }
  }
  c.note(std::to_string(pairs) + " plan pairs");
}

void table3_fixtures(Check& c) {
  using L = ErrorLabel;
  Plan gold = {make_triple(Action::goto_, "countertop"), make_triple(Action::pickup, "knife"),
               make_triple(Action::goto_, "countertop"), make_triple(Action::put, "knife", "countertop")};
  Plan pred = gold;
  pred[3] = make_triple(Action::put, "knife", "microwave");
  c.expect(classify(gold, pred).labels == std::set<L>{L::wrong_location}, "knife/microwave -> {wrong_location}");

  Plan mug_gold = {make_triple(Action::goto_, "coffee machine"), make_triple(Action::pickup, "mug"),
                   make_triple(Action::put, "mug", "sink basin")};
  Plan mug_pred = {make_triple(Action::goto_, "coffee machine"), make_triple(Action::pickup, "mug"),
                   make_triple(Action::goto_, "sink basin"), make_triple(Action::put, "mug", "sink basin")};
  c.expect(classify(mug_gold, mug_pred).labels == std::set<L>{L::extra_not_harmful, L::offset_error},
           "sink basin -> {extra_not_harmful, offset_error}");
  c.expect(classify(gold, gold).labels.empty(), "identical plans -> {}");
}

void split_downsample(Check& c, double& seconds_excluding_generation) {
  t::SyntheticOptions opt;
  opt.groups_per_task = 400;
  const Corpus corpus(t::synthetic_records(opt));
  c.expect(corpus.size() == 8400, "synthetic corpus has " + std::to_string(corpus.size()) + " records");

  const auto start = std::chrono::steady_clock::now();
  SplitSpec spec;
  spec.seed = 2024;
  auto a = split(corpus, spec), b = split(corpus, spec);
  for (std::size_t k = 0; k < 3; ++k)
    c.expect(records_to_jsonl(*a.parts()[k]) == records_to_jsonl(*b.parts()[k]), "split not byte-identical");
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto* part : a.parts()) {
    std::set<std::string> here;
    for (const auto& r : *part) here.insert(r.plan_id);
    for (const auto& id : here) c.expect(seen.insert(id).second, "plan group " + id + " in two splits");
    total += part->size();
  }
  c.expect(total == corpus.size(), "split is not a partition");

  auto groups = [](const Corpus& s) {
    std::set<std::string> ids;
    for (const auto& r : s.records) ids.insert(r.plan_id);
    return ids;
  };
  auto s1 = downsample(corpus, {0.01, 7, true}), s10 = downsample(corpus, {0.10, 7, true}),
       s25 = downsample(corpus, {0.25, 7, true});
  c.expect(records_to_jsonl(s1.records) == records_to_jsonl(downsample(corpus, {0.01, 7, true}).records),
           "downsample not byte-identical");
  auto g1 = groups(s1), g10 = groups(s10), g25 = groups(s25);
  c.expect(std::includes(g10.begin(), g10.end(), g1.begin(), g1.end()), "1% not inside 10%");
  c.expect(std::includes(g25.begin(), g25.end(), g10.begin(), g10.end()), "10% not inside 25%");
  std::map<std::string, std::set<std::string>> per_task;
  for (const auto& r : s1.records) per_task[r.task_type].insert(r.plan_id);
  c.expect(per_task.size() == 7, "stratified 1% covers " + std::to_string(per_task.size()) + " task types");
  for (const auto& [task, ids] : per_task)
    c.expect(ids.size() == 4, task + " keeps " + std::to_string(ids.size()) + " groups at 1%");
  seconds_excluding_generation =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.note("8400 records; 1% keeps " + std::to_string(g1.size()) + " groups");
}

void baseline_sanity(Check& c) {
  t::SyntheticOptions opt;
  opt.groups_per_task = 60;
  opt.seed = 31;
  auto all = t::synthetic_records(opt);

  // Verbatim duplicates.  Directives whose bag of words is shared by another
  // plan group are ambiguous for any planner and are left out of the test set.
  std::map<std::string, std::set<std::string>> owners;
  for (const auto& r : all) owners[bag_key(r.directive)].insert(r.plan_id);
  std::vector<Record> dup_test;
  for (const auto& r : all)
    if (owners[bag_key(r.directive)].size() == 1) {
      Record q = r;
      q.id = "dup-" + r.id;
      dup_test.push_back(std::move(q));
    }
  BaselinePlanner full(Corpus(all), {});
  auto dup = scored(dup_test, to_predictions(full.predict_all(dup_test, 0)));
  const double dup_acc = dup.by_mode.at(MatchMode::strict)[Metric::full_sequence].value();
  c.expect(dup_acc == 1.0, "duplicate-directive strict full-sequence accuracy " + std::to_string(dup_acc));

  // Held-out paraphrases: the last directive of every plan group is kept out
  // of training.
  std::vector<Record> train, test;
  for (const auto& r : all) (r.id.back() == '2' ? test : train).push_back(r);
  BaselinePlanner held(Corpus(train), {});
  auto para = scored(test, to_predictions(held.predict_all(test, 0)));
  const double para_acc = para.by_mode.at(MatchMode::strict)[Metric::full_sequence].value();
  c.expect(para_acc > 0.0, "held-out paraphrase accuracy is zero");
  std::ostringstream n;
  n << dup_test.size() << " duplicates at " << std::fixed << std::setprecision(1) << 100 * dup_acc << "%, "
    << test.size() << " paraphrases at " << 100 * para_acc << "%";
  c.note(n.str());
}

void end_to_end(Check& c) {
  t::TempDir dir;
  auto q = [&](const std::string& name) { return t::shell_quote(dir / name); };
  t::SyntheticOptions opt;
  opt.groups_per_task = 40;
  opt.seed = 12;
  t::write_external(dir.path() / "external", t::synthetic_records(opt));

  auto step = [&](const std::string& what, const std::string& args) {
    auto r = t::run_cli(dir, args);
    c.expect(r.exit_code == 0, what + " exited " + std::to_string(r.exit_code) + ": " + r.err);
    return r;
  };
  step("ingest", "ingest --source " + q("external") + " --out " + q("corpus.jsonl"));
  step("split", "split --in " + q("corpus.jsonl") + " --out-dir " + q("splits") + " --seed 4");
  step("predict", "predict --train " + q("splits/train.jsonl") + " --test " + q("splits/test.jsonl") + " --out " +
                      q("plain.jsonl"));
  step("predict --condition-start", "predict --train " + q("splits/train.jsonl") + " --test " +
                                        q("splits/test.jsonl") + " --condition-start --out " + q("cond.jsonl"));
  step("score", "score --gold " + q("splits/test.jsonl") + " --pred " + q("plain.jsonl") +
                    " --minus-first --out " + q("plain.score.json"));
  step("score conditioned", "score --gold " + q("splits/test.jsonl") + " --pred " + q("cond.jsonl") +
                                " --minus-first --out " + q("cond.score.json"));
  step("analyze-errors", "analyze-errors --gold " + q("splits/test.jsonl") + " --pred " + q("cond.jsonl") +
                             " --out " + q("errors.json"));
  if (!c.ok()) return;

  auto plain = Json::parse(t::slurp(dir / "plain.score.json"));
  auto cond = Json::parse(t::slurp(dir / "cond.score.json"));
  c.expect(plain["invariant_violations"].empty() && cond["invariant_violations"].empty(),
           "score report lists invariant violations");
  std::ostringstream n;
  n << std::fixed << std::setprecision(1);
  for (const char* mode : {"strict", "permissive"}) {
    const double a = plain["modes"][mode]["full_sequence"]["accuracy"].get<double>();
    const double b = cond["modes"][mode]["full_sequence"]["accuracy"].get<double>();
    c.expect(b >= a, std::string(mode) + " conditioned full-sequence " + std::to_string(b) + " < unconditioned " +
                         std::to_string(a));
    n << mode << " full-sequence " << 100 * a << "% -> " << 100 * b << "% ";
  }
  auto errors = Json::parse(t::slurp(dir / "errors.json"));
  c.expect(errors.contains("labels"), "error report has labels");
  c.note(n.str());
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<void(Check&, double&)> run;  // second argument: measured seconds override
  };
  auto plain = [](void (*fn)(Check&)) { return [fn](Check& c, double&) { fn(c); }; };

  const std::vector<Criterion> criteria = {
      {"scoring fixtures: butter knife/knife strict, desk lamp/lamp permissive", 1, plain(scoring_fixtures)},
      {"round trip: 10,000 random plans parse(serialize) = identity", 10, plain(round_trip)},
      {"scorer equals brute-force oracle (exhaustive len<=4 + 10,000 random)", 60, plain(scorer_oracle)},
      {"repair fixtures and idempotence over 10,000 fuzzed strings", 10, plain(repair_fixtures)},
      {"alignment cost equals Levenshtein oracle (all pairs len<=5, 3 triples)", 30, plain(alignment_oracle)},
      {"error taxonomy fixtures: sink basin and knife/microwave", 1, plain(table3_fixtures)},
      {"split/downsample determinism, nesting, 4 groups per task at 1%", 5, split_downsample},
      {"baseline: duplicates 100% strict full sequence, paraphrases > 0%", 10, plain(baseline_sanity)},
      {"end to end: ingest, split, predict (+/- start), score, analyze-errors", 30, plain(end_to_end)},
      // Runs last so it sees every score run above.
      {"metric monotonicity on every score run", 10, plain(monotonicity)},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    double measured = -1;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(check, measured);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double timed = measured >= 0 ? measured : wall;
    const bool in_time = timed <= cr.budget_seconds;
    const bool pass = check.ok() && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << cr.name << " (" << std::fixed << std::setprecision(2) << timed
              << "s of " << std::setprecision(0) << cr.budget_seconds << "s)";
    if (!check.notes().empty()) std::cout << " - " << check.notes();
    if (!check.ok()) std::cout << " - " << check.summary();
    if (!in_time) std::cout << " - over time budget";
    std::cout << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed" : "acceptance: all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
