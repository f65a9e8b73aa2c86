// plankit: command-line driver for plan-corpus preparation, retrieval
// prediction, generation repair, scoring and error analysis.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plankit/plankit.hpp"

namespace fs = std::filesystem;
using namespace plankit;

namespace {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed for " + path);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

Json input_hashes(const std::map<std::string, std::string>& inputs) {
  Json j = Json::object();
  for (const auto& [role, path] : inputs) {
    Json e;
    e["path"] = path;
    e["sha256"] = sha256_file(path);
    j[role] = std::move(e);
  }
  return j;
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string percent(const Cell& c) {
  if (!c.reported()) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * c.value() << "%";
  return s.str();
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ----------------------------------------------------------------------------
// Options shared by all subcommands
// ----------------------------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

void add_seed(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->envname("PLANKIT_SEED")->capture_default_str();
}

void add_workers(CLI::App* cmd, Common& c) {
  cmd->add_option("--workers", c.workers, "Worker threads (0 = all cores)")->envname("PLANKIT_WORKERS")->capture_default_str();
}

// Resolved option values of a subcommand, for embedding in reports.
Json resolved_config(const CLI::App* cmd) {
  Json j = Json::object();
  j["command"] = cmd->get_name();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
    } else {
      auto results = opt->results();
      if (results.empty() && !opt->get_default_str().empty()) results.push_back(opt->get_default_str());
      if (results.size() == 1)
        j[name] = results.front();
      else
        j[name] = results;
    }
  }
  return j;
}

// ----------------------------------------------------------------------------
// ingest
// ----------------------------------------------------------------------------

struct IngestArgs {
  std::string source, mapping, out, lint;
};

int run_ingest(const CLI::App* cmd, const IngestArgs& a, const Common& c) {
  ImportSchema schema = a.mapping.empty() ? ImportSchema{} : ImportSchema::load(a.mapping);
  auto res = import_external(a.source, schema, c.workers);
  ensure_parent(a.out);
  write_records(a.out, res.corpus.records);

  Json report;
  report["config"] = resolved_config(cmd);
  if (!a.mapping.empty()) report["inputs"] = input_hashes({{"mapping", a.mapping}});
  report["files"] = res.files;
  report["records"] = res.corpus.size();
  report["vocabulary"] = {{"object", res.corpus.vocab.object.size()},
                          {"receptacle", res.corpus.vocab.receptacle.size()},
                          {"location", res.corpus.vocab.location.size()}};
  Json findings = Json::array();
  for (const auto& f : res.lint)
    findings.push_back({{"id", f.record_id}, {"code", std::string(lint_code_name(f.finding.code))}, {"detail", f.finding.detail}});
  report["lint"] = std::move(findings);
  const std::string lint_path = a.lint.empty() ? a.out + ".lint.json" : a.lint;
  write_json(lint_path, report);
  std::cout << "ingested " << res.corpus.size() << " records from " << res.files << " files (" << res.lint.size()
            << " lint findings) -> " << a.out << "\n";
  return 0;
}

// ----------------------------------------------------------------------------
// split / downsample
// ----------------------------------------------------------------------------

struct SplitArgs {
  std::string in, out_dir, unit = "plan";
  std::vector<double> sizes = {7793, 5661, 7571};
};

int run_split(const CLI::App* cmd, const SplitArgs& a, const Common& c) {
  if (a.sizes.size() != 3) throw Error("--sizes needs exactly three values");
  Corpus corpus(read_records(a.in));
  SplitSpec spec;
  std::copy(a.sizes.begin(), a.sizes.end(), spec.targets.begin());
  spec.seed = c.seed;
  spec.unit = parse_split_unit(a.unit);
  auto parts = split(corpus, spec);

  fs::create_directories(a.out_dir);
  Json report;
  report["config"] = resolved_config(cmd);
  report["inputs"] = input_hashes({{"corpus", a.in}});
  const char* names[] = {"train", "dev", "test"};
  Json counts = Json::object();
  auto ptrs = parts.parts();
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string path = (fs::path(a.out_dir) / (std::string(names[k]) + ".jsonl")).string();
    write_records(path, *ptrs[k]);
    std::set<std::string> groups;
    for (const auto& r : *ptrs[k]) groups.insert(r.plan_id);
    counts[names[k]] = {{"records", ptrs[k]->size()}, {"plan_groups", groups.size()}};
    std::cout << names[k] << ": " << ptrs[k]->size() << " records, " << groups.size() << " plan groups -> " << path << "\n";
  }
  report["splits"] = std::move(counts);
  write_json((fs::path(a.out_dir) / "split_report.json").string(), report);
  return 0;
}

struct DownsampleArgs {
  std::string in, out, report;
  double fraction = 1.0;
  bool stratify = false;
};

int run_downsample(const CLI::App* cmd, const DownsampleArgs& a, const Common& c) {
  Corpus corpus(read_records(a.in));
  auto sample = downsample(corpus, {a.fraction, c.seed, a.stratify});
  ensure_parent(a.out);
  write_records(a.out, sample.records);

  std::map<std::string, std::set<std::string>> per_task;
  for (const auto& r : sample.records) per_task[r.task_type].insert(r.plan_id);
  Json report;
  report["config"] = resolved_config(cmd);
  report["inputs"] = input_hashes({{"corpus", a.in}});
  report["records"] = sample.size();
  Json groups = Json::object();
  for (const auto& [task, ids] : per_task) groups[task] = ids.size();
  report["plan_groups_per_task"] = std::move(groups);
  write_json(a.report.empty() ? a.out + ".report.json" : a.report, report);
  std::cout << "kept " << sample.size() << " of " << corpus.size() << " records -> " << a.out << "\n";
  return 0;
}

// ----------------------------------------------------------------------------
// predict
// ----------------------------------------------------------------------------

struct PredictArgs {
  std::string train, test, out;
  bool condition_start = false, substitute_args = false;
};

int run_predict(const CLI::App* cmd, const PredictArgs& a, const Common& c) {
  Corpus train(read_records(a.train));
  auto tests = read_records(a.test);
  BaselinePlanner planner(train, {a.condition_start, a.substitute_args});
  auto preds = planner.predict_all(tests, c.workers);
  ensure_parent(a.out);
  write_predictions(a.out, preds);

  std::map<std::string, std::size_t> flag_counts;
  for (const auto& p : preds)
    for (const auto& f : p.flags) ++flag_counts[f];
  Json report;
  report["config"] = resolved_config(cmd);
  report["inputs"] = input_hashes({{"train", a.train}, {"test", a.test}});
  report["predictions"] = preds.size();
  report["flags"] = flag_counts;
  write_json(a.out + ".report.json", report);
  std::cout << "predicted " << preds.size() << " plans -> " << a.out << "\n";
  return 0;
}

// ----------------------------------------------------------------------------
// repair-parse
// ----------------------------------------------------------------------------

struct RepairArgs {
  std::string in, out, failures;
};

int run_repair_parse(const CLI::App* cmd, const RepairArgs& a, const Common& c) {
  auto gens = read_generations(a.in);
  struct Outcome {
    std::optional<PredictionRecord> pred;
    std::string reason;
    std::optional<std::size_t> segment;
  };
  std::vector<Outcome> outcomes(gens.size());
  parallel_for(gens.size(), c.workers, [&](std::size_t i) {
    const auto& g = gens[i];
    auto fixed = repair_detailed(g.text);
    try {
      auto parsed = parse_generated_detailed(fixed.text);
      PredictionRecord p;
      p.id = g.id;
      p.plan = std::move(parsed.plan);
      if (fixed.changed()) {
        p.flags.emplace_back("repaired");
        for (RepairRule r : fixed.applied) p.flags.push_back("repair:" + std::string(repair_rule_name(r)));
      }
      if (parsed.truncated) p.flags.emplace_back("truncated");
      if (parsed.dropped_partial) p.flags.emplace_back("dropped-partial");
      outcomes[i].pred = std::move(p);
    } catch (const ParseError& e) {
      outcomes[i].reason = e.what();
      outcomes[i].segment = e.segment();
    }
  });

  std::vector<PredictionRecord> preds;
  Json failures = Json::array();
  for (std::size_t i = 0; i < gens.size(); ++i) {
    if (outcomes[i].pred) {
      preds.push_back(std::move(*outcomes[i].pred));
    } else {
      failures.push_back({{"id", gens[i].id},
                          {"segment", *outcomes[i].segment},
                          {"reason", outcomes[i].reason},
                          {"text", gens[i].text}});
    }
  }
  ensure_parent(a.out);
  write_predictions(a.out, preds);
  Json report;
  report["config"] = resolved_config(cmd);
  report["inputs"] = input_hashes({{"generations", a.in}});
  report["generations"] = gens.size();
  report["parsed"] = preds.size();
  report["failed"] = failures.size();
  report["failures"] = std::move(failures);
  write_json(a.failures.empty() ? a.out + ".failures.json" : a.failures, report);
  std::cout << "parsed " << preds.size() << " of " << gens.size() << " generations -> " << a.out << "\n";
  return 0;
}

// ----------------------------------------------------------------------------
// score
// ----------------------------------------------------------------------------

struct ScoreArgs {
  std::string gold, pred, out, mode = "both", averaging = "micro";
  bool minus_first = false;
};

std::vector<MatchMode> selected_modes(const std::string& mode) {
  if (mode == "both") return {MatchMode::strict, MatchMode::permissive};
  return {parse_mode(mode)};
}

void print_score_table(std::ostream& os, const ScoreReport& r, bool minus_first) {
  os << std::left << std::setw(12) << "" << std::setw(27) << "Triple Components" << std::setw(10) << "Full"
     << "Entire Plans\n";
  os << std::setw(12) << "Scoring" << std::setw(9) << "Command" << std::setw(9) << "Arg1" << std::setw(9) << "Arg2"
     << std::setw(10) << "Triples" << std::setw(15) << "Full Sequence";
  if (minus_first) os << "Full Minus First";
  os << "\n";
  for (MatchMode m : r.modes) {
    const auto& ms = r.by_mode.at(m);
    os << std::setw(12) << mode_name(m) << std::setw(9) << percent(ms[Metric::command]) << std::setw(9)
       << percent(ms[Metric::arg1]) << std::setw(9) << percent(ms[Metric::arg2]) << std::setw(10)
       << percent(ms[Metric::triple]) << std::setw(15) << percent(ms[Metric::full_sequence]);
    if (minus_first) os << percent(ms[Metric::full_minus_first]);
    os << "\n";
  }
  os << "\nTriple accuracy by command\n" << std::setw(12) << "Scoring";
  for (Action a : kAllActions) os << std::setw(8) << action_name(a);
  os << "\n";
  for (MatchMode m : r.modes) {
    const auto& ms = r.by_mode.at(m);
    os << std::setw(12) << mode_name(m);
    for (Action a : kAllActions) {
      auto it = ms.per_command.find(a);
      os << std::setw(8) << (it == ms.per_command.end() ? "-" : percent(it->second));
    }
    os << "\n";
  }
  os << "records: " << r.records.size() << ", missing predictions: " << r.missing_predictions << "\n";
}

int run_score(const CLI::App* cmd, const ScoreArgs& a, const Common& c) {
  auto gold = read_records(a.gold);
  auto preds = read_predictions(a.pred);
  auto report = aggregate(gold, to_predictions(preds), selected_modes(a.mode), parse_averaging(a.averaging), c.workers);
  Json j;
  j["config"] = resolved_config(cmd);
  j["inputs"] = input_hashes({{"gold", a.gold}, {"pred", a.pred}});
  j.update(score_report_to_json(report));
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_json(a.out, j);
  }
  print_score_table(std::cout, report, a.minus_first);
  auto problems = check_monotonicity(report);
  for (const auto& p : problems) std::cerr << "{\"error\": \"metric invariant violated: " << p << "\"}\n";
  return problems.empty() ? 0 : 3;
}

// ----------------------------------------------------------------------------
// analyze-errors
// ----------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string gold, pred, overlay, out;
};

int run_analyze(const CLI::App* cmd, const AnalyzeArgs& a, const Common& c) {
  auto gold = read_records(a.gold);
  auto preds = read_predictions(a.pred);
  std::map<std::string, const Plan*> by_id;
  for (const auto& p : preds)
    if (!by_id.emplace(p.id, &p.plan).second) throw Error("duplicate prediction id '" + p.id + "'");
  std::vector<ErrorPair> pairs;
  for (const auto& r : gold) {
    auto it = by_id.find(r.id);
    pairs.push_back({r.id, r.gold, it == by_id.end() ? Plan{} : *it->second});
  }
  Overlay overlay = a.overlay.empty() ? Overlay{} : read_overlay(a.overlay);
  auto report = error_report(pairs, overlay, c.workers);

  std::map<std::string, std::string> inputs = {{"gold", a.gold}, {"pred", a.pred}};
  if (!a.overlay.empty()) inputs["overlay"] = a.overlay;
  Json j;
  j["config"] = resolved_config(cmd);
  j["inputs"] = input_hashes(inputs);
  j.update(error_report_to_json(report));
  ensure_parent(a.out);
  write_json(a.out, j);

  std::cout << "errorful pairs: " << report.errorful << " of " << report.pairs << "\n";
  for (ErrorLabel l : kAllErrorLabels) {
    auto it = report.counts.find(l);
    if (it == report.counts.end()) continue;
    std::cout << std::left << std::setw(32) << error_label_name(l) << std::right << std::setw(6) << it->second
              << std::setw(8) << std::fixed << std::setprecision(1) << 100.0 * report.proportion(l) << "%\n";
  }
  return 0;
}

// ----------------------------------------------------------------------------
// curve
// ----------------------------------------------------------------------------

struct CurveArgs {
  std::string train, dev, out;
  std::vector<double> fractions = {1.0, 0.25, 0.10, 0.01};
  bool stratify = false, condition_start = false, substitute_args = false;
};

int run_curve(const CLI::App* cmd, const CurveArgs& a, const Common& c) {
  Corpus train(read_records(a.train));
  auto dev = read_records(a.dev);
  std::ostringstream csv;
  csv << "fraction,train_records,train_plan_groups,full_minus_first_permissive,full_sequence_permissive,"
         "full_minus_first_strict,full_sequence_strict\n";
  Json rows = Json::array();
  for (double f : a.fractions) {
    Corpus sample = downsample(train, {f, c.seed, a.stratify});
    BaselinePlanner planner(sample, {a.condition_start, a.substitute_args});
    auto report = aggregate(dev, to_predictions(planner.predict_all(dev, c.workers)),
                            {MatchMode::strict, MatchMode::permissive}, Averaging::micro, c.workers);
    std::set<std::string> groups;
    for (const auto& r : sample.records) groups.insert(r.plan_id);
    const auto& p = report.by_mode.at(MatchMode::permissive);
    const auto& s = report.by_mode.at(MatchMode::strict);
    // Json::dump prints the shortest text that reads back to the same double.
    auto num = [](double x) { return Json(x).dump(); };
    csv << num(f) << ',' << sample.size() << ',' << groups.size() << ',' << num(p[Metric::full_minus_first].value())
        << ',' << num(p[Metric::full_sequence].value()) << ',' << num(s[Metric::full_minus_first].value()) << ','
        << num(s[Metric::full_sequence].value()) << "\n";
    rows.push_back({{"fraction", f},
                    {"train_records", sample.size()},
                    {"full_minus_first_permissive", p[Metric::full_minus_first].value()}});
    std::cout << "fraction " << f << ": " << sample.size() << " records, full-minus-first (permissive) "
              << percent(p[Metric::full_minus_first]) << "\n";
  }
  ensure_parent(a.out);
  write_text(a.out, csv.str());
  Json report;
  report["config"] = resolved_config(cmd);
  report["inputs"] = input_hashes({{"train", a.train}, {"dev", a.dev}});
  report["rows"] = std::move(rows);
  write_json(a.out + ".report.json", report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plankit: directive-to-plan corpus tools, retrieval baseline and plan scoring"};
  app.set_config("--config", "", "Read options from a key=value file");
  app.require_subcommand(1);
  Common common;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Import trajectory files into canonical JSONL");
  c_ingest->add_option("--source", ingest.source, "Directory of trajectory JSON files")->required();
  c_ingest->add_option("--mapping", ingest.mapping, "JSON mapping table (action names, field pointers)");
  c_ingest->add_option("--out", ingest.out, "Output JSONL")->required();
  c_ingest->add_option("--lint", ingest.lint, "Lint report path (default <out>.lint.json)");
  add_workers(c_ingest, common);

  SplitArgs split_args;
  auto* c_split = app.add_subcommand("split", "Split a corpus into train/dev/test by plan group");
  c_split->add_option("--in", split_args.in, "Canonical JSONL corpus")->required();
  c_split->add_option("--out-dir", split_args.out_dir, "Directory for train/dev/test.jsonl")->required();
  c_split->add_option("--sizes", split_args.sizes, "Target sizes, used as proportions")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  c_split->add_option("--unit", split_args.unit, "Grouping unit: plan, record or scene")
      ->check(CLI::IsMember({"plan", "record", "scene"}))
      ->capture_default_str();
  add_seed(c_split, common);

  DownsampleArgs ds;
  auto* c_ds = app.add_subcommand("downsample", "Keep a fraction of plan groups");
  c_ds->add_option("--in", ds.in, "Canonical JSONL corpus")->required();
  c_ds->add_option("--fraction", ds.fraction, "Fraction in (0, 1]")->required()->check(CLI::Range(0.0, 1.0));
  c_ds->add_flag("--stratify", ds.stratify, "Sample per task type");
  c_ds->add_option("--out", ds.out, "Output JSONL")->required();
  c_ds->add_option("--report", ds.report, "Report path (default <out>.report.json)");
  add_seed(c_ds, common);

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Retrieval-baseline predictions");
  c_pred->add_option("--train", pr.train, "Training JSONL")->required();
  c_pred->add_option("--test", pr.test, "Records to predict")->required();
  c_pred->add_option("--out", pr.out, "Predictions JSONL")->required();
  c_pred->add_flag("--condition-start", pr.condition_start, "Use each record's start location");
  c_pred->add_flag("--substitute-args", pr.substitute_args, "Swap arguments mentioned by the test directive");
  add_workers(c_pred, common);

  RepairArgs rp;
  auto* c_rp = app.add_subcommand("repair-parse", "Repair and parse model generations");
  c_rp->add_option("--in", rp.in, "Generations JSONL {id, text}")->required();
  c_rp->add_option("--out", rp.out, "Predictions JSONL")->required();
  c_rp->add_option("--failures", rp.failures, "Failure report (default <out>.failures.json)");
  add_workers(c_rp, common);

  ScoreArgs sc;
  auto* c_score = app.add_subcommand("score", "Score predictions against gold plans");
  c_score->add_option("--gold", sc.gold, "Gold JSONL")->required();
  c_score->add_option("--pred", sc.pred, "Predictions JSONL")->required();
  c_score->add_option("--mode", sc.mode, "strict, permissive or both")
      ->check(CLI::IsMember({"strict", "permissive", "both"}))
      ->capture_default_str();
  c_score->add_flag("--minus-first", sc.minus_first, "Show the full-minus-first column");
  c_score->add_option("--averaging", sc.averaging, "Component averaging: micro or macro")
      ->check(CLI::IsMember({"micro", "macro"}))
      ->capture_default_str();
  c_score->add_option("--out", sc.out, "JSON report");
  add_workers(c_score, common);

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze-errors", "Classify prediction errors");
  c_an->add_option("--gold", an.gold, "Gold JSONL")->required();
  c_an->add_option("--pred", an.pred, "Predictions JSONL")->required();
  c_an->add_option("--overlay", an.overlay, "Manual labels JSONL {id, labels}");
  c_an->add_option("--out", an.out, "JSON report")->required();
  add_workers(c_an, common);

  CurveArgs cv;
  auto* c_curve = app.add_subcommand("curve", "Accuracy as a function of training fraction");
  c_curve->add_option("--train", cv.train, "Training JSONL")->required();
  c_curve->add_option("--dev", cv.dev, "Evaluation JSONL")->required();
  c_curve->add_option("--fractions", cv.fractions, "Training fractions")->delimiter(',')->capture_default_str();
  c_curve->add_flag("--stratify", cv.stratify, "Stratify downsampling by task type");
  c_curve->add_flag("--condition-start", cv.condition_start, "Use each record's start location");
  c_curve->add_flag("--substitute-args", cv.substitute_args, "Swap arguments mentioned by the test directive");
  c_curve->add_option("--out", cv.out, "CSV output")->required();
  add_seed(c_curve, common);
  add_workers(c_curve, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ingest->parsed()) return run_ingest(c_ingest, ingest, common);
    if (c_split->parsed()) return run_split(c_split, split_args, common);
    if (c_ds->parsed()) return run_downsample(c_ds, ds, common);
    if (c_pred->parsed()) return run_predict(c_pred, pr, common);
    if (c_rp->parsed()) return run_repair_parse(c_rp, rp, common);
    if (c_score->parsed()) return run_score(c_score, sc, common);
    if (c_an->parsed()) return run_analyze(c_an, an, common);
    if (c_curve->parsed()) return run_curve(c_curve, cv, common);
  } catch (const std::exception& e) {
    std::cerr << Json({{"error", e.what()}}).dump() << "\n";
    return 1;
  }
  return 1;
}
