#pragma once

// Corpus ingestion from external trajectory files, deterministic re-splitting
// into train/dev/test, nested (optionally stratified) downsampling and
// start-location extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "plankit/json_io.hpp"
#include "plankit/parallel.hpp"
#include "plankit/plan.hpp"

namespace plankit {

inline OptArgument extract_start_location(const Record& r) {
  if (r.gold.empty() || r.gold.front().action != Action::goto_ || !r.gold.front().arg1) return std::nullopt;
  Argument a = *r.gold.front().arg1;
  a.cls = ArgClass::location;
  return a;
}

// ============================================================================
// Seeded permutation
// ============================================================================

namespace detail {

// Fisher-Yates over mt19937_64 with rejection sampling.  Both pieces are fully
// specified, so a seed yields the same permutation under every standard library
// (std::shuffle and the std distributions do not guarantee that).
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t n = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    std::swap(v[i - 1], v[static_cast<std::size_t>(x % n)]);
  }
}

}  // namespace detail

// ============================================================================
// Import
// ============================================================================

// Where fields live in an external trajectory file (JSON pointers) and how
// its action names map onto the eight actions.  A null mapping drops the step.
struct ImportSchema {
  std::map<std::string, std::optional<Action>> actions = {
      {"GotoLocation", Action::goto_}, {"PickupObject", Action::pickup}, {"PutObject", Action::put},
      {"CoolObject", Action::cool},    {"HeatObject", Action::heat},     {"CleanObject", Action::clean},
      {"SliceObject", Action::slice},  {"ToggleObject", Action::toggle}, {"NoOp", std::nullopt},
  };
  std::string file_name = "traj_data.json";  // empty: every *.json file
  std::string plan = "/plan/high_pddl";
  std::string action = "/discrete_action/action";
  std::string args = "/discrete_action/args";
  std::string directives = "/turk_annotations/anns";
  std::string directive_text = "/task_desc";
  std::string task_type = "/task_type";
  std::string plan_id = "/task_id";
  std::string scene = "/scene/scene_num";

  static ImportSchema from_json(const Json& j) {
    ImportSchema s;
    if (j.contains("actions")) {
      s.actions.clear();
      for (const auto& [name, target] : j.at("actions").items())
        s.actions[name] = target.is_null() ? std::nullopt : std::optional<Action>(parse_action(target.get<std::string>()));
    }
    auto field = [&j](const char* key, std::string& into) {
      if (j.contains(key)) into = j.at(key).get<std::string>();
    };
    field("file_name", s.file_name);
    field("plan", s.plan);
    field("action", s.action);
    field("args", s.args);
    field("directives", s.directives);
    field("directive_text", s.directive_text);
    field("task_type", s.task_type);
    field("plan_id", s.plan_id);
    field("scene", s.scene);
    return s;
  }

  static ImportSchema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mapping file " + path);
    try {
      return from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw Error("mapping file " + path + ": " + e.what());
    }
  }
};

struct ImportResult {
  Corpus corpus;
  std::vector<CorpusFinding> lint;
  std::size_t files = 0;
};

namespace detail {

inline const Json* lookup(const Json& doc, const std::string& pointer) {
  if (pointer.empty()) return &doc;
  try {
    Json::json_pointer ptr(pointer);
    return doc.contains(ptr) ? &doc.at(ptr) : nullptr;
  } catch (const Json::exception&) {
    return nullptr;
  }
}

inline std::string scalar_text(const Json& j) { return j.is_string() ? j.get<std::string>() : j.dump(); }

inline std::vector<Record> import_file(const std::filesystem::path& file, const std::filesystem::path& root,
                                       const ImportSchema& schema) {
  const std::string where = file.string();
  Json doc;
  {
    std::ifstream in(file);
    if (!in) throw Error(where + ": cannot open");
    try {
      doc = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(where + ": malformed JSON: " + e.what());
    }
  }

  std::string plan_id;
  if (const Json* id = lookup(doc, schema.plan_id)) plan_id = scalar_text(*id);
  if (plan_id.empty()) plan_id = std::filesystem::relative(file.parent_path(), root).generic_string();

  const Json* steps = lookup(doc, schema.plan);
  if (!steps || !steps->is_array()) throw Error(where + ": no plan array at " + schema.plan);
  Plan gold;
  for (std::size_t k = 0; k < steps->size(); ++k) {
    const Json& step = (*steps)[k];
    const Json* name = lookup(step, schema.action);
    if (!name || !name->is_string()) throw Error(where + ": plan step " + std::to_string(k) + " has no action name");
    auto mapped = schema.actions.find(name->get<std::string>());
    if (mapped == schema.actions.end())
      throw Error(where + ": plan '" + plan_id + "' uses unmappable action '" + name->get<std::string>() + "'");
    if (!mapped->second) continue;
    CommandTriple t;
    t.action = *mapped->second;
    const Json* args = lookup(step, schema.args);
    if (args && !args->is_array()) throw Error(where + ": plan step " + std::to_string(k) + " args is not an array");
    if (args && args->size() > 2) throw Error(where + ": plan step " + std::to_string(k) + " has more than two arguments");
    try {
      if (args && args->size() > 0) t.arg1 = make_argument(t.action, 1, scalar_text((*args)[0]));
      if (args && args->size() > 1) t.arg2 = make_argument(t.action, 2, scalar_text((*args)[1]));
    } catch (const Error& e) {
      throw Error(where + ": plan step " + std::to_string(k) + ": " + e.what());
    }
    gold.push_back(std::move(t));
  }
  if (gold.empty()) throw Error(where + ": plan '" + plan_id + "' has no mappable steps");

  const Json* anns = lookup(doc, schema.directives);
  if (!anns || !anns->is_array()) throw Error(where + ": no directive array at " + schema.directives);

  std::string task_type;
  if (const Json* t = lookup(doc, schema.task_type)) task_type = scalar_text(*t);
  std::optional<std::string> scene;
  if (const Json* s = lookup(doc, schema.scene); s && !s->is_null()) scene = scalar_text(*s);

  std::vector<Record> out;
  for (std::size_t k = 0; k < anns->size(); ++k) {
    const Json* text = lookup((*anns)[k], schema.directive_text);
    if (!text || !text->is_string()) throw Error(where + ": directive " + std::to_string(k) + " has no text");
    Record r;
    r.id = plan_id + "_" + std::to_string(k);
    r.plan_id = plan_id;
    r.task_type = task_type;
    r.directive = text->get<std::string>();
    r.gold = gold;
    r.start_location = extract_start_location(r);
    r.scene = scene;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

// One Record per (plan, directive) pair; files are visited in sorted path order.
inline ImportResult import_external(const std::string& source_dir, const ImportSchema& schema = {},
                                    unsigned workers = 1) {
  namespace fs = std::filesystem;
  const fs::path root(source_dir);
  if (!fs::is_directory(root)) throw Error("source directory does not exist: " + source_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (schema.file_name.empty() ? p.extension() == ".json" : p.filename() == schema.file_name) files.push_back(p);
  }
  if (files.empty()) throw Error("no trajectory files found under " + source_dir);
  std::sort(files.begin(), files.end());

  std::vector<std::vector<Record>> per_file(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) { per_file[i] = detail::import_file(files[i], root, schema); });

  std::vector<Record> records;
  for (auto& v : per_file) std::move(v.begin(), v.end(), std::back_inserter(records));
  ImportResult res;
  res.lint = lint_corpus(records);
  res.corpus = Corpus(std::move(records));
  res.files = files.size();
  return res;
}

// ============================================================================
// Split
// ============================================================================

enum class SplitUnit { plan_group, record, scene };

inline SplitUnit parse_split_unit(std::string_view s) {
  if (s == "plan") return SplitUnit::plan_group;
  if (s == "record") return SplitUnit::record;
  if (s == "scene") return SplitUnit::scene;
  throw Error("unknown split unit '" + std::string(s) + "'");
}

struct SplitSpec {
  // Target record counts; treated as proportions of the actual corpus size.
  std::array<double, 3> targets = {7793, 5661, 7571};
  std::uint64_t seed = 0;
  SplitUnit unit = SplitUnit::plan_group;
};

struct SplitResult {
  std::vector<Record> train, dev, test;

  std::array<const std::vector<Record>*, 3> parts() const { return {&train, &dev, &test}; }
};

namespace detail {

inline std::string group_key(const Record& r, SplitUnit unit) {
  switch (unit) {
    case SplitUnit::record: return r.id;
    case SplitUnit::scene: return r.scene ? "scene:" + *r.scene : "plan:" + r.plan_id;
    case SplitUnit::plan_group: break;
  }
  return r.plan_id;
}

// Group keys in sorted order with their member indices (corpus order).
inline std::map<std::string, std::vector<std::size_t>> group_records(const std::vector<Record>& records,
                                                                      SplitUnit unit) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[group_key(records[i], unit)].push_back(i);
  return groups;
}

}  // namespace detail

// Shuffles whole groups with the seed and fills train, dev and test in turn
// until each reaches its share of the records.  Records keep corpus order
// within each split.
inline SplitResult split(const Corpus& corpus, const SplitSpec& spec) {
  for (double t : spec.targets)
    if (!(t > 0)) throw Error("split targets must be positive");
  auto groups = detail::group_records(corpus.records, spec.unit);
  if (groups.size() < 3) throw Error("need at least 3 groups to split, got " + std::to_string(groups.size()));

  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [key, members] : groups) order.push_back(&members);
  std::mt19937_64 rng(spec.seed);
  detail::seeded_shuffle(order, rng);

  const double total = static_cast<double>(corpus.size());
  const double sum = spec.targets[0] + spec.targets[1] + spec.targets[2];
  const std::array<double, 2> boundary = {total * spec.targets[0] / sum,
                                          total * (spec.targets[0] + spec.targets[1]) / sum};

  std::vector<int> assignment(corpus.size(), 0);
  std::array<std::size_t, 3> groups_in{};
  std::size_t split_at = 0, assigned = 0;
  for (std::size_t g = 0; g < order.size(); ++g) {
    const std::size_t remaining = order.size() - g;
    while (split_at < 2 && groups_in[split_at] > 0 &&
           (static_cast<double>(assigned) >= boundary[split_at] || remaining <= 2 - split_at))
      ++split_at;
    for (std::size_t idx : *order[g]) assignment[idx] = static_cast<int>(split_at);
    ++groups_in[split_at];
    assigned += order[g]->size();
  }

  SplitResult out;
  std::array<std::vector<Record>*, 3> dest = {&out.train, &out.dev, &out.test};
  for (std::size_t i = 0; i < corpus.size(); ++i) dest[static_cast<std::size_t>(assignment[i])]->push_back(corpus.records[i]);
  return out;
}

// ============================================================================
// Downsample
// ============================================================================

struct DownsampleSpec {
  double fraction = 1.0;
  std::uint64_t seed = 0;
  bool stratify_by_task = false;
};

// Keeps ceil(fraction * groups) plan groups per task type (or overall), at
// least one per stratum.  Each stratum is ranked by a single seeded permutation,
// so smaller fractions select subsets of larger ones.
inline Corpus downsample(const Corpus& train, const DownsampleSpec& spec) {
  if (!(spec.fraction > 0 && spec.fraction <= 1)) throw Error("fraction must be in (0, 1]");
  if (spec.stratify_by_task)
    for (const auto& r : train.records)
      if (r.task_type.empty()) throw Error("stratified downsampling needs a task_type on record '" + r.id + "'");

  std::map<std::string, std::set<std::string>> strata;
  for (const auto& r : train.records) strata[spec.stratify_by_task ? r.task_type : std::string()].insert(r.plan_id);

  std::mt19937_64 rng(spec.seed);
  std::set<std::string> keep;
  for (const auto& [stratum, ids] : strata) {
    std::vector<std::string> ranked(ids.begin(), ids.end());
    detail::seeded_shuffle(ranked, rng);
    const double want = spec.fraction * static_cast<double>(ranked.size());
    // Guard against 0.1 * 30 = 3.0000000000000004 rounding up to 4.
    auto take = static_cast<std::size_t>(std::ceil(want - 1e-9));
    take = std::clamp<std::size_t>(take, 1, ranked.size());
    keep.insert(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take));
  }

  std::vector<Record> out;
  for (const auto& r : train.records)
    if (keep.count(r.plan_id)) out.push_back(r);
  return Corpus(std::move(out));
}

}  // namespace plankit
