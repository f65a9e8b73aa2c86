#pragma once

// JSON / JSONL file formats:
//
//   records      {"id", "plan_id", "task_type", "directive", "plan": [{"action", "arg1", "arg2"}, ...],
//                 "start_location"}            (+ "scene" when the source carried one)
//   predictions  {"id", "plan", "neighbor_id", "similarity", "flags"}   (only "id" and "plan" are required)
//   generations  {"id", "text"}
//   overlay      {"id", "labels": [...]}
//
// Absent arguments are JSON null.  Objects are written with a fixed key order.

#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plankit/error_analysis.hpp"
#include "plankit/plan.hpp"
#include "plankit/scoring.hpp"

namespace plankit {

using Json = nlohmann::ordered_json;

// ============================================================================
// Plans and records
// ============================================================================

inline Json argument_to_json(const OptArgument& a) { return a ? Json(a->text()) : Json(nullptr); }

inline Json plan_to_json(const Plan& p) {
  Json arr = Json::array();
  for (const auto& t : p) {
    Json j;
    j["action"] = std::string(action_name(t.action));
    j["arg1"] = argument_to_json(t.arg1);
    j["arg2"] = argument_to_json(t.arg2);
    arr.push_back(std::move(j));
  }
  return arr;
}

inline OptArgument argument_from_json(const Json& j, ArgClass cls) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_string()) throw Error("argument must be a string or null");
  return normalize_argument(j.get<std::string>(), cls);
}

inline Plan plan_from_json(const Json& arr) {
  if (!arr.is_array()) throw Error("plan must be an array");
  Plan p;
  for (const auto& j : arr) {
    if (!j.is_object() || !j.contains("action")) throw Error("plan entry must be an object with an action");
    CommandTriple t;
    t.action = parse_action(j.at("action").get<std::string>());
    t.arg1 = argument_from_json(j.value("arg1", Json(nullptr)), slot_class(t.action, 1));
    t.arg2 = argument_from_json(j.value("arg2", Json(nullptr)), slot_class(t.action, 2));
    p.push_back(std::move(t));
  }
  return p;
}

inline Json record_to_json(const Record& r) {
  Json j;
  j["id"] = r.id;
  j["plan_id"] = r.plan_id;
  j["task_type"] = r.task_type;
  j["directive"] = r.directive;
  j["plan"] = plan_to_json(r.gold);
  j["start_location"] = argument_to_json(r.start_location);
  if (r.scene) j["scene"] = *r.scene;
  return j;
}

inline Record record_from_json(const Json& j) {
  if (!j.is_object()) throw Error("record must be a JSON object");
  for (const char* key : {"id", "directive", "plan"})
    if (!j.contains(key)) throw Error(std::string("record is missing '") + key + "'");
  Record r;
  r.id = j.at("id").get<std::string>();
  r.plan_id = j.contains("plan_id") ? j.at("plan_id").get<std::string>() : r.id;
  r.task_type = j.value("task_type", std::string());
  r.directive = j.at("directive").get<std::string>();
  r.gold = plan_from_json(j.at("plan"));
  if (r.gold.empty()) throw Error("record '" + r.id + "' has an empty plan");
  r.start_location = argument_from_json(j.value("start_location", Json(nullptr)), ArgClass::location);
  if (j.contains("scene") && !j.at("scene").is_null())
    r.scene = j.at("scene").is_string() ? j.at("scene").get<std::string>() : j.at("scene").dump();
  return r;
}

// ============================================================================
// JSONL
// ============================================================================

// Calls fn(json, line_number) for every nonblank line.
template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    try {
      fn(j, line_no);
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::vector<Record> read_records(const std::string& path) {
  std::vector<Record> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(record_from_json(j)); });
  return out;
}

inline std::string records_to_jsonl(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

inline void write_records(const std::string& path, const std::vector<Record>& records) {
  write_text(path, records_to_jsonl(records));
}

// ============================================================================
// Predictions, generations, overlays
// ============================================================================

struct PredictionRecord {
  std::string id;
  Plan plan;
  std::optional<std::string> neighbor_id;
  std::optional<double> similarity;
  std::vector<std::string> flags;
};

inline Json prediction_to_json(const PredictionRecord& p) {
  Json j;
  j["id"] = p.id;
  j["plan"] = plan_to_json(p.plan);
  if (p.neighbor_id) j["neighbor_id"] = *p.neighbor_id;
  if (p.similarity) j["similarity"] = *p.similarity;
  j["flags"] = p.flags;
  return j;
}

inline std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::vector<PredictionRecord> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    if (!j.is_object() || !j.contains("id") || !j.contains("plan"))
      throw Error("prediction must have 'id' and 'plan'");
    PredictionRecord p;
    p.id = j.at("id").get<std::string>();
    p.plan = plan_from_json(j.at("plan"));
    if (j.contains("neighbor_id") && j.at("neighbor_id").is_string()) p.neighbor_id = j.at("neighbor_id").get<std::string>();
    if (j.contains("similarity") && j.at("similarity").is_number()) p.similarity = j.at("similarity").get<double>();
    if (j.contains("flags")) p.flags = j.at("flags").get<std::vector<std::string>>();
    out.push_back(std::move(p));
  });
  return out;
}

inline void write_predictions(const std::string& path, const std::vector<PredictionRecord>& preds) {
  std::string out;
  for (const auto& p : preds) {
    out += prediction_to_json(p).dump();
    out += '\n';
  }
  write_text(path, out);
}

inline std::vector<Prediction> to_predictions(const std::vector<PredictionRecord>& recs) {
  std::vector<Prediction> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back({r.id, r.plan});
  return out;
}

struct Generation {
  std::string id;
  std::string text;
};

inline std::vector<Generation> read_generations(const std::string& path) {
  std::vector<Generation> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    if (!j.is_object() || !j.contains("id") || !j.contains("text")) throw Error("generation must have 'id' and 'text'");
    out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
  });
  return out;
}

inline Overlay read_overlay(const std::string& path) {
  Overlay out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    if (!j.is_object() || !j.contains("id") || !j.contains("labels")) throw Error("overlay entry must have 'id' and 'labels'");
    auto& labels = out[j.at("id").get<std::string>()];
    for (const auto& l : j.at("labels")) labels.push_back(parse_error_label(l.get<std::string>()));
  });
  return out;
}

// ============================================================================
// Reports
// ============================================================================

inline Json cell_to_json(const Cell& c) {
  Json j;
  j["numerator"] = c.numerator;
  j["denominator"] = c.denominator;
  j["accuracy"] = c.reported() ? Json(c.value()) : Json(nullptr);
  return j;
}

inline Json score_report_to_json(const ScoreReport& r) {
  Json j;
  j["averaging"] = std::string(averaging_name(r.averaging));
  j["records"] = r.records.size();
  j["missing_predictions"] = r.missing_predictions;
  Json modes = Json::object();
  for (MatchMode m : r.modes) {
    const auto& ms = r.by_mode.at(m);
    Json mj;
    for (Metric metric : kAllMetrics) mj[std::string(metric_name(metric))] = cell_to_json(ms[metric]);
    Json per = Json::object();
    for (Action a : kAllActions) {
      auto it = ms.per_command.find(a);
      per[std::string(action_name(a))] = cell_to_json(it == ms.per_command.end() ? Cell{} : it->second);
    }
    mj["per_command"] = std::move(per);
    modes[std::string(mode_name(m))] = std::move(mj);
  }
  j["modes"] = std::move(modes);
  j["invariant_violations"] = check_monotonicity(r);
  Json per_record = Json::array();
  for (const auto& rec : r.records) {
    Json rj;
    rj["id"] = rec.id;
    rj["missing"] = rec.prediction_missing;
    for (MatchMode m : r.modes) {
      const auto& s = rec.scores.at(m);
      Json sj;
      sj["full_sequence"] = s.full_sequence;
      sj["full_minus_first"] = s.full_minus_first;
      sj["triple"] = s.triple;
      rj[std::string(mode_name(m))] = std::move(sj);
    }
    per_record.push_back(std::move(rj));
  }
  j["per_record"] = std::move(per_record);
  return j;
}

inline Json error_report_to_json(const ErrorReport& r) {
  Json j;
  j["pairs"] = r.pairs;
  j["errorful"] = r.errorful;
  j["overlay_ignored"] = r.overlay_ignored;
  Json labels = Json::object();
  for (const auto& [label, count] : r.counts) {
    Json lj;
    lj["count"] = count;
    lj["proportion"] = r.proportion(label);
    labels[std::string(error_label_name(label))] = std::move(lj);
  }
  j["labels"] = std::move(labels);
  Json per_pair = Json::array();
  for (const auto& d : r.details) {
    if (!d.errorful) continue;
    Json dj;
    dj["id"] = d.id;
    dj["edit_cost"] = d.edit_cost;
    std::vector<std::string> names;
    for (ErrorLabel l : d.labels()) names.emplace_back(error_label_name(l));
    dj["labels"] = names;
    per_pair.push_back(std::move(dj));
  }
  j["per_pair"] = std::move(per_pair);
  return j;
}

}  // namespace plankit
