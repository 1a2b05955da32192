#pragma once

#include <string>

#include <json.hpp>

namespace heatlab {

// Outcome of one empirical check. Objects serialize with sorted keys, so a
// report dump is a deterministic function of its contents.
struct EstimateReport {
  std::string estimate;
  std::string env_hash;
  nlohmann::json grid = nlohmann::json::object();
  nlohmann::json constants = nlohmann::json::object();
  nlohmann::json witness = nlohmann::json::object();
  nlohmann::json verdicts = nlohmann::json::object();  // name -> bool
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json skipped = nlohmann::json::object();   // reason -> count

  bool passed() const {
    for (const auto& [k, v] : verdicts.items())
      if (!v.get<bool>()) return false;
    return true;
  }
  void skip(const std::string& reason, long count = 1) {
    skipped[reason] = skipped.value(reason, 0L) + count;
  }

  nlohmann::json to_json() const {
    return {{"estimate", estimate}, {"env_hash", env_hash}, {"grid", grid},         {"constants", constants},
            {"witness", witness},   {"verdicts", verdicts}, {"rows", rows},         {"skipped", skipped},
            {"passed", passed()}};
  }
  static EstimateReport from_json(const nlohmann::json& j) {
    EstimateReport r;
    r.estimate = j.value("estimate", std::string());
    r.env_hash = j.value("env_hash", std::string());
    r.grid = j.value("grid", nlohmann::json::object());
    r.constants = j.value("constants", nlohmann::json::object());
    r.witness = j.value("witness", nlohmann::json::object());
    r.verdicts = j.value("verdicts", nlohmann::json::object());
    r.rows = j.value("rows", nlohmann::json::array());
    r.skipped = j.value("skipped", nlohmann::json::object());
    return r;
  }
};

}  // namespace heatlab
