#pragma once

// JSON and text renderings of update and evaluation reports.

#include <cstdio>
#include <string>

#include "json.hpp"
#include "walkforge/evaluation.hpp"
#include "walkforge/incremental.hpp"

namespace walkforge {

inline nlohmann::ordered_json to_json(const UpdateReport& r) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(r.strategy);
  j["from_version"] = r.from_version;
  j["to_version"] = r.to_version;
  j["new_nodes"] = r.new_nodes;
  j["affected_nodes"] = r.affected_nodes;
  j["affected_walks"] = r.affected_walks;
  j["walks_before"] = r.walks_before;
  j["walks_after"] = r.walks_after;
  j["candidate_draws"] = r.draws;
  j["wall_time_ms"] = r.wall_time_ms ? nlohmann::ordered_json(*r.wall_time_ms) : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["delta_mae"] = r.delta_mae ? nlohmann::ordered_json(*r.delta_mae) : nlohmann::ordered_json(nullptr);
  j["mean_defacto_length"] =
      r.mean_defacto_length ? nlohmann::ordered_json(*r.mean_defacto_length) : nlohmann::ordered_json(nullptr);
  if (!r.per_repeat.empty()) {
    j["accuracy"] = r.accuracy;
    j["f1"] = r.f1;
    j["split"] = r.split;
    j["split_seed"] = r.split_seed;
    j["repeats"] = r.repeats;
    auto& arr = j["per_repeat"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.per_repeat.size(); ++i) {
      const auto& m = r.per_repeat[i];
      arr.push_back({{"repeat", i},
                     {"accuracy", m.accuracy},
                     {"f1", m.f1},
                     {"tp", m.confusion.tp},
                     {"fp", m.confusion.fp},
                     {"tn", m.confusion.tn},
                     {"fn", m.confusion.fn},
                     {"train_size", m.train_size},
                     {"test_size", m.test_size}});
    }
  }
  return j;
}

// Aligned text table: one row per repeat, then the means.
inline std::string render_table(const EvalReport& r) {
  std::string out;
  char buf[160];
  if (r.delta_mae) {
    std::snprintf(buf, sizeof buf, "%-22s %10.6f\n", "delta_mae", *r.delta_mae);
    out += buf;
  }
  if (r.mean_defacto_length) {
    std::snprintf(buf, sizeof buf, "%-22s %10.4f\n", "mean_defacto_length", *r.mean_defacto_length);
    out += buf;
  }
  if (r.per_repeat.empty()) return out;
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %6s %6s %6s %6s\n", "repeat", "accuracy", "f1", "tp", "fp", "tn",
                "fn");
  out += buf;
  for (std::size_t i = 0; i < r.per_repeat.size(); ++i) {
    const auto& m = r.per_repeat[i];
    std::snprintf(buf, sizeof buf, "%-8zu %10.4f %10.4f %6zu %6zu %6zu %6zu\n", i, m.accuracy, m.f1, m.confusion.tp,
                  m.confusion.fp, m.confusion.tn, m.confusion.fn);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-8s %10.4f %10.4f\n", "mean", r.accuracy, r.f1);
  out += buf;
  return out;
}

}  // namespace walkforge
