#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "svdp/errors.hpp"

namespace svdp {

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline double metric_of(const nlohmann::json& obj, const std::string& key) {
  if (!obj.contains(key) || !obj.at(key).is_number()) throw IoError("metrics document lacks '" + key + "'");
  return obj.at(key).get<double>();
}

// Reference methods are simplified reimplementations and say so in every report.
inline std::string method_label(const std::string& method) {
  return method == "entropy_min" || method == "dense_prompt" ? method + " (simplified baseline)" : method;
}

}  // namespace detail

/// Per-domain table of one run: a row per round, the frozen source row and the
/// mean column, in the primary metric.
inline std::string render_run_markdown(const nlohmann::json& m) {
  const std::string key = m.at("primary_metric");
  const auto domains = m.at("domains").get<std::vector<std::string>>();
  std::string out = "## " + detail::method_label(m.at("method").get<std::string>()) + " (" + m.at("task").get<std::string>() + ", " +
                    m.at("mode").get<std::string>() + ", seed " + std::to_string(m.at("seed").get<std::uint64_t>()) +
                    ")\n\n";
  out += "| round |";
  for (const auto& d : domains) out += " " + d + " |";
  out += " mean |\n|---|";
  for (std::size_t i = 0; i <= domains.size(); ++i) out += "---|";
  out += "\n| source |";
  for (const auto& c : m.at("source").at("per_domain")) out += " " + detail::fixed(detail::metric_of(c, key)) + " |";
  out += " " + detail::fixed(detail::metric_of(m.at("source").at("mean"), key)) + " |\n";
  const auto& cells = m.at("cells");
  const auto& means = m.at("round_means");
  for (std::size_t r = 0; r < means.size(); ++r) {
    out += "| " + std::to_string(r + 1) + " |";
    for (std::size_t d = 0; d < domains.size(); ++d) {
      out += " " + detail::fixed(detail::metric_of(cells.at(r * domains.size() + d), key)) + " |";
    }
    out += " " + detail::fixed(detail::metric_of(means.at(r), key)) + " |\n";
  }
  out += "\nOverall " + key + ": " + detail::fixed(detail::metric_of(m.at("overall"), key)) +
         ", gain vs. source: " + detail::fixed(m.at("gain_vs_source").get<double>()) +
         ", adapt steps: " + std::to_string(m.at("adapt_steps").get<std::size_t>()) + "\n";
  for (const auto& t : m.at("truncation")) out += "\nTruncated: " + t.get<std::string>() + "\n";
  return out;
}

/// Long-format CSV: one line per (round, domain, metric); round 0 is the source.
inline std::string render_run_csv(const nlohmann::json& m) {
  std::string out = "method,round,domain,metric,value\n";
  const std::string method = m.at("method");
  auto emit = [&](int round, const nlohmann::json& cell) {
    for (const auto& [k, v] : cell.items()) {
      if (!v.is_number_float()) continue;
      out += method + "," + std::to_string(round) + "," + cell.at("domain").get<std::string>() + "," + k + "," +
             detail::fixed(v.get<double>(), 6) + "\n";
    }
  };
  for (const auto& c : m.at("source").at("per_domain")) emit(0, c);
  for (const auto& c : m.at("cells")) emit(c.at("round").get<int>() + 1, c);
  return out;
}

/// Summary of several runs (ablation rows or sweep points), one line each.
inline std::string render_summary_markdown(const std::string& title,
                                           const std::vector<std::pair<std::string, nlohmann::json>>& runs) {
  std::string out = "## " + title + "\n\n| run | method | overall | source | gain |\n|---|---|---|---|---|\n";
  for (const auto& [name, m] : runs) {
    const std::string key = m.at("primary_metric");
    out += "| " + name + " | " + detail::method_label(m.at("method").get<std::string>()) + " | " +
           detail::fixed(detail::metric_of(m.at("overall"), key)) + " | " +
           detail::fixed(detail::metric_of(m.at("source").at("mean"), key)) + " | " +
           detail::fixed(m.at("gain_vs_source").get<double>()) + " |\n";
  }
  return out;
}

inline std::string render_summary_csv(const std::vector<std::pair<std::string, nlohmann::json>>& runs) {
  std::string out = "run,method,metric,overall,source,gain\n";
  for (const auto& [name, m] : runs) {
    const std::string key = m.at("primary_metric");
    out += name + "," + m.at("method").get<std::string>() + "," + key + "," +
           detail::fixed(detail::metric_of(m.at("overall"), key), 6) + "," +
           detail::fixed(detail::metric_of(m.at("source").at("mean"), key), 6) + "," +
           detail::fixed(m.at("gain_vs_source").get<double>(), 6) + "\n";
  }
  return out;
}

}  // namespace svdp
