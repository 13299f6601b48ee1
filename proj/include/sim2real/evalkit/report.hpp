#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/files.hpp"
#include "sim2real/evalkit/metrics.hpp"

namespace sim2real::evalkit {

namespace fs = std::filesystem;
using nlohmann::json;

struct TierReport {
  std::string tier;
  EvalResult result;
  Aggregate stats;
  std::size_t n = 0;  // rows that produced an IoU
};

struct EvalReport {
  std::string config;  // short id, e.g. beta0.5_bz8
  std::string label;   // table row label
  std::string config_hash;
  std::string checkpoint_id;
  std::vector<TierReport> tiers;
  Aggregate overall;        // pooled over every per-image IoU
  Aggregate tier_means;     // mean and spread of the per-tier means
  std::size_t overall_n = 0;
};

inline std::string config_id(double beta, int batch_size) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "beta%g_bz%d", beta, batch_size);
  return buf;
}

inline std::string config_label(int index, double beta, int batch_size) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "Training %d: \xCE\xB2=%g, BZ = %d", index, beta, batch_size);
  return buf;
}

/// "88.03% ± 11.27%" for (0.8803, 0.1127).
inline std::string format_percent(const Aggregate& a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%% \xC2\xB1 %.2f%%", 100.0 * a.mean, 100.0 * a.std);
  return buf;
}

inline EvalReport make_report(std::string config, std::string label, std::string config_hash, std::string checkpoint_id,
                              std::vector<std::pair<std::string, EvalResult>> results) {
  EvalReport r{std::move(config), std::move(label), std::move(config_hash), std::move(checkpoint_id), {}, {}, {}, 0};
  std::vector<double> pooled, means;
  for (auto& [tier, res] : results) {
    TierReport t{tier, std::move(res), {}, 0};
    const auto v = t.result.valid_ious();
    t.n = v.size();
    if (!v.empty()) {
      t.stats = aggregate(v);
      means.push_back(t.stats.mean);
    }
    pooled.insert(pooled.end(), v.begin(), v.end());
    r.tiers.push_back(std::move(t));
  }
  r.overall_n = pooled.size();
  if (!pooled.empty()) r.overall = aggregate(pooled);
  if (!means.empty()) r.tier_means = aggregate(means);
  return r;
}

inline json to_json(const EvalReport& r) {
  json tiers = json::array();
  for (const auto& t : r.tiers) {
    json ious = json::array();
    for (double v : t.result.ious) ious.push_back(std::isnan(v) ? json(nullptr) : json(v));
    json failures = json::array();
    for (const auto& f : t.result.failures) failures.push_back({{"row", f.row}, {"message", f.message}});
    tiers.push_back({{"tier", t.tier},
                     {"n", t.n},
                     {"mean_iou", t.stats.mean},
                     {"std_iou", t.stats.std},
                     {"empty_mask_cases", t.result.empty_mask_cases},
                     {"failures", failures},
                     {"ious", ious}});
  }
  return {{"config", r.config},
          {"label", r.label},
          {"config_hash", r.config_hash},
          {"checkpoint_id", r.checkpoint_id},
          {"overall", {{"n", r.overall_n}, {"mean_iou", r.overall.mean}, {"std_iou", r.overall.std}}},
          {"tier_means", {{"mean_iou", r.tier_means.mean}, {"std_iou", r.tier_means.std}}},
          {"tiers", tiers}};
}

inline EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.config = j.at("config").get<std::string>();
  r.label = j.at("label").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  r.overall_n = j.at("overall").at("n").get<std::size_t>();
  r.overall = {j.at("overall").at("mean_iou").get<double>(), j.at("overall").at("std_iou").get<double>()};
  r.tier_means = {j.at("tier_means").at("mean_iou").get<double>(), j.at("tier_means").at("std_iou").get<double>()};
  for (const auto& t : j.at("tiers")) {
    TierReport tr;
    tr.tier = t.at("tier").get<std::string>();
    tr.n = t.at("n").get<std::size_t>();
    tr.stats = {t.at("mean_iou").get<double>(), t.at("std_iou").get<double>()};
    tr.result.empty_mask_cases = t.at("empty_mask_cases").get<std::size_t>();
    for (const auto& v : t.at("ious"))
      tr.result.ious.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    for (const auto& f : t.at("failures"))
      tr.result.failures.push_back({f.at("row").get<std::size_t>(), f.at("message").get<std::string>()});
    r.tiers.push_back(std::move(tr));
  }
  return r;
}

/// Recomputes every aggregate from the stored per-image lists; throws
/// NumericError if any stored value is off by more than `tol`.
inline void verify_report(const EvalReport& r, double tol = 1e-9) {
  auto check = [&](const char* what, const std::string& where, double stored, double fresh) {
    if (!(std::abs(stored - fresh) <= tol))
      throw NumericError(std::string("report ") + what + " mismatch in " + where);
  };
  std::vector<double> pooled, means;
  for (const auto& t : r.tiers) {
    const auto v = t.result.valid_ious();
    if (v.size() != t.n) throw NumericError("report n mismatch in " + t.tier);
    if (v.empty()) continue;
    const auto a = aggregate(v);
    check("mean", t.tier, t.stats.mean, a.mean);
    check("std", t.tier, t.stats.std, a.std);
    pooled.insert(pooled.end(), v.begin(), v.end());
    means.push_back(a.mean);
  }
  if (!pooled.empty()) {
    const auto a = aggregate(pooled);
    check("mean", "overall", r.overall.mean, a.mean);
    check("std", "overall", r.overall.std, a.std);
  }
  if (!means.empty()) {
    const auto a = aggregate(means);
    check("mean", "tier means", r.tier_means.mean, a.mean);
    check("std", "tier means", r.tier_means.std, a.std);
  }
}

inline constexpr const char* kReportCsvHeader = "config,tier,n,mean_iou,std_iou,empty_mask_cases,failures";

inline std::string report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  auto row = [&](const std::string& config, const std::string& tier, std::size_t n, const Aggregate& a,
                 std::size_t empty, std::size_t failures) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.17g,%.17g,%zu,%zu\n", config.c_str(), tier.c_str(), n, a.mean, a.std,
                  empty, failures);
    out << buf;
  };
  for (const auto& r : reports) {
    std::size_t empty = 0, failures = 0;
    for (const auto& t : r.tiers) {
      row(r.config, t.tier, t.n, t.stats, t.result.empty_mask_cases, t.result.failures.size());
      empty += t.result.empty_mask_cases;
      failures += t.result.failures.size();
    }
    row(r.config, "OVERALL", r.overall_n, r.overall, empty, failures);
    row(r.config, "TIER_MEAN", r.tiers.size(), r.tier_means, empty, failures);
  }
  return out.str();
}

struct CsvRow {
  std::string config, tier;
  std::size_t n = 0;
  double mean_iou = 0, std_iou = 0;
  std::size_t empty_mask_cases = 0, failures = 0;
};

inline std::vector<CsvRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) throw IoError("report csv: unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw IoError("report csv: expected 7 fields in '" + line + "'");
    rows.push_back({f[0], f[1], std::stoul(f[2]), std::stod(f[3]), std::stod(f[4]), std::stoul(f[5]), std::stoul(f[6])});
  }
  return rows;
}

/// One row per configuration, one column per tier, then the pooled overall score.
inline std::string report_markdown(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  for (const auto& r : reports) {
    if (r.tiers.size() != reports.front().tiers.size()) throw ParameterError("report: tier structure differs between runs");
    for (std::size_t i = 0; i < r.tiers.size(); ++i)
      if (r.tiers[i].tier != reports.front().tiers[i].tier) throw ParameterError("report: tier structure differs between runs");
  }
  std::ostringstream out;
  out << "| Configuration |";
  for (const auto& t : reports.front().tiers) out << ' ' << t.tier << " |";
  out << " Overall | Mean of tiers |\n|---|";
  for (std::size_t i = 0; i < reports.front().tiers.size() + 2; ++i) out << "---|";
  out << '\n';
  for (const auto& r : reports) {
    out << "| " << r.label << " |";
    for (const auto& t : r.tiers) out << ' ' << format_percent(t.stats) << " |";
    out << ' ' << format_percent(r.overall) << " | " << format_percent(r.tier_means) << " |\n";
  }
  std::size_t failures = 0;
  for (const auto& r : reports)
    for (const auto& t : r.tiers) failures += t.result.failures.size();
  if (failures) out << "\n" << failures << " evaluation failure(s); see the JSON reports.\n";
  return out.str();
}

/// Writes report.csv and report.md under out_dir.
inline void report(const std::vector<EvalReport>& reports, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "report.csv", report_csv(reports));
  write_file_atomic(out_dir / "report.md", report_markdown(reports));
}

}  // namespace sim2real::evalkit
