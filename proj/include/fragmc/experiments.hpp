#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragmc/coupled_pair.hpp"
#include "fragmc/dislocation.hpp"
#include "fragmc/limit_statistics.hpp"
#include "fragmc/tagged_fragments.hpp"

namespace fragmc {

/// Named test-function builders available from config files:
///   {"type":"identity"}
///   {"type":"indicator","lo":0.5,"hi":1.0}
///   {"type":"polynomial","coeffs":[c0,c1,...]}
TestFunction make_test_function(const nlohmann::json& spec);

struct Thresholds {
  double ks_level = 0.01;
  double sigma_rule = 4.0;
  double var_ratio_lo = 0.8;
  double var_ratio_hi = 1.2;
  double decay_r2 = 0.0;  // extra r^2 requirement on the decay fit (0 = slope sign only)
};

/// Parsed experiment configuration; `raw` keeps the full document for the
/// provenance digest and for experiment-specific sections.
struct ExperimentConfig {
  MeasureSpec measure;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  Thresholds thresholds;
  nlohmann::json raw;

  static ExperimentConfig load(const std::string& path,
                               std::optional<std::uint64_t> seed_override,
                               unsigned jobs);
  static ExperimentConfig from_json(const nlohmann::json& doc,
                                    std::optional<std::uint64_t> seed_override,
                                    unsigned jobs);
  const nlohmann::json& section(const std::string& name) const;
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string observed;
  std::string tolerance;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  std::string kind;
  std::vector<Verdict> verdicts;
  std::map<std::string, Table> tables;
  nlohmann::json summary = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string version;

  bool all_pass() const;
  nlohmann::json to_json() const;
  /// Writes <kind>_summary.json plus one CSV per table into out_dir
  /// (format "json" suppresses the CSVs). All numerics use 17 significant
  /// digits for bit-stable round-trips.
  void write(const std::string& out_dir, const std::string& format) const;
};

ExperimentReport run_lln(const ExperimentConfig& cfg);
ExperimentReport run_clt(const ExperimentConfig& cfg);
ExperimentReport run_pairing_check(const ExperimentConfig& cfg);
ExperimentReport run_renewal_check(const ExperimentConfig& cfg);
ExperimentReport run_cross_validation(const ExperimentConfig& cfg);
ExperimentReport run_simulate(const ExperimentConfig& cfg, const std::string& out_dir);

KernelOptions kernel_options_from(const nlohmann::json& section, unsigned jobs);

/// Kernel estimate with its per-segment contributions, for reports.
nlohmann::json kernel_to_json(const KernelEstimate& est);

/// Audit dump of a tagged run (per-tag renewal times, final residuals,
/// frozen tag groups); test forensics only.
nlohmann::json tagged_audit_json(const TaggedRun& run);

}  // namespace fragmc
