#pragma once

#include "coxlasso/harness.hpp"
#include "coxlasso/lasso.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace coxlasso {

// JSON value for a double that survives non-finite inputs: finite values stay
// numbers, inf / -inf / nan become their text names so documents stay valid.
nlohmann::ordered_json json_num(double v);
double json_to_num(const nlohmann::ordered_json& v, const std::string& what);

nlohmann::ordered_json fit_to_json(const FitResult& fit);
nlohmann::ordered_json factor_to_json(const FactorReport& report);

// Full experiment report as one document: configuration text, aggregates,
// tail tables, and every replication record including factor certificates.
nlohmann::ordered_json experiment_to_json(const ExperimentReport& report);

// Flat table of the replication records, one row each: fixed measurement
// columns, then the union of experiment-specific extras, then violations.
std::string experiment_to_csv(const ExperimentReport& report);

/*
 * Everything needed to reproduce a run: re-invoking the same subcommand with
 * the recorded configuration and seed rewrites every listed output byte for
 * byte. duration_seconds is informational and naturally varies.
 */
struct RunManifest {
  std::string subcommand;
  std::string config_text;  // resolved configuration, defaults materialized
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version;
  double duration_seconds = 0.0;
};

nlohmann::ordered_json manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Plain text matrix files: one row per line, space-separated entries.
Eigen::MatrixXd load_matrix(const std::string& path);
void save_matrix(const Eigen::MatrixXd& m, const std::string& path);

}  // namespace coxlasso
