#include "coxlasso/report_io.hpp"

#include "coxlasso/numeric_text.hpp"
#include "coxlasso/version.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coxlasso {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* method_name(FactorMethod m) {
  switch (m) {
    case FactorMethod::OrthantExact:
      return "orthant-exact";
    case FactorMethod::Multistart:
      return "multistart";
    case FactorMethod::SamplingBound:
      return "sampling-bound";
  }
  return "unknown";
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_num(v[i]));
  return out;
}

ordered_json doubles_to_json(const std::vector<double>& v) {
  ordered_json out = ordered_json::array();
  for (double x : v) out.push_back(json_num(x));
  return out;
}

std::string q_label(double q) { return format_double(q); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

ordered_json json_num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);  // "inf", "-inf" or "nan" as a string
}

double json_to_num(const ordered_json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_double(v.get<std::string>(), what);
  throw std::runtime_error(what + ": expected a number or a numeric string");
}

ordered_json fit_to_json(const FitResult& fit) {
  ordered_json out;
  out["lambda"] = json_num(fit.lambda);
  out["objective"] = json_num(fit.objective);
  out["kkt_residual"] = json_num(fit.kkt_residual);
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["beta_hat"] = vector_to_json(fit.beta_hat);
  return out;
}

ordered_json factor_to_json(const FactorReport& report) {
  ordered_json out;
  out["value"] = json_num(report.value);
  out["method"] = method_name(report.method);
  out["gap_estimate"] = json_num(report.gap_estimate);
  out["minimizer"] = vector_to_json(report.minimizer);
  return out;
}

ordered_json experiment_to_json(const ExperimentReport& report) {
  ordered_json out;
  out["experiment"] = experiment_name(report.experiment);
  out["version"] = kVersion;
  out["pass"] = report.pass;
  out["config"] = harness_config_to_text(report.config);

  ordered_json stats;
  for (const auto& [key, value] : report.stats) stats[key] = json_num(value);
  out["stats"] = std::move(stats);

  out["notes"] = report.notes;

  ordered_json tails = ordered_json::array();
  for (const TailRow& row : report.tails) {
    ordered_json t;
    t["label"] = row.label;
    t["threshold"] = json_num(row.threshold);
    t["bound"] = json_num(row.bound);
    t["hits"] = row.hits;
    t["trials"] = row.trials;
    t["frequency"] = json_num(row.frequency);
    t["allowance"] = json_num(row.allowance);
    t["ok"] = row.ok;
    tails.push_back(std::move(t));
  }
  out["tails"] = std::move(tails);

  ordered_json records = ordered_json::array();
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const ReplicationRecord& r = report.records[i];
    ordered_json rec;
    rec["rep"] = i;
    rec["seed"] = r.seed;
    rec["lambda"] = json_num(r.lambda);
    rec["z_star"] = json_num(r.z_star);
    rec["qualifies"] = r.qualifies;
    rec["cone_ok"] = r.cone_ok;
    rec["zero_fit"] = r.zero_fit;
    if (r.theta.size() > 0) rec["theta"] = vector_to_json(r.theta);
    rec["d_s"] = json_num(r.d_s);
    rec["l1"] = json_num(r.l1);
    rec["l2"] = json_num(r.l2);
    if (!r.lq.empty()) rec["lq"] = doubles_to_json(r.lq);
    rec["tau"] = json_num(r.tau);
    rec["eta"] = json_num(r.eta);
    rec["applicable"] = r.applicable;
    rec["bregman_bound"] = json_num(r.bregman_bound);
    rec["l1_bound"] = json_num(r.l1_bound);
    if (!r.lq_bounds.empty()) rec["lq_bounds"] = doubles_to_json(r.lq_bounds);
    if (r.kappa) rec["kappa"] = factor_to_json(*r.kappa);
    if (r.re) rec["re"] = factor_to_json(*r.re);
    if (!r.fq.empty()) {
      ordered_json fq = ordered_json::array();
      for (const FactorReport& f : r.fq) fq.push_back(factor_to_json(f));
      rec["fq"] = std::move(fq);
    }
    if (!r.extras.empty()) {
      ordered_json extras;
      for (const auto& [key, value] : r.extras) extras[key] = json_num(value);
      rec["extras"] = std::move(extras);
    }
    rec["violations"] = r.violations;
    records.push_back(std::move(rec));
  }
  out["records"] = std::move(records);
  return out;
}

std::string experiment_to_csv(const ExperimentReport& report) {
  const std::vector<double>& qs = report.config.q_list;

  // Extras columns: union over records, in order of first appearance.
  std::vector<std::string> extra_keys;
  for (const ReplicationRecord& r : report.records) {
    for (const auto& [key, value] : r.extras) {
      (void)value;
      if (std::find(extra_keys.begin(), extra_keys.end(), key) == extra_keys.end()) {
        extra_keys.push_back(key);
      }
    }
  }

  std::string out = "rep,seed,lambda,z_star,qualifies,cone_ok,zero_fit,d_s,l1,l2";
  for (double q : qs) out += ",err_l" + q_label(q);
  out += ",tau,eta,applicable,bregman_bound,l1_bound";
  for (double q : qs) out += ",bound_l" + q_label(q);
  out += ",kappa,kappa_gap,re,re_gap";
  for (double q : qs) out += ",f" + q_label(q) + ",f" + q_label(q) + "_gap";
  for (const std::string& key : extra_keys) out += "," + key;
  out += ",violations\n";

  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const ReplicationRecord& r = report.records[i];
    out += std::to_string(i);
    out += "," + std::to_string(r.seed);
    out += "," + format_double(r.lambda);
    out += "," + format_double(r.z_star);
    out += r.qualifies ? ",1" : ",0";
    out += r.cone_ok ? ",1" : ",0";
    out += r.zero_fit ? ",1" : ",0";
    out += "," + format_double(r.d_s);
    out += "," + format_double(r.l1);
    out += "," + format_double(r.l2);
    for (std::size_t k = 0; k < qs.size(); ++k) {
      out += ",";
      if (k < r.lq.size()) out += format_double(r.lq[k]);
    }
    out += "," + format_double(r.tau);
    out += "," + format_double(r.eta);
    out += r.applicable ? ",1" : ",0";
    out += "," + format_double(r.bregman_bound);
    out += "," + format_double(r.l1_bound);
    for (std::size_t k = 0; k < qs.size(); ++k) {
      out += ",";
      if (k < r.lq_bounds.size()) out += format_double(r.lq_bounds[k]);
    }
    out += ",";
    if (r.kappa) out += format_double(r.kappa->value);
    out += ",";
    if (r.kappa) out += format_double(r.kappa->gap_estimate);
    out += ",";
    if (r.re) out += format_double(r.re->value);
    out += ",";
    if (r.re) out += format_double(r.re->gap_estimate);
    for (std::size_t k = 0; k < qs.size(); ++k) {
      out += ",";
      if (k < r.fq.size()) out += format_double(r.fq[k].value);
      out += ",";
      if (k < r.fq.size()) out += format_double(r.fq[k].gap_estimate);
    }
    for (const std::string& key : extra_keys) {
      out += ",";
      for (const auto& [ekey, value] : r.extras) {
        if (ekey == key) {
          out += format_double(value);
          break;
        }
      }
    }
    std::string joined;
    for (std::size_t k = 0; k < r.violations.size(); ++k) {
      if (k > 0) joined += "; ";
      joined += r.violations[k];
    }
    out += "," + csv_escape(joined) + "\n";
  }
  return out;
}

ordered_json manifest_to_json(const RunManifest& m) {
  ordered_json out;
  out["subcommand"] = m.subcommand;
  out["config"] = m.config_text;
  out["seed"] = m.seed;
  out["inputs"] = m.inputs;
  out["outputs"] = m.outputs;
  out["version"] = m.version.empty() ? kVersion : m.version;
  out["duration_seconds"] = json_num(m.duration_seconds);
  return out;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << content;
  if (!os) throw std::runtime_error("failed while writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream is(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      row.push_back(parse_double(tok, path + ":" + std::to_string(line_no)));
    }
    if (row.empty()) continue;  // blank line
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(rows.front().size()) + " entries, got " +
                               std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": empty matrix file");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void save_matrix(const Eigen::MatrixXd& m, const std::string& path) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += " ";
      out += format_double(m(i, j));
    }
    out += "\n";
  }
  write_text_file(path, out);
}

}  // namespace coxlasso
