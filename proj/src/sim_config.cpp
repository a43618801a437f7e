#include "coxlasso/sim_config.hpp"

#include "coxlasso/numeric_text.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coxlasso {

std::vector<int> SimConfig::support() const {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < beta_true.size(); ++j) {
    if (beta_true[j] != 0.0) s.push_back(static_cast<int>(j));
  }
  return s;
}

void SimConfig::check() const {
  if (n <= 0) throw std::invalid_argument("sim config: n must be positive");
  if (p <= 0) throw std::invalid_argument("sim config: p must be positive");
  if (beta_true.size() != p) {
    throw std::invalid_argument("sim config: beta_true must have exactly p entries");
  }
  if (!beta_true.allFinite()) throw std::invalid_argument("sim config: beta_true must be finite");
  baseline.check();
  if (!(censor_rate >= 0.0) || !std::isfinite(censor_rate)) {
    throw std::invalid_argument("sim config: censor_rate must be finite and >= 0");
  }
  if (std::isnan(admin_time) || !(admin_time > 0.0)) {
    throw std::invalid_argument("sim config: admin_time must be positive (inf allowed)");
  }
  if (covariate_law == CovariateLaw::PiecewiseUniform &&
      (!(jump_rate > 0.0) || !std::isfinite(jump_rate))) {
    throw std::invalid_argument("sim config: jump_rate must be positive and finite");
  }
  if (!(k_bound > 0.0) || !std::isfinite(k_bound)) {
    throw std::invalid_argument("sim config: k_bound must be positive and finite");
  }
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    // allow spaces around entries
    const auto lo = item.find_first_not_of(" \t");
    if (lo == std::string::npos) throw std::runtime_error(what + ": empty list entry");
    const auto hi = item.find_last_not_of(" \t");
    out.push_back(parse_double(std::string_view(item).substr(lo, hi - lo + 1), what));
  }
  if (out.empty()) throw std::runtime_error(what + ": empty list");
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto lo = s.find_first_not_of(" \t");
      if (lo == std::string::npos) return std::string();
      const auto hi = s.find_last_not_of(" \t");
      return s.substr(lo, hi - lo + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key or value");
    }
    pairs.emplace_back(std::move(key), std::move(value));
  }
  return pairs;
}

bool apply_sim_key(SimConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& origin) {
  const std::string what = origin + ": " + key;
  if (key == "n") {
    cfg.n = static_cast<int>(parse_int(value, what));
  } else if (key == "p") {
    cfg.p = static_cast<int>(parse_int(value, what));
  } else if (key == "beta_true") {
    const auto vals = parse_double_list(value, what);
    cfg.beta_true = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                      static_cast<Eigen::Index>(vals.size()));
  } else if (key == "baseline") {
    if (value == "constant") {
      cfg.baseline.kind = BaselineHazard::Kind::Constant;
    } else if (value == "piecewise") {
      cfg.baseline.kind = BaselineHazard::Kind::PiecewiseConstant;
    } else if (value == "weibull") {
      cfg.baseline.kind = BaselineHazard::Kind::Weibull;
    } else {
      throw std::runtime_error(what + ": expected constant, piecewise, or weibull");
    }
  } else if (key == "baseline_rate") {
    cfg.baseline.rate = parse_double(value, what);
  } else if (key == "baseline_grid") {
    cfg.baseline.grid = parse_double_list(value, what);
  } else if (key == "baseline_rates") {
    cfg.baseline.rates = parse_double_list(value, what);
  } else if (key == "weibull_shape") {
    cfg.baseline.shape = parse_double(value, what);
  } else if (key == "weibull_scale") {
    cfg.baseline.scale = parse_double(value, what);
  } else if (key == "censor_rate") {
    cfg.censor_rate = parse_double(value, what);
  } else if (key == "admin_time") {
    cfg.admin_time = parse_double(value, what);
  } else if (key == "covariate_law") {
    if (value == "constant") {
      cfg.covariate_law = CovariateLaw::ConstantUniform;
    } else if (value == "piecewise") {
      cfg.covariate_law = CovariateLaw::PiecewiseUniform;
    } else {
      throw std::runtime_error(what + ": expected constant or piecewise");
    }
  } else if (key == "jump_rate") {
    cfg.jump_rate = parse_double(value, what);
  } else if (key == "k_bound") {
    cfg.k_bound = parse_double(value, what);
  } else if (key == "seed") {
    cfg.seed = parse_uint(value, what);
  } else {
    return false;
  }
  return true;
}

SimConfig sim_config_from_text(const std::string& text, const std::string& origin) {
  SimConfig cfg;
  for (const auto& [key, value] : parse_key_values(text, origin)) {
    if (!apply_sim_key(cfg, key, value, origin)) {
      throw std::runtime_error(origin + ": unknown key '" + key + "'");
    }
  }
  cfg.check();
  return cfg;
}

std::string sim_config_to_text(const SimConfig& cfg) {
  std::string out;
  out += "n = " + std::to_string(cfg.n) + "\n";
  out += "p = " + std::to_string(cfg.p) + "\n";
  std::string beta;
  for (Eigen::Index j = 0; j < cfg.beta_true.size(); ++j) {
    if (j) beta += ",";
    beta += format_double(cfg.beta_true[j]);
  }
  out += "beta_true = " + beta + "\n";
  switch (cfg.baseline.kind) {
    case BaselineHazard::Kind::Constant:
      out += "baseline = constant\n";
      out += "baseline_rate = " + format_double(cfg.baseline.rate) + "\n";
      break;
    case BaselineHazard::Kind::PiecewiseConstant: {
      out += "baseline = piecewise\n";
      std::string grid, rates;
      for (std::size_t k = 0; k < cfg.baseline.grid.size(); ++k) {
        if (k) grid += ",";
        grid += format_double(cfg.baseline.grid[k]);
      }
      for (std::size_t k = 0; k < cfg.baseline.rates.size(); ++k) {
        if (k) rates += ",";
        rates += format_double(cfg.baseline.rates[k]);
      }
      out += "baseline_grid = " + grid + "\n";
      out += "baseline_rates = " + rates + "\n";
      break;
    }
    case BaselineHazard::Kind::Weibull:
      out += "baseline = weibull\n";
      out += "weibull_shape = " + format_double(cfg.baseline.shape) + "\n";
      out += "weibull_scale = " + format_double(cfg.baseline.scale) + "\n";
      break;
  }
  out += "censor_rate = " + format_double(cfg.censor_rate) + "\n";
  out += "admin_time = " + format_double(cfg.admin_time) + "\n";
  out += std::string("covariate_law = ") +
         (cfg.covariate_law == CovariateLaw::ConstantUniform ? "constant" : "piecewise") + "\n";
  out += "jump_rate = " + format_double(cfg.jump_rate) + "\n";
  out += "k_bound = " + format_double(cfg.k_bound) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  return out;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_sim_config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return sim_config_from_text(buffer.str(), path);
}

void save_sim_config(const SimConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_sim_config: cannot open '" + path + "' for writing");
  os << sim_config_to_text(cfg);
  if (!os) throw std::runtime_error("save_sim_config: write to '" + path + "' failed");
}

}  // namespace coxlasso
