#pragma once

#include "coxlasso/baseline.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace coxlasso {

enum class CovariateLaw {
  ConstantUniform,   // one iid uniform level per subject, constant in time
  PiecewiseUniform,  // iid uniform levels switching at exponential(jump_rate) times
};

struct SimConfig {
  int n = 0;
  int p = 0;
  Eigen::VectorXd beta_true;  // length p
  BaselineHazard baseline;
  double censor_rate = 0.0;  // exponential censoring rate; 0 disables
  double admin_time = std::numeric_limits<double>::infinity();
  CovariateLaw covariate_law = CovariateLaw::ConstantUniform;
  double jump_rate = 1.0;  // covariate jump intensity for PiecewiseUniform
  double k_bound = 1.0;    // K; levels are drawn uniformly from [-K/2, K/2)
  std::uint64_t seed = 0;

  std::vector<int> support() const;  // indices with beta_true != 0
  void check() const;                // throws std::invalid_argument
};

/*
 * Plain key = value text, '#' comments, unknown keys rejected:
 *
 *   n = 200
 *   p = 50
 *   beta_true = 1,-0.5,0,...        # exactly p entries
 *   baseline = constant             # constant | piecewise | weibull
 *   baseline_rate = 1
 *   baseline_grid = 0.5,1           # piecewise only
 *   baseline_rates = 1,2,0.5
 *   weibull_shape = 1.5
 *   weibull_scale = 1
 *   censor_rate = 0.2
 *   admin_time = 3                  # or inf
 *   covariate_law = constant        # constant | piecewise
 *   jump_rate = 1
 *   k_bound = 1
 *   seed = 12345
 */
SimConfig sim_config_from_text(const std::string& text, const std::string& origin = "<string>");
std::string sim_config_to_text(const SimConfig& cfg);
SimConfig load_sim_config(const std::string& path);
void save_sim_config(const SimConfig& cfg, const std::string& path);

// Shared plumbing for config files that embed simulation keys next to their
// own: splits "key = value" lines, leaving interpretation to the caller.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& origin);

// Applies one simulation key. Returns false when the key is not a simulation
// key (so wrapping parsers can claim it); throws on a bad value.
bool apply_sim_key(SimConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& origin);

// Parse helpers shared by the config readers.
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace coxlasso
