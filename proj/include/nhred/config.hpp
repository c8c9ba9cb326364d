#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nhred {

/// Parsed run configuration. Accepts a strict sectioned key/value document or
/// the same schema as a JSON object; unknown sections or keys are errors.
struct ConfigDocument {
  std::string model;
  std::map<std::string, double> model_params;

  double dt = 1e-3;
  double t_end = 10.0;
  bool on_zero_level = false;  // start simulate on the common zero level (D-momenta)

  int samples = 100;
  std::uint64_t seed = 42;

  std::map<std::string, double> tolerance_overrides;
  std::string out_path;

  std::vector<std::string> suites;
  bool substitute_pi_nh = false;
  std::string expect_fail;
  std::vector<double> mu;
};

ConfigDocument parse_config_text(const std::string& text);
ConfigDocument parse_config_file(const std::string& path);

}  // namespace nhred
