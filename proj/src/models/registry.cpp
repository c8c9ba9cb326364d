#include "nhred/models.hpp"

namespace nhred {

std::vector<std::string> model_names() {
  return {"nonholonomic-particle", "chaplygin-ball", "ball-on-surface", "bmf-sphere"};
}

ModelDescriptor get_model(const std::string& name, const std::map<std::string, double>& overrides) {
  if (name == "nonholonomic-particle") return make_particle_model(overrides);
  if (name == "chaplygin-ball") return make_chaplygin_model(overrides);
  if (name == "ball-on-surface") return make_surface_model(overrides);
  if (name == "bmf-sphere") return make_bmf_model(overrides);
  fail(ErrorCode::UnknownModel, "no model named '" + name + "'");
}

namespace model_detail {

double param(const std::map<std::string, double>& overrides, std::map<std::string, double>& out,
             const std::string& key, double fallback) {
  auto it = overrides.find(key);
  double v = (it == overrides.end()) ? fallback : it->second;
  out[key] = v;
  return v;
}

void reject_unknown(const std::map<std::string, double>& overrides,
                    const std::map<std::string, double>& accepted, const std::string& model) {
  for (const auto& [key, value] : overrides)
    if (!accepted.count(key))
      fail(ErrorCode::InvalidParameter, model + ": unknown parameter '" + key + "'");
}

}  // namespace model_detail

}  // namespace nhred
