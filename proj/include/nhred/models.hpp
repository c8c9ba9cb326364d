#pragma once

#include <map>
#include <memory>

#include "nhred/symmetry.hpp"

namespace nhred {

struct PresetState {
  VectorXd q;
  VectorXd p;
};

/// A fully assembled example system: mechanics, symmetry data, quotient
/// charts, closed-form reference expressions and documented defaults.
struct ModelDescriptor {
  std::string name;
  std::shared_ptr<System> system;
  QuotientChart mg;                                        // M/G
  std::function<QuotientChart(const VectorXd&)> leaf;      // momentum leaf (or zero level for D-momenta)
  QuotientChart qg;                                        // Q/G
  PresetState preset;
  std::function<PresetState(std::mt19937_64&)> sample_state;
  std::map<std::string, double> params;
  /// Closed-form expressions from the model's derivation, used purely as
  /// cross-check oracles. Scalars/vectors are returned as single columns.
  std::function<MatrixXd(const std::string& expr, const VectorXd& point)> reference;

  [[nodiscard]] VectorXd preset_state() const {
    VectorXd xm(system->m_dim());
    xm << preset.q, preset.p;
    return xm;
  }
};

ModelDescriptor get_model(const std::string& name, const std::map<std::string, double>& overrides = {});
std::vector<std::string> model_names();

// Individual builders (registry entries).
ModelDescriptor make_particle_model(const std::map<std::string, double>& overrides);
ModelDescriptor make_chaplygin_model(const std::map<std::string, double>& overrides);
ModelDescriptor make_surface_model(const std::map<std::string, double>& overrides);
ModelDescriptor make_bmf_model(const std::map<std::string, double>& overrides);

}  // namespace nhred
