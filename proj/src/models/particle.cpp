#include "model_util.hpp"

namespace nhred {

// Particle on R^3 with the constraint zdot = y xdot, flat metric, no potential.
// Fiber coordinates: p_H = <m, d/dy>, p_S = <m, d/dx + y d/dz>.
ModelDescriptor make_particle_model(const std::map<std::string, double>& overrides) {
  std::map<std::string, double> params;
  model_detail::reject_unknown(overrides, params, "nonholonomic-particle");

  auto sys = std::make_shared<System>();
  sys->name = "nonholonomic-particle";
  sys->q_chart_id = "particle.q";
  sys->m_chart_id = "particle.m";
  sys->nq_amb = 3;
  sys->nq = 3;
  sys->h = 1;
  sys->k = 1;
  sys->w = 1;

  sys->kappa = [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(3, 3)); };
  sys->potential = ScalarField{[](const VectorXd&) { return 0.0; }, nullptr, kDefaultFdStep};
  sys->constraints = [](const VectorXd& q) {
    MatrixXd eps(1, 3);
    eps << -q(1), 0.0, 1.0;  // dz - y dx
    return eps;
  };
  sys->tangent_frame_q = [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(3, 3)); };
  sys->q_admissible = [](const VectorXd&) { return true; };
  sys->renormalize_q = [](const VectorXd& q) { return q; };

  sys->H_frame = [](const VectorXd&) {
    MatrixXd H(3, 1);
    H << 0, 1, 0;
    return H;
  };
  sys->S_frame = [](const VectorXd& q) {
    MatrixXd S(3, 1);
    S << 1, 0, q(1);
    return S;
  };
  sys->W_frame = [](const VectorXd& q) {
    MatrixXd W(3, 1);
    W << -q(1), 0, 1;
    return W;
  };

  sys->action.lie_dim = 2;
  sys->action.generators = [](const VectorXd&) {
    MatrixXd g(3, 2);
    g << 1, 0, 0, 0, 0, 1;  // translations in x and z
    return g;
  };
  sys->action.act = [](const VectorXd& g, const VectorXd& q) {
    VectorXd out = q;
    out(0) += g(0);
    out(2) += g(1);
    return out;
  };
  sys->action.pushforward = [](const VectorXd&, const VectorXd&, const VectorXd& v) { return v; };
  sys->action.inverse = [](const VectorXd& g) { return VectorXd(-g); };
  sys->action.sample = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd g(2);
    g << u(rng), u(rng);
    return g;
  };

  sys->gS_sections = [](const VectorXd& q) {
    MatrixXd s(2, 1);
    s << 1.0, q(1);
    return s;
  };
  sys->hgs_sections = [](const VectorXd& q) {
    double f = 1.0 / (1.0 + q(1) * q(1));
    MatrixXd s(2, 1);
    s << std::sqrt(f), q(1) * std::sqrt(f);
    return s;
  };

  ModelDescriptor md;
  md.name = sys->name;
  md.system = sys;
  md.params = params;

  md.mg = QuotientChart{
      "particle.mg", 3,
      [](const VectorXd& xm) {
        VectorXd z(3);
        z << xm(1), xm(3), xm(4);  // (y, p_H, p_S)
        return z;
      },
      [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(3, 3)); },
      [](const VectorXd& z) {
        VectorXd xm(5);
        xm << 0.0, z(0), 0.0, z(1), z(2);
        return xm;
      }};

  md.leaf = [](const VectorXd& level) {
    double c = level(0);
    return QuotientChart{
        "particle.leaf", 2,
        [](const VectorXd& xm) {
          VectorXd z(2);
          z << xm(1), xm(3);  // (y, p_H)
          return z;
        },
        [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(2, 2)); },
        [c](const VectorXd& z) {
          VectorXd xm(5);
          double y = z(0);
          xm << 0.0, y, 0.0, z(1), c * std::sqrt(1.0 + y * y);
          return xm;
        }};
  };

  md.qg = QuotientChart{"particle.qg", 1,
                        [](const VectorXd& q) {
                          VectorXd z(1);
                          z << q(1);
                          return z;
                        },
                        [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(1, 1)); },
                        [](const VectorXd& z) {
                          VectorXd q(3);
                          q << 0.0, z(0), 0.0;
                          return q;
                        }};

  md.preset.q = (VectorXd(3) << 0.2, 0.4, -0.3).finished();
  md.preset.p = (VectorXd(2) << -0.5, 0.7).finished();

  md.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto momentum = [&] {
      double v = u(rng);
      return v + (v >= 0 ? 0.15 : -0.15);
    };
    PresetState st;
    st.q = (VectorXd(3) << u(rng), 1.5 * u(rng), u(rng)).finished();
    st.p = (VectorXd(2) << momentum(), momentum()).finished();
    return st;
  };

  md.reference = [sys](const std::string& expr, const VectorXd& point) -> MatrixXd {
    if (expr == "particle.pi") {
      // (d/dx + y d/dz) ^ d/dv + d/dy ^ d/du - y f v d/du ^ d/dv
      // in chart (x, y, z, u = p_H, v = p_S).
      double y = point(1), v = point(4);
      double f = 1.0 / (1.0 + y * y);
      VectorXd Y = (VectorXd(5) << 1, 0, y, 0, 0).finished();
      VectorXd du = VectorXd::Unit(5, 3), dv = VectorXd::Unit(5, 4), dy = VectorXd::Unit(5, 1);
      auto wedge = [](const VectorXd& a, const VectorXd& b) {
        return MatrixXd(a * b.transpose() - b * a.transpose());
      };
      return wedge(Y, dv) + wedge(dy, du) - y * f * v * wedge(du, dv);
    }
    if (expr == "particle.pic") {
      MatrixXd P(2, 2);
      P << 0, 1, -1, 0;  // pi(dy, du) = 1
      return P;
    }
    fail(ErrorCode::UnknownExpression, "nonholonomic-particle: " + expr);
  };

  return md;
}

}  // namespace nhred
