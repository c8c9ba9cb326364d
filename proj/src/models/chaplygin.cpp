#include "model_util.hpp"

namespace nhred {

using so3::axial;
using so3::expm;
using so3::hat;
using so3::unpack;
using so3::vec9;

namespace {

struct ChapParams {
  Vector3d inertia;
  double m = 1.0;
  double r = 0.25;
  double gamma3_margin = 1e-3;
};

// Chart layout: q = [g (9, column-major); x; y], momenta (M1, M2, M3) against
// the dual of {X_1, X_2, Y}.
Eigen::Matrix3d g_of(const VectorXd& q) { return unpack(q, 0); }

MatrixXd tangent_frame(const VectorXd& q) {
  Eigen::Matrix3d g = g_of(q);
  MatrixXd T = MatrixXd::Zero(11, 5);
  for (int i = 0; i < 3; ++i) T.col(i).head(9) = vec9(g * hat(Vector3d::Unit(i)));  // X_i^L
  T(9, 3) = 1.0;
  T(10, 4) = 1.0;
  return T;
}

VectorXd dd_field(const std::shared_ptr<ChapParams>& P, const VectorXd& q, int j) {
  // XX_j = X_j^L + r beta_j d/dx - r alpha_j d/dy
  Eigen::Matrix3d g = g_of(q);
  VectorXd v = VectorXd::Zero(11);
  v.head(9) = vec9(g * hat(Vector3d::Unit(j)));
  v(9) = P->r * g(1, j);
  v(10) = -P->r * g(0, j);
  return v;
}

VectorXd y_field(const VectorXd& q) {
  VectorXd v = VectorXd::Zero(11);
  v.head(9) = vec9(hat(Vector3d::UnitZ()) * g_of(q));  // e3^ g = gamma_j X_j^L
  return v;
}

}  // namespace

ModelDescriptor make_chaplygin_model(const std::map<std::string, double>& overrides) {
  std::map<std::string, double> params;
  auto P = std::make_shared<ChapParams>();
  P->inertia = Vector3d(model_detail::param(overrides, params, "I1", 0.9),
                        model_detail::param(overrides, params, "I2", 1.1),
                        model_detail::param(overrides, params, "I3", 1.4));
  P->m = model_detail::param(overrides, params, "m", 1.0);
  P->r = model_detail::param(overrides, params, "r", 0.25);
  P->gamma3_margin = model_detail::param(overrides, params, "gamma3_margin", 1e-3);
  model_detail::reject_unknown(overrides, params, "chaplygin-ball");
  if (P->inertia.minCoeff() <= 0 || P->m <= 0 || P->r <= 0)
    fail(ErrorCode::InvalidParameter, "chaplygin-ball: I, m, r must be positive");

  auto sys = std::make_shared<System>();
  sys->name = "chaplygin-ball";
  sys->q_chart_id = "chaplygin.q";
  sys->m_chart_id = "chaplygin.m";
  sys->nq_amb = 11;
  sys->nq = 5;
  sys->h = 2;
  sys->k = 1;
  sys->w = 2;

  sys->kappa = [P](const VectorXd& q) {
    MatrixXd kap = MatrixXd::Zero(11, 11);
    MatrixXd L = so3::left_mc_matrix(g_of(q));
    kap.topLeftCorner(9, 9) = L.transpose() * P->inertia.asDiagonal() * L;
    kap(9, 9) = P->m;
    kap(10, 10) = P->m;
    return kap;
  };
  sys->potential = ScalarField{[](const VectorXd&) { return 0.0; }, nullptr, kDefaultFdStep};
  sys->constraints = [P](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    MatrixXd L = so3::left_mc_matrix(g);
    MatrixXd eps = MatrixXd::Zero(2, 11);
    eps.row(0).head(9) = -P->r * (g.row(1) * L);  // dx - r <beta, lambda>
    eps(0, 9) = 1.0;
    eps.row(1).head(9) = P->r * (g.row(0) * L);  // dy + r <alpha, lambda>
    eps(1, 10) = 1.0;
    return eps;
  };
  sys->tangent_frame_q = tangent_frame;
  sys->q_admissible = [P](const VectorXd& q) {
    return std::abs(g_of(q)(2, 2)) > P->gamma3_margin;
  };
  sys->renormalize_q = [](const VectorXd& q) {
    VectorXd out = q;
    so3::pack(out, 0, so3::polar(g_of(q)));
    return out;
  };

  sys->H_frame = [P](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    MatrixXd H(11, 2);
    for (int i = 0; i < 2; ++i) H.col(i) = dd_field(P, q, i) - g(2, i) * y_field(q);
    return H;
  };
  sys->S_frame = [](const VectorXd& q) { return MatrixXd(y_field(q)); };
  sys->W_frame = [](const VectorXd&) {
    MatrixXd W = MatrixXd::Zero(11, 2);
    W(9, 0) = 1.0;
    W(10, 1) = 1.0;
    return W;
  };

  sys->action.lie_dim = 3;  // vertical-axis rotation + planar translations
  sys->action.generators = [](const VectorXd& q) {
    MatrixXd G = MatrixXd::Zero(11, 3);
    G.col(0).head(9) = vec9(hat(Vector3d::UnitZ()) * g_of(q));
    G(9, 0) = -q(10);
    G(10, 0) = q(9);
    G(9, 1) = 1.0;
    G(10, 2) = 1.0;
    return G;
  };
  sys->action.act = [](const VectorXd& g, const VectorXd& q) {
    Eigen::Matrix3d R = expm(g(0) * Vector3d::UnitZ());
    VectorXd out = q;
    so3::pack(out, 0, Eigen::Matrix3d(R * g_of(q)));
    double c = std::cos(g(0)), s = std::sin(g(0));
    out(9) = c * q(9) - s * q(10) + g(1);
    out(10) = s * q(9) + c * q(10) + g(2);
    return out;
  };
  sys->action.pushforward = [](const VectorXd& g, const VectorXd&, const VectorXd& v) {
    Eigen::Matrix3d R = expm(g(0) * Vector3d::UnitZ());
    VectorXd out = v;
    so3::pack(out, 0, Eigen::Matrix3d(R * unpack(v, 0)));
    double c = std::cos(g(0)), s = std::sin(g(0));
    out(9) = c * v(9) - s * v(10);
    out(10) = s * v(9) + c * v(10);
    return out;
  };
  sys->action.inverse = [](const VectorXd& g) {
    double c = std::cos(g(0)), s = std::sin(g(0));
    VectorXd inv(3);
    inv << -g(0), -(c * g(1) + s * g(2)), -(-s * g(1) + c * g(2));
    return inv;
  };
  sys->action.sample = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd g(3);
    g << 3.0 * u(rng), u(rng), u(rng);
    return g;
  };

  sys->gS_sections = [](const VectorXd& q) {
    MatrixXd s(3, 1);
    s << 1.0, q(10), -q(9);  // generator equals Y
    return s;
  };
  sys->hgs_sections = sys->gS_sections;

  ModelDescriptor md;
  md.name = sys->name;
  md.system = sys;
  md.params = params;

  auto gamma_of = [](const VectorXd& xm) { return Vector3d(unpack(xm, 0).row(2)); };

  md.mg = QuotientChart{
      "chaplygin.mg", 6,
      [gamma_of](const VectorXd& xm) {
        VectorXd z(6);
        z << gamma_of(xm), xm.tail(3);
        return z;
      },
      [](const VectorXd& z) {
        Vector3d gamma = z.head(3).normalized();
        MatrixXd T = MatrixXd::Zero(6, 5);
        T.topLeftCorner(3, 2) = orthonormal_columns(hat(gamma));
        T.bottomRightCorner(3, 3).setIdentity();
        return T;
      },
      [](const VectorXd& z) {
        VectorXd xm(14);
        so3::pack(xm, 0, so3::from_third_row(z.head(3)));
        xm(9) = 0.8;
        xm(10) = 0.0;
        xm.tail(3) = z.tail(3);
        return xm;
      }};

  md.leaf = [](const VectorXd& level) {
    double c = level(0);
    return QuotientChart{
        "chaplygin.leaf", 5,
        [](const VectorXd& xm) {
          VectorXd z(5);
          z << Vector3d(unpack(xm, 0).row(2)), xm(11), xm(12);
          return z;
        },
        [](const VectorXd& z) {
          Vector3d gamma = z.head(3).normalized();
          MatrixXd T = MatrixXd::Zero(5, 4);
          T.topLeftCorner(3, 2) = orthonormal_columns(hat(gamma));
          T.bottomRightCorner(2, 2).setIdentity();
          return T;
        },
        [c](const VectorXd& z) {
          VectorXd xm(14);
          so3::pack(xm, 0, so3::from_third_row(z.head(3)));
          xm(9) = 0.8;
          xm(10) = 0.0;
          xm(11) = z(3);
          xm(12) = z(4);
          xm(13) = c;
          return xm;
        }};
  };

  md.qg = QuotientChart{"chaplygin.qg", 3,
                        [](const VectorXd& q) { return VectorXd(Vector3d(g_of(q).row(2))); },
                        [](const VectorXd& z) {
                          return MatrixXd(orthonormal_columns(hat(Vector3d(z.normalized()))));
                        },
                        [](const VectorXd& z) {
                          VectorXd q(11);
                          so3::pack(q, 0, so3::from_third_row(z));
                          q(9) = 0.8;
                          q(10) = 0.0;
                          return q;
                        }};

  md.preset.q = VectorXd(11);
  so3::pack(md.preset.q, 0, expm(Vector3d(0.4, -0.3, 0.5)));
  md.preset.q(9) = 0.3;
  md.preset.q(10) = -0.2;
  md.preset.p = (VectorXd(3) << 0.4, -0.3, 0.6).finished();

  md.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto momentum = [&] {
      double v = u(rng);
      return v + (v >= 0 ? 0.15 : -0.15);
    };
    PresetState st;
    st.q = VectorXd(11);
    while (true) {
      Vector3d axis(u(rng), u(rng), u(rng));
      Eigen::Matrix3d g = expm(Vector3d(1.2 * axis));
      if (std::abs(g(2, 2)) < 0.25) continue;
      so3::pack(st.q, 0, g);
      break;
    }
    st.q(9) = u(rng);
    st.q(10) = u(rng);
    st.p = (VectorXd(3) << momentum(), momentum(), momentum()).finished();
    return st;
  };

  md.reference = [sys, P](const std::string& expr, const VectorXd& point) -> MatrixXd {
    using model_detail::wedge_cols;
    using model_detail::wedge_rows;
    if (expr == "chap.pi1") {
      // X_1 ^ dM1 + X_2 ^ dM2 + Y ^ dM3 - (1/g3)(M1 g1 - M2 g2) dM1 ^ dM2
      VectorXd q = point.head(11);
      Vector3d gamma = g_of(q).row(2);
      AdaptedBasis ab = sys->basis_at(q);
      auto lift = [&](const VectorXd& base) {
        VectorXd v = VectorXd::Zero(14);
        v.head(11) = base;
        return v;
      };
      MatrixXd out = MatrixXd::Zero(14, 14);
      for (int a = 0; a < 3; ++a)
        out += wedge_cols(lift(ab.frame.col(a)), VectorXd::Unit(14, 11 + a));
      out -= (point(11) * gamma(0) - point(12) * gamma(1)) / gamma(2) *
             wedge_cols(VectorXd::Unit(14, 11), VectorXd::Unit(14, 12));
      return out;
    }
    if (expr == "chap.curlyB") {
      // (m r^2 <gamma, Omega> + M3) g3 sigma^1 ^ sigma^2
      VectorXd q = point.head(11);
      Vector3d gamma = g_of(q).row(2);
      AdaptedBasis ab = sys->basis_at(q);
      VectorXd v = ab.gram_D.llt().solve(point.tail(3));
      VectorXd vq = ab.D() * v;
      Vector3d omega = so3::left_mc_matrix(g_of(q)) * vq.head(9);
      double coef = (P->m * P->r * P->r * gamma.dot(omega) + point(13)) * gamma(2);
      RowVectorXd s1 = RowVectorXd::Zero(14), s2 = RowVectorXd::Zero(14);
      s1.head(11) = ab.coframe.row(0);
      s2.head(11) = ab.coframe.row(1);
      return MatrixXd(coef * wedge_rows(s1, s2));
    }
    if (expr == "chap.omega1" || expr == "chap.omega_can") {
      // Leaf chart (gamma, M1, M2): sigma-bar^a ^ dMa [+ (1/g3)(M1g1 - M2g2) s1^s2].
      Vector3d gamma = point.head(3);
      MatrixXd pushed(3, 2);
      pushed.col(0) = gamma.cross(Vector3d::UnitX());
      pushed.col(1) = gamma.cross(Vector3d::UnitY());
      MatrixXd sig = dual_coframe(pushed);  // 2 x 3
      RowVectorXd s1 = RowVectorXd::Zero(5), s2 = RowVectorXd::Zero(5);
      s1.head(3) = sig.row(0);
      s2.head(3) = sig.row(1);
      RowVectorXd dM1 = RowVectorXd::Unit(5, 3), dM2 = RowVectorXd::Unit(5, 4);
      if (expr == "chap.omega1") {
        MatrixXd out = wedge_rows(s1, dM1) + wedge_rows(s2, dM2);
        out += (point(3) * gamma(0) - point(4) * gamma(1)) / gamma(2) * wedge_rows(s1, s2);
        return out;
      }
      // omega_can = -d(M1 sigma^1 + M2 sigma^2) evaluated by finite differences
      OneFormField theta{[](const VectorXd& z) {
                           Vector3d gm = z.head(3);
                           MatrixXd pb(3, 2);
                           pb.col(0) = gm.cross(Vector3d::UnitX());
                           pb.col(1) = gm.cross(Vector3d::UnitY());
                           MatrixXd sg = dual_coframe(pb);
                           RowVectorXd row = RowVectorXd::Zero(5);
                           row.head(3) = z(3) * sg.row(0) + z(4) * sg.row(1);
                           return row;
                         },
                         kDefaultFdStep};
      return MatrixXd(-exterior_derivative_at(theta, {"chaplygin.leaf", point}));
    }
    if (expr == "chap.hatB") {
      // T*S^2 point (gamma, Pbar); c passed as point(6).
      Vector3d gamma = point.head(3);
      Vector3d Pbar = point.segment(3, 3);
      double c = point(6);
      double M1 = Pbar.dot(gamma.cross(Vector3d::UnitX()));
      double M2 = Pbar.dot(gamma.cross(Vector3d::UnitY()));
      Vector3d M(M1, M2, (-M1 * gamma(0) - M2 * gamma(1)) / gamma(2));
      double mr2 = P->m * P->r * P->r;
      Vector3d Ainv_gamma = (P->inertia.array() + mr2).inverse().matrix().asDiagonal() * gamma;
      Vector3d Ainv_M = (P->inertia.array() + mr2).inverse().matrix().asDiagonal() * M;
      double Yg = 1.0 - mr2 * Ainv_gamma.dot(gamma);
      double coef = (mr2 * Ainv_M.dot(gamma) / Yg + c / Yg) * gamma(2);
      MatrixXd pushed(3, 2);
      pushed.col(0) = gamma.cross(Vector3d::UnitX());
      pushed.col(1) = gamma.cross(Vector3d::UnitY());
      MatrixXd sig = dual_coframe(pushed);
      RowVectorXd s1 = RowVectorXd::Zero(6), s2 = RowVectorXd::Zero(6);
      s1.head(3) = sig.row(0);
      s2.head(3) = sig.row(1);
      return MatrixXd(coef * wedge_rows(s1, s2));
    }
    fail(ErrorCode::UnknownExpression, "chaplygin-ball: " + expr);
  };

  return md;
}

}  // namespace nhred
