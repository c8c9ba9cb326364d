#include "model_util.hpp"

namespace nhred {

using so3::hat;
using so3::unpack;
using so3::vec9;

namespace {

struct BmfParams {
  Vector3d inertia{1.0, 1.5, 2.0};
  double m = 1.0, R0 = 0.5;
  double r3_margin = 1e-3;
  [[nodiscard]] double r0() const { return 2.0 * R0; }  // k = -1 configuration
  [[nodiscard]] double mr2() const { return m * r0() * r0(); }

  [[nodiscard]] Eigen::Matrix3d En(const Vector3d& n) const {
    return inertia.asDiagonal().toDenseMatrix() + mr2() * (Eigen::Matrix3d::Identity() - n * n.transpose());
  }
  [[nodiscard]] Eigen::Matrix3d A() const {
    Eigen::Matrix3d E = inertia.asDiagonal().toDenseMatrix() + mr2() * Eigen::Matrix3d::Identity();
    return E.trace() * Eigen::Matrix3d::Identity() - 2.0 * E;
  }
  [[nodiscard]] double gfun(const Vector3d& n) const {
    Vector3d An = A() * n;
    return n.dot(inertia.asDiagonal() * An) / An.dot(En(n) * An);
  }
  [[nodiscard]] Vector3d hfun(const Vector3d& n) const {
    return (inertia.asDiagonal() * n).cross(En(n) * (A() * n));
  }
};

// Chart layout: q = [g (9, column-major); r (3)], momenta (p1, p2, pY)
// against the dual of {U_1, U_2, Y}.
Eigen::Matrix3d g_of(const VectorXd& q) { return unpack(q, 0); }
Vector3d r_of(const VectorXd& q) { return q.tail(3); }
Vector3d n_of(const BmfParams& P, const VectorXd& q) { return -g_of(q).transpose() * r_of(q) / P.R0; }

/// X_i = X_i^L + (1-k) <c_i x r, d/dr> with k = -1.
VectorXd x_field(const VectorXd& q, int i) {
  Eigen::Matrix3d g = g_of(q);
  VectorXd v = VectorXd::Zero(12);
  v.head(9) = vec9(Eigen::Matrix3d(g * hat(Vector3d::Unit(i))));
  v.tail(3) = 2.0 * g.col(i).cross(r_of(q));
  return v;
}

MatrixXd x_combo(const VectorXd& q, const Vector3d& a) {
  MatrixXd out = MatrixXd::Zero(12, 1);
  for (int i = 0; i < 3; ++i) out.col(0) += a(i) * x_field(q, i);
  return out;
}

}  // namespace

ModelDescriptor make_bmf_model(const std::map<std::string, double>& overrides) {
  std::map<std::string, double> params;
  auto P = std::make_shared<BmfParams>();
  P->inertia = Vector3d(model_detail::param(overrides, params, "I1", 1.0),
                        model_detail::param(overrides, params, "I2", 1.5),
                        model_detail::param(overrides, params, "I3", 2.0));
  P->m = model_detail::param(overrides, params, "m", 1.0);
  P->R0 = model_detail::param(overrides, params, "R0", 0.5);
  P->r3_margin = model_detail::param(overrides, params, "r3_margin", 1e-3);
  model_detail::reject_unknown(overrides, params, "bmf-sphere");
  if (P->inertia.minCoeff() <= 0 || P->m <= 0 || P->R0 <= 0)
    fail(ErrorCode::InvalidParameter, "bmf-sphere: I, m, R0 must be positive");

  auto sys = std::make_shared<System>();
  sys->name = "bmf-sphere";
  sys->q_chart_id = "bmf.q";
  sys->m_chart_id = "bmf.m";
  sys->nq_amb = 12;
  sys->nq = 5;
  sys->h = 2;
  sys->k = 1;
  sys->w = 2;

  sys->kappa = [P](const VectorXd& q) {
    MatrixXd kap = MatrixXd::Zero(12, 12);
    MatrixXd L = so3::left_mc_matrix(g_of(q));
    kap.topLeftCorner(9, 9) = L.transpose() * P->inertia.asDiagonal() * L;
    kap.bottomRightCorner(3, 3) = P->m * Eigen::Matrix3d::Identity();
    return kap;
  };
  sys->potential = ScalarField{[](const VectorXd&) { return 0.0; }, nullptr, kDefaultFdStep};
  sys->constraints = [](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    Vector3d r = r_of(q);
    MatrixXd L = so3::left_mc_matrix(g);
    MatrixXd eps = MatrixXd::Zero(3, 12);
    for (int i = 0; i < 3; ++i) {
      eps(i, 9 + i) = 1.0;
      for (int j = 0; j < 3; ++j) eps.row(i).head(9) -= 2.0 * (g.col(j).cross(r))(i) * L.row(j);
    }
    return eps;
  };
  sys->tangent_frame_q = [](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    Vector3d r = r_of(q);
    MatrixXd T = MatrixXd::Zero(12, 5);
    for (int i = 0; i < 3; ++i) T.col(i).head(9) = vec9(Eigen::Matrix3d(g * hat(Vector3d::Unit(i))));
    MatrixXd rt = orthonormal_columns(hat(r));
    T.block(9, 3, 3, 2) = rt;
    return T;
  };
  sys->q_admissible = [P](const VectorXd& q) {
    Vector3d n = n_of(*P, q);
    return std::abs(q(11)) > P->r3_margin && P->hfun(n).norm() > 1e-6 &&
           std::abs((P->A() * n).dot(P->En(n) * (P->A() * n))) > 1e-8;
  };
  sys->renormalize_q = [P](const VectorXd& q) {
    VectorXd out = q;
    so3::pack(out, 0, so3::polar(g_of(q)));
    out.tail(3) = P->R0 * r_of(q).normalized();
    return out;
  };

  sys->H_frame = [P](const VectorXd& q) {
    Vector3d n = n_of(*P, q);
    MatrixXd H(12, 2);
    H.col(0) = x_combo(q, n - P->gfun(n) * (P->A() * n));
    H.col(1) = x_combo(q, P->hfun(n));
    return H;
  };
  sys->S_frame = [P](const VectorXd& q) { return MatrixXd(x_combo(q, n_of(*P, q))); };
  sys->W_frame = [](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    Vector3d r = r_of(q);
    auto gen = [&](int i) {
      VectorXd v(12);
      v.head(9) = vec9(Eigen::Matrix3d(hat(Vector3d::Unit(i)) * g));
      v.tail(3) = Vector3d::Unit(i).cross(r);
      return v;
    };
    MatrixXd W(12, 2);
    W.col(0) = -gen(1) / q(11);
    W.col(1) = gen(0) / q(11);
    return W;
  };

  sys->action.lie_dim = 3;
  sys->action.generators = [](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    Vector3d r = r_of(q);
    MatrixXd G = MatrixXd::Zero(12, 3);
    for (int i = 0; i < 3; ++i) {
      G.col(i).head(9) = vec9(Eigen::Matrix3d(hat(Vector3d::Unit(i)) * g));
      G.col(i).tail(3) = Vector3d::Unit(i).cross(r);
    }
    return G;
  };
  sys->action.act = [](const VectorXd& u, const VectorXd& q) {
    Eigen::Matrix3d R = so3::expm(Vector3d(u));
    VectorXd out(12);
    so3::pack(out, 0, Eigen::Matrix3d(R * g_of(q)));
    out.tail(3) = R * r_of(q);
    return out;
  };
  sys->action.pushforward = [](const VectorXd& u, const VectorXd&, const VectorXd& v) {
    Eigen::Matrix3d R = so3::expm(Vector3d(u));
    VectorXd out(12);
    so3::pack(out, 0, Eigen::Matrix3d(R * unpack(v, 0)));
    out.tail(3) = R * v.tail(3);
    return out;
  };
  sys->action.inverse = [](const VectorXd& u) { return VectorXd(-u); };
  sys->action.sample = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> un(-1.0, 1.0);
    VectorXd u(3);
    u << un(rng), un(rng), un(rng);
    return u;
  };

  sys->gS_sections = [P](const VectorXd& q) { return MatrixXd(-r_of(q) / P->R0); };
  // No horizontal gauge symmetries: the conserved quantity is a D-momentum.
  sys->d_momenta.push_back(DMomentum{
      "F", [P](const VectorXd& q) { return VectorXd(x_combo(q, P->A() * n_of(*P, q)).col(0)); }});

  ModelDescriptor md;
  md.name = sys->name;
  md.system = sys;
  md.params = params;

  auto momenta_M = [sys](const VectorXd& xm) {
    VectorXd q = xm.head(12);
    RowVectorXd m = sys->covector_at(xm);
    Vector3d M;
    for (int i = 0; i < 3; ++i) M(i) = m.dot(x_field(q, i));
    return M;
  };

  md.mg = QuotientChart{"bmf.mg", 6,
                        [P, momenta_M](const VectorXd& xm) {
                          VectorXd z(6);
                          z << n_of(*P, xm.head(12)), momenta_M(xm);
                          return z;
                        },
                        [](const VectorXd& z) {
                          Vector3d n = z.head(3).normalized();
                          MatrixXd T = MatrixXd::Zero(6, 5);
                          T.topLeftCorner(3, 2) = orthonormal_columns(hat(n));
                          T.bottomRightCorner(3, 3).setIdentity();
                          return T;
                        },
                        nullptr};

  auto lift_q = [P](const Vector3d& n) {
    VectorXd q(12);
    so3::pack(q, 0, so3::from_third_row(Vector3d(-n)));
    q.tail(3) = P->R0 * Vector3d::UnitZ();
    return q;
  };

  md.leaf = [sys, P, lift_q](const VectorXd&) {
    return QuotientChart{"bmf.leaf0", 5,
                         [P](const VectorXd& xm) {
                           VectorXd z(5);
                           z << n_of(*P, xm.head(12)), xm(12), xm(13);
                           return z;
                         },
                         [](const VectorXd& z) {
                           Vector3d n = z.head(3).normalized();
                           MatrixXd T = MatrixXd::Zero(5, 4);
                           T.topLeftCorner(3, 2) = orthonormal_columns(hat(n));
                           T.bottomRightCorner(2, 2).setIdentity();
                           return T;
                         },
                         [sys, P, lift_q](const VectorXd& z) {
                           VectorXd q = lift_q(Vector3d(z.head(3).normalized()));
                           // Solve F = 0 for pY given (p1, p2): F is linear in p.
                           VectorXd xm(15);
                           xm << q, z(3), z(4), 0.0;
                           auto F = [&](double py) {
                             VectorXd x = xm;
                             x(14) = py;
                             return sys->d_momentum_value(sys->d_momenta[0], x);
                           };
                           double f0 = F(0.0), f1 = F(1.0);
                           xm(14) = -f0 / (f1 - f0);
                           return xm;
                         }};
  };

  md.qg = QuotientChart{"bmf.qg", 3,
                        [P](const VectorXd& q) { return VectorXd(n_of(*P, q)); },
                        [](const VectorXd& z) {
                          return MatrixXd(orthonormal_columns(hat(Vector3d(z.normalized()))));
                        },
                        [lift_q](const VectorXd& z) { return lift_q(Vector3d(z.head(3).normalized())); }};

  // Preset on the zero level of F (nonzero momenta in every block).
  {
    Vector3d n0 = Vector3d(0.25, -0.35, 0.9).normalized();
    QuotientChart leaf0 = md.leaf(VectorXd::Zero(1));
    VectorXd z(5);
    z << n0, 0.4, -0.25;
    VectorXd xm0 = leaf0.lift(z);
    md.preset.q = xm0.head(12);
    md.preset.p = xm0.tail(3);
  }

  md.sample_state = [P](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto momentum = [&] {
      double v = u(rng);
      return v + (v >= 0 ? 0.15 : -0.15);
    };
    PresetState st;
    st.q = VectorXd(12);
    while (true) {
      Vector3d axis(u(rng), u(rng), u(rng));
      Eigen::Matrix3d g = so3::expm(Vector3d(1.3 * axis));
      Vector3d r = P->R0 * Vector3d(u(rng), u(rng), u(rng)).normalized();
      if (std::abs(r(2)) < 0.2 * P->R0) continue;
      so3::pack(st.q, 0, g);
      st.q.tail(3) = r;
      Vector3d n = -g.transpose() * r / P->R0;
      if (P->hfun(n).norm() < 1e-3) continue;
      break;
    }
    st.p = (VectorXd(3) << momentum(), momentum(), momentum()).finished();
    return st;
  };

  md.reference = [sys, P, momenta_M](const std::string& expr, const VectorXd& point) -> MatrixXd {
    using model_detail::wedge_cols;
    using model_detail::wedge_rows;
    if (expr == "bmf.rhs") {
      // E_n Omega-dot = (E_n Omega) x Omega - m r0^2 n x (Omega x ndot), ndot = Omega x n.
      VectorXd q = point.head(12);
      Vector3d n = n_of(*P, q);
      AdaptedBasis ab = sys->basis_at(q);
      VectorXd v = ab.gram_D.llt().solve(point.tail(3));
      Vector3d omega = so3::left_mc_matrix(g_of(q)) * (ab.D() * v).head(9);
      Vector3d ndot = omega.cross(n);
      Vector3d rhs = (P->En(n) * omega).cross(omega) - P->mr2() * n.cross(omega.cross(ndot));
      return MatrixXd(P->En(n).fullPivLu().solve(rhs));
    }
    if (expr == "bmf.g_h") {
      Vector3d n = point.head(3).normalized();
      VectorXd out(4);
      out << P->gfun(n), P->hfun(n);
      return MatrixXd(out);
    }
    if (expr == "bmf.pired") {
      // (e_i x n along d/dn) ^ dM_i - cyclic[(I Omega)_1 dM_2 ^ dM_3] on (n, M).
      Vector3d n = point.head(3);
      Vector3d M = point.tail(3);
      Vector3d omega = P->En(n).fullPivLu().solve(M);
      Vector3d iw = P->inertia.asDiagonal() * omega;
      MatrixXd out = MatrixXd::Zero(6, 6);
      for (int i = 0; i < 3; ++i) {
        VectorXd a = VectorXd::Zero(6);
        a.head(3) = Vector3d::Unit(i).cross(n);
        out += wedge_cols(a, VectorXd::Unit(6, 3 + i));
      }
      out -= iw(0) * wedge_cols(VectorXd::Unit(6, 4), VectorXd::Unit(6, 5));
      out -= iw(1) * wedge_cols(VectorXd::Unit(6, 5), VectorXd::Unit(6, 3));
      out -= iw(2) * wedge_cols(VectorXd::Unit(6, 3), VectorXd::Unit(6, 4));
      return out;
    }
    if (expr == "bmf.xred") {
      Vector3d n = point.head(3);
      Vector3d M = point.tail(3);
      Vector3d omega = P->En(n).fullPivLu().solve(M);
      VectorXd out(6);
      out << -n.cross(omega), M.cross(omega);
      return MatrixXd(out);
    }
    if (expr == "bmf.H0red") {
      Vector3d n = point.head(3).normalized();
      Vector3d u1 = n - P->gfun(n) * (P->A() * n);
      Vector3d u2 = P->hfun(n);
      double k11 = u1.dot(P->En(n) * u1), k22 = u2.dot(P->En(n) * u2);
      MatrixXd out(1, 1);
      out(0, 0) = 0.5 * (point(3) * point(3) / k11 + point(4) * point(4) / k22);
      return out;
    }
    if (expr == "bmf.F_chart") {
      // (pY - p1) / g(n) in the adapted chart.
      Vector3d n = n_of(*P, point.head(12));
      MatrixXd out(1, 1);
      out(0, 0) = (point(14) - point(12)) / P->gfun(n);
      return out;
    }
    if (expr == "bmf.omega_tilde") {
      // omega_can - Bhat on the zero-leaf chart (n, p1, p2):
      // sigma~^j ^ dp_j - p_j d sigma~^j - (pY C12^Y + p_a C12^a) sigma~^1 ^ sigma~^2.
      Vector3d n = point.head(3).normalized();
      VectorXd q(12);
      so3::pack(q, 0, so3::from_third_row(Vector3d(-n)));
      q.tail(3) = P->R0 * Vector3d::UnitZ();
      auto sigma_rows = [sys, P](const VectorXd& z5) {
        Vector3d nn = z5.head(3).normalized();
        VectorXd qq(12);
        so3::pack(qq, 0, so3::from_third_row(Vector3d(-nn)));
        qq.tail(3) = P->R0 * Vector3d::UnitZ();
        AdaptedBasis ab = sys->basis_at(qq);
        MatrixXd Jr = fd_jacobian(
            [P](const VectorXd& x) { return VectorXd(n_of(*P, x)); }, qq, sys->fd_step);
        MatrixXd pushed = Jr * ab.H();  // 3 x 2
        return MatrixXd(dual_coframe(pushed));  // 2 x 3
      };
      MatrixXd sig = sigma_rows(point);
      RowVectorXd s1 = RowVectorXd::Zero(5), s2 = RowVectorXd::Zero(5);
      s1.head(3) = sig.row(0);
      s2.head(3) = sig.row(1);
      MatrixXd out = wedge_rows(s1, RowVectorXd::Unit(5, 3)) + wedge_rows(s2, RowVectorXd::Unit(5, 4));
      for (int j = 0; j < 2; ++j) {
        OneFormField row{[&sigma_rows, j](const VectorXd& z5) {
                           RowVectorXd r = RowVectorXd::Zero(5);
                           r.head(3) = sigma_rows(z5).row(j);
                           return r;
                         },
                         sys->fd_step};
        out -= point(3 + j) * exterior_derivative_at(row, {"bmf.leaf0", point});
      }
      AdaptedBasis ab = sys->basis_at(q);
      std::vector<MatrixXd> C = sys->structure_functions(ab);
      VectorXd xm(15);
      xm << q, point(3), point(4), 0.0;
      auto F = [&](double py) {
        VectorXd x = xm;
        x(14) = py;
        return sys->d_momentum_value(sys->d_momenta[0], x);
      };
      double f0 = F(0.0), f1 = F(1.0);
      xm(14) = -f0 / (f1 - f0);  // F = 0 determines pY
      VectorXd pa = sys->p_w_at(xm);
      double coef = xm(14) * C[2](0, 1) + pa(0) * C[3](0, 1) + pa(1) * C[4](0, 1);
      out -= coef * wedge_rows(s1, s2);
      return out;
    }
    fail(ErrorCode::UnknownExpression, "bmf-sphere: " + expr);
  };

  return md;
}

}  // namespace nhred
