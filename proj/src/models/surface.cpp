#include <array>
#include <mutex>
#include <sstream>

#include "model_util.hpp"

namespace nhred {

using so3::hat;
using so3::unpack;
using so3::vec9;

namespace {

struct SurfParams {
  double kappa0 = 0.1, m = 1.0, R = 0.3, I = 0.1, a_g = 9.8;
  double tau_min = 0.25, tau_max = 4.0, tau0 = 1.0;

  [[nodiscard]] std::string key() const {
    std::ostringstream os;
    os.precision(17);
    os << kappa0 << "|" << m << "|" << R << "|" << I << "|" << a_g << "|" << tau_min << "|" << tau_max;
    return os.str();
  }
};

/// Tabulated solutions of the gauge-momentum coefficient system on a fixed
/// tau grid, with the extracted momentum-equation coefficients.
struct FTable {
  double lo = 0, h = 0;
  std::vector<std::array<double, 4>> f;   // f1Y, f1n, f2Y, f2n per node
  std::vector<std::array<double, 2>> rr;  // R12, R21 per node (diagnostics)

  [[nodiscard]] Eigen::Matrix2d eval(double tau) const {
    // Degree-7 Lagrange interpolation on 8 centered nodes.
    auto n = static_cast<Eigen::Index>(f.size());
    double s = (tau - lo) / h;
    Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(s)) - 3;
    i0 = std::max<Eigen::Index>(0, std::min(i0, n - 8));
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (Eigen::Index a = 0; a < 8; ++a) {
      double w = 1.0;
      for (Eigen::Index b = 0; b < 8; ++b)
        if (b != a) w *= (s - static_cast<double>(i0 + b)) / static_cast<double>(a - b);
      const auto& fa = f[static_cast<size_t>(i0 + a)];
      out(0, 0) += w * fa[0];
      out(0, 1) += w * fa[1];
      out(1, 0) += w * fa[2];
      out(1, 1) += w * fa[3];
    }
    return out;  // rows are (f_i^Y, f_i^n)
  }

  [[nodiscard]] Eigen::Vector2d eval_rr(double tau) const {
    auto n = static_cast<Eigen::Index>(rr.size());
    double s = (tau - lo) / h;
    Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(s)) - 3;
    i0 = std::max<Eigen::Index>(0, std::min(i0, n - 8));
    Eigen::Vector2d out = Eigen::Vector2d::Zero();
    for (Eigen::Index a = 0; a < 8; ++a) {
      double w = 1.0;
      for (Eigen::Index b = 0; b < 8; ++b)
        if (b != a) w *= (s - static_cast<double>(i0 + b)) / static_cast<double>(a - b);
      const auto& ra = rr[static_cast<size_t>(i0 + a)];
      out(0) += w * ra[0];
      out(1) += w * ra[1];
    }
    return out;
  }
};

Vector3d normal_at(const SurfParams& P, double x, double y) {
  return Vector3d(-P.kappa0 * x, -P.kappa0 * y, 1.0).normalized();
}

// Chart layout: q = [x; y; g (9 column-major)], momenta (p0, pY, pn) against
// the dual of {X_0, Y, Y_n}.
Eigen::Matrix3d g_of(const VectorXd& q) { return unpack(q, 2); }

VectorXd yx_field(const SurfParams& P, const VectorXd& q) {
  Vector3d n = normal_at(P, q(0), q(1));
  Eigen::Matrix3d g = g_of(q);
  VectorXd v = VectorXd::Zero(11);
  v(0) = 1.0;
  v.tail(9) = vec9(Eigen::Matrix3d((n(1) * hat(n) - hat(Vector3d::UnitY())) * g)) / (P.R * n(2));
  return v;
}

VectorXd yy_field(const SurfParams& P, const VectorXd& q) {
  Vector3d n = normal_at(P, q(0), q(1));
  Eigen::Matrix3d g = g_of(q);
  VectorXd v = VectorXd::Zero(11);
  v(1) = 1.0;
  v.tail(9) = -vec9(Eigen::Matrix3d((n(0) * hat(n) - hat(Vector3d::UnitX())) * g)) / (P.R * n(2));
  return v;
}

VectorXd yn_field(const SurfParams& P, const VectorXd& q) {
  Vector3d n = normal_at(P, q(0), q(1));
  VectorXd v = VectorXd::Zero(11);
  v.tail(9) = vec9(Eigen::Matrix3d(hat(n) * g_of(q)));
  return v;
}

std::shared_ptr<System> build_system(const std::shared_ptr<SurfParams>& P);

/// Extracts the momentum-equation coefficients along X_0 at a reference lift:
/// dpY(X_nh) = -v^0 R21 pn and dpn(X_nh) = -v^0 R12 pY.
Eigen::Vector2d extract_rr(const System& sys, double tau) {
  VectorXd q = VectorXd::Zero(11);
  q(0) = std::sqrt(tau);
  so3::pack(q, 2, Eigen::Matrix3d::Identity());
  AdaptedBasis ab = sys.basis_at(q);
  double k00 = ab.gram_D(0, 0);
  VectorXd xm(14);
  xm << q, 1.0, 0.0, 1.0;
  double r21 = -k00 * sys.x_nh_at(xm)(12);
  xm.tail(3) << 1.0, 1.0, 0.0;
  double r12 = -k00 * sys.x_nh_at(xm)(13);
  return {r12, r21};
}

std::shared_ptr<FTable> build_table(const std::shared_ptr<SurfParams>& P) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<FTable>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(P->key());
    if (it != cache.end()) return it->second;
  }
  auto sys = build_system(P);  // table-free system is enough for x_nh
  auto table = std::make_shared<FTable>();
  const int N = 4096;
  table->lo = 0.85 * P->tau_min;
  double hi = 1.15 * P->tau_max;
  table->h = (hi - table->lo) / N;
  table->f.resize(N + 1);
  table->rr.resize(N + 1);

  std::vector<Eigen::Vector2d> rr_nodes(N + 1), rr_half(N);
  for (int i = 0; i <= N; ++i) {
    rr_nodes[i] = extract_rr(*sys, table->lo + i * table->h);
    table->rr[static_cast<size_t>(i)] = {rr_nodes[i](0), rr_nodes[i](1)};
  }
  for (int i = 0; i < N; ++i) rr_half[i] = extract_rr(*sys, table->lo + (i + 0.5) * table->h);

  auto rhs = [&](double tau, const Eigen::Vector2d& rr, const Eigen::Vector4d& y) {
    Eigen::Vector4d d;
    d(0) = rr(0) * y(1) / (2.0 * tau);  // f^Y' = R12 f^n / (2 tau)
    d(1) = rr(1) * y(0) / (2.0 * tau);
    d(2) = rr(0) * y(3) / (2.0 * tau);
    d(3) = rr(1) * y(2) / (2.0 * tau);
    return d;
  };

  int i0 = static_cast<int>(std::lround((P->tau0 - table->lo) / table->h));
  Eigen::Vector4d y;
  y << 1, 0, 0, 1;
  auto store = [&](int i, const Eigen::Vector4d& v) {
    table->f[static_cast<size_t>(i)] = {v(0), v(1), v(2), v(3)};
  };
  store(i0, y);
  // forward march
  Eigen::Vector4d yf = y;
  for (int i = i0; i < N; ++i) {
    double tau = table->lo + i * table->h, h = table->h;
    Eigen::Vector4d k1 = rhs(tau, rr_nodes[i], yf);
    Eigen::Vector4d k2 = rhs(tau + 0.5 * h, rr_half[i], yf + 0.5 * h * k1);
    Eigen::Vector4d k3 = rhs(tau + 0.5 * h, rr_half[i], yf + 0.5 * h * k2);
    Eigen::Vector4d k4 = rhs(tau + h, rr_nodes[i + 1], yf + h * k3);
    yf += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    store(i + 1, yf);
  }
  // backward march
  Eigen::Vector4d yb = y;
  for (int i = i0; i > 0; --i) {
    double tau = table->lo + i * table->h, h = -table->h;
    Eigen::Vector4d k1 = rhs(tau, rr_nodes[i], yb);
    Eigen::Vector4d k2 = rhs(tau + 0.5 * h, rr_half[i - 1], yb + 0.5 * h * k1);
    Eigen::Vector4d k3 = rhs(tau + 0.5 * h, rr_half[i - 1], yb + 0.5 * h * k2);
    Eigen::Vector4d k4 = rhs(tau + h, rr_nodes[i - 1], yb + h * k3);
    yb += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    store(i - 1, yb);
  }
  // Independence of the two solutions across the band.
  for (int i = 0; i <= N; i += N / 16) {
    const auto& fa = table->f[static_cast<size_t>(i)];
    if (std::abs(fa[0] * fa[3] - fa[1] * fa[2]) < 1e-8)
      fail(ErrorCode::HypothesisFailed, "ball-on-surface: gauge-momentum solutions degenerate");
  }
  std::lock_guard<std::mutex> lock(mu);
  cache[P->key()] = table;
  return table;
}

std::shared_ptr<System> build_system(const std::shared_ptr<SurfParams>& P) {
  auto sys = std::make_shared<System>();
  sys->name = "ball-on-surface";
  sys->q_chart_id = "surface.q";
  sys->m_chart_id = "surface.m";
  sys->nq_amb = 11;
  sys->nq = 5;
  sys->h = 1;
  sys->k = 2;
  sys->w = 2;

  sys->kappa = [P](const VectorXd& q) {
    Vector3d n = normal_at(*P, q(0), q(1));
    MatrixXd kap = MatrixXd::Zero(11, 11);
    double c = P->m / (n(2) * n(2));
    kap(0, 0) = c * (1.0 - n(1) * n(1));
    kap(1, 1) = c * (1.0 - n(0) * n(0));
    kap(0, 1) = kap(1, 0) = c * n(0) * n(1);
    MatrixXd Rm = so3::right_mc_matrix(g_of(q));
    kap.bottomRightCorner(9, 9) = P->I * (Rm.transpose() * Rm);
    return kap;
  };
  sys->potential = ScalarField{[P](const VectorXd& q) {
                                 double tau = q(0) * q(0) + q(1) * q(1);
                                 return P->m * P->a_g * 0.5 * P->kappa0 * tau;
                               },
                               nullptr, kDefaultFdStep};
  sys->constraints = [P](const VectorXd& q) {
    Vector3d n = normal_at(*P, q(0), q(1));
    MatrixXd Rm = so3::right_mc_matrix(g_of(q));
    MatrixXd eps = MatrixXd::Zero(2, 11);
    eps(0, 0) = 1.0;
    eps.row(0).tail(9) = -P->R * (n(1) * Rm.row(2) - n(2) * Rm.row(1));
    eps(1, 1) = 1.0;
    eps.row(1).tail(9) = -P->R * (n(2) * Rm.row(0) - n(0) * Rm.row(2));
    return eps;
  };
  sys->tangent_frame_q = [](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    MatrixXd T = MatrixXd::Zero(11, 5);
    T(0, 0) = 1.0;
    T(1, 1) = 1.0;
    for (int i = 0; i < 3; ++i) T.col(2 + i).tail(9) = vec9(Eigen::Matrix3d(hat(Vector3d::Unit(i)) * g));
    return T;
  };
  sys->q_admissible = [P](const VectorXd& q) {
    double tau = q(0) * q(0) + q(1) * q(1);
    return tau > P->tau_min && tau < P->tau_max;
  };
  sys->renormalize_q = [](const VectorXd& q) {
    VectorXd out = q;
    so3::pack(out, 2, so3::polar(g_of(q)));
    return out;
  };

  sys->H_frame = [P](const VectorXd& q) {
    return MatrixXd(q(0) * yx_field(*P, q) + q(1) * yy_field(*P, q));
  };
  sys->S_frame = [P](const VectorXd& q) {
    MatrixXd S(11, 2);
    S.col(0) = -q(1) * yx_field(*P, q) + q(0) * yy_field(*P, q);
    S.col(1) = yn_field(*P, q);
    return S;
  };
  sys->W_frame = [P](const VectorXd& q) {
    Vector3d n = normal_at(*P, q(0), q(1));
    Eigen::Matrix3d g = g_of(q);
    MatrixXd W = MatrixXd::Zero(11, 2);
    W.col(0).tail(9) = vec9(Eigen::Matrix3d((hat(Vector3d::UnitY()) - n(1) * hat(n)) * g)) / (P->R * n(2));
    W.col(1).tail(9) = -vec9(Eigen::Matrix3d((hat(Vector3d::UnitX()) - n(0) * hat(n)) * g)) / (P->R * n(2));
    return W;
  };

  sys->action.lie_dim = 4;  // planar rotation + body rotations
  sys->action.generators = [](const VectorXd& q) {
    Eigen::Matrix3d g = g_of(q);
    MatrixXd G = MatrixXd::Zero(11, 4);
    G(0, 0) = -q(1);
    G(1, 0) = q(0);
    G.col(0).tail(9) = vec9(Eigen::Matrix3d(hat(Vector3d::UnitZ()) * g));
    for (int i = 0; i < 3; ++i) G.col(1 + i).tail(9) = vec9(Eigen::Matrix3d(g * hat(Vector3d::Unit(i))));
    return G;
  };
  sys->action.act = [](const VectorXd& gp, const VectorXd& q) {
    double c = std::cos(gp(0)), s = std::sin(gp(0));
    Eigen::Matrix3d Rt = so3::expm(gp(0) * Vector3d::UnitZ());
    Eigen::Matrix3d Rb = so3::expm(Vector3d(gp.tail(3)));
    VectorXd out = q;
    out(0) = c * q(0) - s * q(1);
    out(1) = s * q(0) + c * q(1);
    so3::pack(out, 2, Eigen::Matrix3d(Rt * g_of(q) * Rb));
    return out;
  };
  sys->action.pushforward = [](const VectorXd& gp, const VectorXd&, const VectorXd& v) {
    double c = std::cos(gp(0)), s = std::sin(gp(0));
    Eigen::Matrix3d Rt = so3::expm(gp(0) * Vector3d::UnitZ());
    Eigen::Matrix3d Rb = so3::expm(Vector3d(gp.tail(3)));
    VectorXd out = v;
    out(0) = c * v(0) - s * v(1);
    out(1) = s * v(0) + c * v(1);
    so3::pack(out, 2, Eigen::Matrix3d(Rt * unpack(v, 2) * Rb));
    return out;
  };
  sys->action.inverse = [](const VectorXd& gp) {
    VectorXd inv(4);
    inv << -gp(0), -gp(1), -gp(2), -gp(3);
    return inv;
  };
  sys->action.sample = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd g(4);
    g << 3.0 * u(rng), u(rng), u(rng), u(rng);
    return g;
  };

  sys->gS_sections = [sys, P](const VectorXd& q) {
    MatrixXd gens = sys->action.generators(q);
    MatrixXd targets(11, 2);
    targets.col(0) = -q(1) * yx_field(*P, q) + q(0) * yy_field(*P, q);
    targets.col(1) = yn_field(*P, q);
    MatrixXd out(4, 2);
    out.col(0) = solve_in_span(gens, targets.col(0));
    out.col(1) = solve_in_span(gens, targets.col(1));
    return out;
  };
  return sys;
}

}  // namespace

ModelDescriptor make_surface_model(const std::map<std::string, double>& overrides) {
  std::map<std::string, double> params;
  auto P = std::make_shared<SurfParams>();
  P->kappa0 = model_detail::param(overrides, params, "kappa0", 0.1);
  P->m = model_detail::param(overrides, params, "m", 1.0);
  P->R = model_detail::param(overrides, params, "R", 0.3);
  P->I = model_detail::param(overrides, params, "I", 0.1);
  P->a_g = model_detail::param(overrides, params, "a_g", 9.8);
  P->tau_min = model_detail::param(overrides, params, "tau_min", 0.25);
  P->tau_max = model_detail::param(overrides, params, "tau_max", 4.0);
  P->tau0 = model_detail::param(overrides, params, "tau0", 1.0);
  model_detail::reject_unknown(overrides, params, "ball-on-surface");
  if (P->kappa0 <= 0 || P->kappa0 > 1.0 / P->R)
    fail(ErrorCode::InvalidParameter, "ball-on-surface: profile curvature kappa0 must lie in (0, 1/R]");
  if (P->m <= 0 || P->R <= 0 || P->I <= 0)
    fail(ErrorCode::InvalidParameter, "ball-on-surface: m, R, I must be positive");
  if (P->tau_min <= 0 || P->tau_max <= P->tau_min || P->tau0 <= P->tau_min || P->tau0 >= P->tau_max)
    fail(ErrorCode::InvalidParameter, "ball-on-surface: need 0 < tau_min < tau0 < tau_max");

  auto sys = build_system(P);
  {
    // The reference splitting must be kappa-orthogonal for the extraction.
    VectorXd q = VectorXd::Zero(11);
    q(0) = std::sqrt(P->tau0);
    so3::pack(q, 2, Eigen::Matrix3d::Identity());
    AdaptedBasis ab = sys->basis_at(q);
    if (std::abs(ab.gram_D(0, 1)) + std::abs(ab.gram_D(0, 2)) > 1e-9)
      fail(ErrorCode::HypothesisFailed, "ball-on-surface: H is not kappa-orthogonal to S");
  }
  auto table = build_table(P);

  sys->hgs_sections = [sys, table](const VectorXd& q) {
    double tau = q(0) * q(0) + q(1) * q(1);
    Eigen::Matrix2d F = table->eval(tau);  // rows (f_i^Y, f_i^n)
    MatrixXd base = sys->gS_sections(q);   // columns eta, eta_n
    return MatrixXd(base * F.transpose());
  };

  ModelDescriptor md;
  md.name = sys->name;
  md.system = sys;
  md.params = params;

  md.mg = QuotientChart{"surface.mg", 4,
                        [](const VectorXd& xm) {
                          VectorXd z(4);
                          z << xm(0) * xm(0) + xm(1) * xm(1), xm(11), xm(12), xm(13);
                          return z;
                        },
                        [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(4, 4)); },
                        [](const VectorXd& z) {
                          VectorXd xm(14);
                          xm.setZero();
                          xm(0) = std::sqrt(z(0));
                          so3::pack(xm, 2, Eigen::Matrix3d::Identity());
                          xm.tail(3) = z.tail(3);
                          return xm;
                        }};

  md.leaf = [table](const VectorXd& level) {
    VectorXd c = level;
    return QuotientChart{"surface.leaf", 2,
                         [](const VectorXd& xm) {
                           VectorXd z(2);
                           z << -0.5 * std::log(xm(0) * xm(0) + xm(1) * xm(1)), xm(11);
                           return z;
                         },
                         [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(2, 2)); },
                         [table, c](const VectorXd& z) {
                           double tau = std::exp(-2.0 * z(0));
                           VectorXd xm(14);
                           xm.setZero();
                           xm(0) = std::sqrt(tau);
                           so3::pack(xm, 2, Eigen::Matrix3d::Identity());
                           xm(11) = z(1);
                           Eigen::Matrix2d F = table->eval(tau);
                           Eigen::Vector2d pyn = F.fullPivLu().solve(Eigen::Vector2d(c(0), c(1)));
                           xm(12) = pyn(0);
                           xm(13) = pyn(1);
                           return xm;
                         }};
  };

  md.qg = QuotientChart{"surface.qg", 1,
                        [](const VectorXd& q) {
                          VectorXd z(1);
                          z << q(0) * q(0) + q(1) * q(1);
                          return z;
                        },
                        [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(1, 1)); },
                        [](const VectorXd& z) {
                          VectorXd q = VectorXd::Zero(11);
                          q(0) = std::sqrt(z(0));
                          so3::pack(q, 2, Eigen::Matrix3d::Identity());
                          return q;
                        }};

  md.preset.q = VectorXd::Zero(11);
  md.preset.q(0) = 0.9;
  md.preset.q(1) = 0.5;
  so3::pack(md.preset.q, 2, so3::expm(Vector3d(0.3, -0.2, 0.4)));
  md.preset.p = (VectorXd(3) << 0.5, 0.3, -0.4).finished();

  md.sample_state = [P](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto momentum = [&] {
      double v = u(rng);
      return v + (v >= 0 ? 0.15 : -0.15);
    };
    PresetState st;
    st.q = VectorXd::Zero(11);
    double lo = std::sqrt(1.1 * P->tau_min), hi = std::sqrt(0.9 * P->tau_max);
    double rad = lo + 0.5 * (u(rng) + 1.0) * (hi - lo);
    double ang = 3.0 * u(rng);
    st.q(0) = rad * std::cos(ang);
    st.q(1) = rad * std::sin(ang);
    so3::pack(st.q, 2, so3::expm(Vector3d(u(rng), u(rng), u(rng))));
    st.p = (VectorXd(3) << momentum(), momentum(), momentum()).finished();
    return st;
  };

  md.reference = [sys, P, table](const std::string& expr, const VectorXd& point) -> MatrixXd {
    using model_detail::wedge_cols;
    if (expr == "surface.pib") {
      VectorXd q = point.head(11);
      double tau = q(0) * q(0) + q(1) * q(1);
      Eigen::Vector2d rr = table->eval_rr(tau);  // (R12, R21)
      AdaptedBasis ab = sys->basis_at(q);
      auto lift = [&](const VectorXd& base) {
        VectorXd v = VectorXd::Zero(14);
        v.head(11) = base;
        return v;
      };
      MatrixXd out = MatrixXd::Zero(14, 14);
      for (int a = 0; a < 3; ++a)
        out += wedge_cols(lift(ab.frame.col(a)), VectorXd::Unit(14, 11 + a));
      out += point(13) * rr(1) * wedge_cols(VectorXd::Unit(14, 11), VectorXd::Unit(14, 12));
      out += point(12) * rr(0) * wedge_cols(VectorXd::Unit(14, 11), VectorXd::Unit(14, 13));
      return out;
    }
    if (expr == "surface.omegaBmu") {
      // Pair-convention reduced form on the (tau-tilde, p0) leaf chart.
      MatrixXd W(2, 2);
      W << 0, -1, 1, 0;  // dp0 ^ dtau-tilde
      return W;
    }
    if (expr == "surface.R") {
      Eigen::Vector2d rr = table->eval_rr(point(0));
      return MatrixXd(rr);
    }
    fail(ErrorCode::UnknownExpression, "ball-on-surface: " + expr);
  };

  return md;
}

}  // namespace nhred
