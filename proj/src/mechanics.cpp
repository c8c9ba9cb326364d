#include "nhred/mechanics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace nhred {

namespace {

/// Directional central difference of a matrix-valued map along v.
MatrixXd directional_diff(const std::function<MatrixXd(const VectorXd&)>& f, const VectorXd& q,
                          const VectorXd& v, double step) {
  double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  double vn = v.norm();
  if (vn == 0.0) return MatrixXd::Zero(f(q).rows(), f(q).cols());
  double t = step * scale / vn;
  return (f(q + t * v) - f(q - t * v)) / (2.0 * t);
}

}  // namespace

ChartPoint System::m_point(const VectorXd& q, const VectorXd& p) const {
  VectorXd xm(m_dim());
  xm << q, p;
  return {m_chart_id, xm};
}

VectorXd System::renormalize_state(const VectorXd& xm) const {
  VectorXd out = xm;
  out.head(nq_amb) = renormalize_q(q_of(xm));
  return out;
}

AdaptedBasis System::basis_at(const VectorXd& q) const {
  AdaptedBasis ab;
  ab.q = q;
  ab.tangent = tangent_frame_q(q);
  MatrixXd Hm = H_frame(q), Sm = S_frame(q), Wm = W_frame(q);
  ab.h = Hm.cols();
  ab.k = Sm.cols();
  ab.w = Wm.cols();
  ab.frame.resize(nq_amb, ab.h + ab.k + ab.w);
  ab.frame << Hm, Sm, Wm;
  if (ab.frame.cols() != nq)
    fail(ErrorCode::DimensionAssumptionFailed, "splitting frame has " + std::to_string(ab.frame.cols()) +
                                                   " columns for a " + std::to_string(nq) + "-dim manifold");
  MatrixXd Tplus = dual_coframe(ab.tangent);
  MatrixXd Bi = Tplus * ab.frame;  // nq x nq
  Eigen::FullPivLU<MatrixXd> lu(Bi);
  lu.setThreshold(1e-10);
  if (lu.rank() != nq)
    fail(ErrorCode::DimensionAssumptionFailed, "splitting frame is not a basis of T_qQ");
  ab.coframe = lu.inverse() * Tplus;
  MatrixXd kap = kappa(q);
  ab.gram = ab.frame.transpose() * kap * ab.frame;
  ab.gram = 0.5 * (ab.gram + ab.gram.transpose());
  ab.gram_D = ab.gram.topLeftCorner(ab.nd(), ab.nd());
  Eigen::LLT<MatrixXd> llt(ab.gram_D);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::DegenerateMetric, "kinetic metric is not positive definite on D");
  return ab;
}

AdaptedBasis System::orth_basis_at(const VectorXd& q) const {
  AdaptedBasis disp = basis_at(q);
  MatrixXd kap = kappa(q);
  MatrixXd S = disp.S();
  MatrixXd gramS = S.transpose() * kap * S;
  Eigen::LLT<MatrixXd> llt(gramS);
  auto project_off_S = [&](const MatrixXd& cols) {
    return MatrixXd(cols - S * llt.solve(S.transpose() * kap * cols));
  };
  AdaptedBasis ab = disp;
  ab.frame.leftCols(disp.h) = project_off_S(disp.H());
  ab.frame.rightCols(disp.w) = project_off_S(disp.W());
  MatrixXd Tplus = dual_coframe(ab.tangent);
  Eigen::FullPivLU<MatrixXd> lu(Tplus * ab.frame);
  lu.setThreshold(1e-10);
  if (lu.rank() != nq)
    fail(ErrorCode::DimensionAssumptionFailed, "orthogonal splitting frame degenerate");
  ab.coframe = lu.inverse() * Tplus;
  ab.gram = ab.frame.transpose() * kap * ab.frame;
  ab.gram = 0.5 * (ab.gram + ab.gram.transpose());
  ab.gram_D = ab.gram.topLeftCorner(ab.nd(), ab.nd());
  return ab;
}

AdaptedBasis System::hgs_basis_at(const VectorXd& q) const {
  if (!hgs_sections) fail(ErrorCode::HypothesisFailed, name + ": no horizontal gauge symmetries declared");
  AdaptedBasis ab = basis_at(q);
  MatrixXd xi = hgs_sections(q);  // lie x k
  ab.frame.middleCols(ab.h, ab.k) = action.generators(q) * xi;
  MatrixXd Tplus = dual_coframe(ab.tangent);
  Eigen::FullPivLU<MatrixXd> lu(Tplus * ab.frame);
  lu.setThreshold(1e-10);
  if (lu.rank() != nq) fail(ErrorCode::DegenerateInput, "hgs basis degenerate");
  ab.coframe = lu.inverse() * Tplus;
  MatrixXd kap = kappa(q);
  ab.gram = ab.frame.transpose() * kap * ab.frame;
  ab.gram = 0.5 * (ab.gram + ab.gram.transpose());
  ab.gram_D = ab.gram.topLeftCorner(ab.nd(), ab.nd());
  return ab;
}

AdaptedBasis System::orth_hgs_basis_at(const VectorXd& q) const {
  if (!hgs_sections) fail(ErrorCode::HypothesisFailed, name + ": no horizontal gauge symmetries declared");
  AdaptedBasis ab = orth_basis_at(q);
  ab.frame.middleCols(ab.h, ab.k) = action.generators(q) * hgs_sections(q);
  MatrixXd Tplus = dual_coframe(ab.tangent);
  Eigen::FullPivLU<MatrixXd> lu(Tplus * ab.frame);
  lu.setThreshold(1e-10);
  if (lu.rank() != nq) fail(ErrorCode::DegenerateInput, "orth hgs basis degenerate");
  ab.coframe = lu.inverse() * Tplus;
  MatrixXd kap = kappa(q);
  ab.gram = ab.frame.transpose() * kap * ab.frame;
  ab.gram = 0.5 * (ab.gram + ab.gram.transpose());
  ab.gram_D = ab.gram.topLeftCorner(ab.nd(), ab.nd());
  return ab;
}

std::vector<MatrixXd> System::structure_functions(const AdaptedBasis& ab) const {
  const Eigen::Index n = ab.frame.cols();
  // Frame field matching ab's construction at nearby points.
  std::function<MatrixXd(const VectorXd&)> frame_field;
  // Identify which basis this is by comparing at q (cheap heuristic: rebuild all three).
  // Caller-supplied bases are always one of basis/orth/hgs at q; rebuild accordingly.
  auto match = [&](const AdaptedBasis& other) {
    return (other.frame - ab.frame).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, ab.frame.cwiseAbs().maxCoeff());
  };
  if (match(basis_at(ab.q)))
    frame_field = [this](const VectorXd& qq) { return basis_at(qq).frame; };
  else if (match(orth_basis_at(ab.q)))
    frame_field = [this](const VectorXd& qq) { return orth_basis_at(qq).frame; };
  else if (hgs_sections && match(hgs_basis_at(ab.q)))
    frame_field = [this](const VectorXd& qq) { return hgs_basis_at(qq).frame; };
  else if (hgs_sections && match(orth_hgs_basis_at(ab.q)))
    frame_field = [this](const VectorXd& qq) { return orth_hgs_basis_at(qq).frame; };
  else
    fail(ErrorCode::DegenerateInput, "structure_functions: unrecognized adapted basis");

  std::vector<MatrixXd> dirs(n);
  for (Eigen::Index a = 0; a < n; ++a)
    dirs[a] = directional_diff(frame_field, ab.q, ab.frame.col(a), fd_step);
  std::vector<MatrixXd> C(n, MatrixXd::Zero(n, n));
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index c = b + 1; c < n; ++c) {
      VectorXd bracket = dirs[b].col(c) - dirs[c].col(b);  // [E_b, E_c]
      VectorXd comps = ab.coframe * bracket;
      for (Eigen::Index a = 0; a < n; ++a) {
        C[a](b, c) = comps(a);
        C[a](c, b) = -comps(a);
      }
    }
  return C;
}

RowVectorXd System::covector_at(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  VectorXd p = p_of(xm);
  VectorXd v = ab.gram_D.llt().solve(p);
  VectorXd pw = ab.gram.bottomLeftCorner(ab.w, ab.nd()) * v;
  RowVectorXd m = RowVectorXd::Zero(nq_amb);
  for (Eigen::Index A = 0; A < ab.nd(); ++A) m += p(A) * ab.coframe.row(A);
  for (Eigen::Index a = 0; a < ab.w; ++a) m += pw(a) * ab.coframe.row(ab.nd() + a);
  return m;
}

VectorXd System::p_w_at(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  VectorXd v = ab.gram_D.llt().solve(p_of(xm));
  return ab.gram.bottomLeftCorner(ab.w, ab.nd()) * v;
}

VectorXd System::velocity_coeffs(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  return ab.gram_D.llt().solve(p_of(xm));
}

double System::energy_at(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  VectorXd p = p_of(xm);
  VectorXd v = ab.gram_D.llt().solve(p);
  return 0.5 * p.dot(v) + potential(q_of(xm));
}

VectorXd System::momenta_of_covector(const VectorXd& q, const RowVectorXd& m) const {
  AdaptedBasis ab = basis_at(q);
  return ab.D().transpose() * m.transpose();
}

OneFormField System::theta_field() const {
  OneFormField f;
  f.fd_step = fd_step;
  f.eval = [this](const VectorXd& xm) {
    RowVectorXd row = RowVectorXd::Zero(m_dim());
    row.head(nq_amb) = covector_at(xm);
    return row;
  };
  return f;
}

TwoFormAt System::omega_at(const VectorXd& xm) const {
  ChartPoint m{m_chart_id, xm};
  MatrixXd dtheta = exterior_derivative_at(theta_field(), m);
  return {m, -dtheta};
}

MatrixXd System::m_tangent_frame(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  MatrixXd T = MatrixXd::Zero(m_dim(), nq + np());
  T.topLeftCorner(nq_amb, nq) = ab.tangent;
  T.bottomRightCorner(np(), np()).setIdentity();
  return T;
}

MatrixXd System::c_frame(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  MatrixXd C = MatrixXd::Zero(m_dim(), ab.nd() + np());
  C.topLeftCorner(nq_amb, ab.nd()) = ab.D();
  C.bottomRightCorner(np(), np()).setIdentity();
  return C;
}

MatrixXd System::h_frame_m(const VectorXd& xm) const {
  AdaptedBasis ab = basis_at(q_of(xm));
  MatrixXd H = MatrixXd::Zero(m_dim(), ab.h + np());
  H.topLeftCorner(nq_amb, ab.h) = ab.H();
  H.bottomRightCorner(np(), np()).setIdentity();
  return H;
}

VectorXd System::generator_lift(const VectorXd& eta, const VectorXd& xm) const {
  VectorXd q = q_of(xm);
  RowVectorXd mrow = covector_at(xm);
  auto dframe = [this](const VectorXd& qq) {
    AdaptedBasis ab = basis_at(qq);
    return MatrixXd(ab.D());
  };
  auto genfield = [this, &eta](const VectorXd& qq) { return MatrixXd(action.generators(qq) * eta); };
  VectorXd etaQ = genfield(q);
  MatrixXd d_frame_along_eta = directional_diff(dframe, q, etaQ, fd_step);
  VectorXd lift(m_dim());
  lift.head(nq_amb) = etaQ;
  MatrixXd D = dframe(q);
  for (Eigen::Index A = 0; A < np(); ++A) {
    MatrixXd d_eta_along_EA = directional_diff(genfield, q, D.col(A), fd_step);
    VectorXd bracket = d_frame_along_eta.col(A) - d_eta_along_EA.col(0);  // [eta_Q, E_A]
    lift(nq_amb + A) = mrow.dot(bracket);
  }
  return lift;
}

VectorXd System::section_lift(const std::function<VectorXd(const VectorXd&)>& section,
                              const VectorXd& xm) const {
  return generator_lift(section(q_of(xm)), xm);
}

MatrixXd System::v_frame_m(const VectorXd& xm) const {
  MatrixXd V(m_dim(), action.lie_dim);
  for (Eigen::Index a = 0; a < action.lie_dim; ++a)
    V.col(a) = generator_lift(VectorXd::Unit(action.lie_dim, a), xm);
  return V;
}

MatrixXd System::s_frame_m(const VectorXd& xm) const {
  VectorXd q = q_of(xm);
  MatrixXd sections = gS_sections(q);  // lie x k
  MatrixXd S(m_dim(), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index col = i;
    S.col(i) = section_lift([this, col](const VectorXd& qq) { return VectorXd(gS_sections(qq).col(col)); }, xm);
  }
  return S;
}

MatrixXd System::w_frame_m(const VectorXd& xm) const {
  // W on M = vertical vectors whose base part lies in W.
  AdaptedBasis ab = basis_at(q_of(xm));
  MatrixXd V = v_frame_m(xm);
  MatrixXd base = V.topRows(nq_amb);
  MatrixXd cond = ab.coframe.topRows(ab.nd()) * base;  // H,S components must vanish
  MatrixXd ns = null_space(cond);
  return V * ns;
}

VectorXd System::act_on_m(const VectorXd& g, const VectorXd& xm) const {
  VectorXd q = q_of(xm);
  VectorXd q2 = action.act(g, q);
  AdaptedBasis ab2 = basis_at(q2);
  RowVectorXd mrow = covector_at(xm);
  // <m', E_A(q2)> = <m, T psi_{g^-1} E_A(q2)>; exact inverse pushforward via FD-free model map:
  // pull each frame vector back with the tangent map of psi_g^{-1}.
  VectorXd p2(np());
  for (Eigen::Index A = 0; A < np(); ++A) {
    VectorXd pulled = action.pushforward(inverse_group(g), q2, ab2.D().col(A));
    p2(A) = mrow.dot(pulled);
  }
  VectorXd out(m_dim());
  out << q2, p2;
  return out;
}

VectorXd System::inverse_group(const VectorXd& g) const {
  if (action.inverse) return action.inverse(g);
  fail(ErrorCode::DegenerateInput, name + ": group inverse not provided");
}

RowVectorXd System::dh_at(const VectorXd& xm) const {
  return fd_gradient([this](const VectorXd& x) { return energy_at(x); }, xm, fd_step);
}

VectorXd System::x_nh_at(const VectorXd& xm) const {
  VectorXd q = q_of(xm);
  VectorXd p = p_of(xm);
  AdaptedBasis ab = basis_at(q);
  VectorXd v = ab.gram_D.llt().solve(p);
  RowVectorXd mrow = covector_at(xm);

  auto dframe = [this](const VectorXd& qq) {
    AdaptedBasis b = basis_at(qq);
    return MatrixXd(b.D());
  };
  MatrixXd D = ab.D();
  std::vector<MatrixXd> dirs(static_cast<size_t>(np()));
  for (Eigen::Index A = 0; A < np(); ++A)
    dirs[static_cast<size_t>(A)] = directional_diff(dframe, q, D.col(A), fd_step);

  MatrixXd Amat = MatrixXd::Zero(np(), np());
  for (Eigen::Index A = 0; A < np(); ++A)
    for (Eigen::Index B = A + 1; B < np(); ++B) {
      VectorXd bracket = dirs[static_cast<size_t>(A)].col(B) - dirs[static_cast<size_t>(B)].col(A);
      double val = mrow.dot(bracket);
      Amat(A, B) = val;
      Amat(B, A) = -val;
    }

  // Base derivative of H along the D-frame directions at fixed momenta.
  VectorXd b(np());
  double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  for (Eigen::Index A = 0; A < np(); ++A) {
    double t = fd_step * scale / std::max(1.0, D.col(A).norm());
    VectorXd qp = q + t * D.col(A), qm = q - t * D.col(A);
    auto ham = [this, &p](const VectorXd& qq) {
      AdaptedBasis bb = basis_at(qq);
      VectorXd vv = bb.gram_D.llt().solve(p);
      return 0.5 * p.dot(vv) + potential(qq);
    };
    b(A) = (ham(qp) - ham(qm)) / (2.0 * t);
  }

  VectorXd out(m_dim());
  out.head(nq_amb) = D * v;
  out.tail(np()) = -b - Amat * v;
  return out;
}

VectorXd System::x_nh_generic(const VectorXd& xm) const {
  BivectorAt pi = pi_nh_at(xm);
  RowVectorXd dh = dh_at(xm);
  return -pi.sharp(dh);
}

BivectorAt System::pi_nh_at(const VectorXd& xm) const {
  return gauge_bivector_at(xm, MatrixXd::Zero(m_dim(), m_dim()));
}

BivectorAt System::gauge_bivector_at(const VectorXd& xm, const MatrixXd& B) const {
  MatrixXd C = c_frame(xm);
  TwoFormAt omega = omega_at(xm);
  MatrixXd Wg = C.transpose() * (omega.components + B) * C;
  Wg = 0.5 * (Wg - Wg.transpose());
  Eigen::FullPivLU<MatrixXd> lu(Wg);
  lu.setThreshold(1e-10);
  if (lu.rank() != Wg.rows())
    fail(B.isZero(0.0) ? ErrorCode::DegenerateOmegaC : ErrorCode::DegenerateGaugedForm,
         "gauged 2-section is degenerate on the characteristic distribution");
  MatrixXd sharp = C * lu.inverse() * C.transpose();
  MatrixXd P = sharp.transpose();
  P = 0.5 * (P - P.transpose());
  return {ChartPoint{m_chart_id, xm}, P};
}

Trajectory System::integrate(const VectorXd& xm0, double dt, double t_end) const {
  if (dt <= 0) fail(ErrorCode::InvalidParameter, "integrate: dt must be positive");
  if (!admissible(xm0)) fail(ErrorCode::LeftAdmissibleRegion, "integrate: initial state inadmissible");
  Trajectory traj;
  traj.conserved_names = conserved_names();
  const auto steps = static_cast<Eigen::Index>(std::llround(t_end / dt));
  traj.conserved.resize(steps + 1, static_cast<Eigen::Index>(traj.conserved_names.size()));
  VectorXd x = xm0;
  double t = 0.0;
  auto record = [&](Eigen::Index i) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.conserved.row(i) = conserved_values(x).transpose();
  };
  record(0);
  for (Eigen::Index i = 1; i <= steps; ++i) {
    VectorXd k1 = x_nh_at(x);
    VectorXd k2 = x_nh_at(x + 0.5 * dt * k1);
    VectorXd k3 = x_nh_at(x + 0.5 * dt * k2);
    VectorXd k4 = x_nh_at(x + dt * k3);
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x = renormalize_state(x);
    t = static_cast<double>(i) * dt;
    if (!admissible(x)) {
      traj.left_admissible_region = true;
      traj.t_last_good = traj.times.back();
      traj.conserved.conservativeResize(static_cast<Eigen::Index>(traj.times.size()), Eigen::NoChange);
      return traj;
    }
    record(i);
  }
  traj.t_last_good = t;
  return traj;
}

VectorXd System::hgs_momenta(const VectorXd& xm) const {
  if (!hgs_sections) return VectorXd(0);
  VectorXd q = q_of(xm);
  RowVectorXd mrow = covector_at(xm);
  MatrixXd gens = action.generators(q) * hgs_sections(q);  // Nq x k
  return gens.transpose() * mrow.transpose();
}

double System::d_momentum_value(const DMomentum& f, const VectorXd& xm) const {
  return covector_at(xm).dot(f.generator(q_of(xm)));
}

std::vector<std::string> System::conserved_names() const {
  std::vector<std::string> names{"H"};
  if (hgs_sections)
    for (Eigen::Index i = 0; i < k; ++i) names.push_back("J_" + std::to_string(i + 1));
  for (const auto& f : d_momenta) names.push_back(f.name);
  return names;
}

VectorXd System::conserved_values(const VectorXd& xm) const {
  std::vector<double> vals{energy_at(xm)};
  if (hgs_sections) {
    VectorXd J = hgs_momenta(xm);
    for (Eigen::Index i = 0; i < J.size(); ++i) vals.push_back(J(i));
  }
  for (const auto& f : d_momenta) vals.push_back(d_momentum_value(f, xm));
  return Eigen::Map<VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace nhred
