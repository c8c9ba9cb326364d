#include "nhred/symmetry.hpp"

#include <Eigen/LU>

namespace nhred::reduction {

namespace {

/// Rebuilds the same splitting as `ab` at nearby points.
std::function<AdaptedBasis(const VectorXd&)> basis_rebuilder(const System& sys, const AdaptedBasis& ab) {
  auto match = [&](const AdaptedBasis& other) {
    return (other.frame - ab.frame).cwiseAbs().maxCoeff() <=
           1e-12 * std::max(1.0, ab.frame.cwiseAbs().maxCoeff());
  };
  if (match(sys.basis_at(ab.q))) return [&sys](const VectorXd& q) { return sys.basis_at(q); };
  if (match(sys.orth_basis_at(ab.q))) return [&sys](const VectorXd& q) { return sys.orth_basis_at(q); };
  if (sys.hgs_sections && match(sys.hgs_basis_at(ab.q)))
    return [&sys](const VectorXd& q) { return sys.hgs_basis_at(q); };
  if (sys.hgs_sections && match(sys.orth_hgs_basis_at(ab.q)))
    return [&sys](const VectorXd& q) { return sys.orth_hgs_basis_at(q); };
  fail(ErrorCode::DegenerateInput, "connection_at: unrecognized adapted basis");
}

MatrixXd pad_to_m(const System& sys, const MatrixXd& on_q) {
  MatrixXd out = MatrixXd::Zero(sys.m_dim(), sys.m_dim());
  out.topLeftCorner(sys.nq_amb, sys.nq_amb) = on_q;
  return out;
}

RowVectorXd pad_row(const System& sys, const RowVectorXd& on_q) {
  RowVectorXd out = RowVectorXd::Zero(sys.m_dim());
  out.head(sys.nq_amb) = on_q;
  return out;
}

/// Structure constants of the Lie algebra from the generator fields at q.
std::vector<MatrixXd> algebra_structure(const System& sys, const VectorXd& q) {
  const Eigen::Index lie = sys.action.lie_dim;
  MatrixXd gens = sys.action.generators(q);
  std::vector<MatrixXd> c(static_cast<size_t>(lie), MatrixXd::Zero(lie, lie));
  for (Eigen::Index b = 0; b < lie; ++b)
    for (Eigen::Index cc = b + 1; cc < lie; ++cc) {
      VectorField fb{[&sys, b](const VectorXd& qq) { return VectorXd(sys.action.generators(qq).col(b)); },
                     nullptr, sys.fd_step};
      VectorField fc{[&sys, cc](const VectorXd& qq) { return VectorXd(sys.action.generators(qq).col(cc)); },
                     nullptr, sys.fd_step};
      VectorXd bracket = lie_bracket_at(fb, fc, {sys.q_chart_id, q});
      VectorXd coef = solve_in_span(gens, bracket);
      for (Eigen::Index a = 0; a < lie; ++a) {
        c[static_cast<size_t>(a)](b, cc) = coef(a);
        c[static_cast<size_t>(a)](cc, b) = -coef(a);
      }
    }
  return c;
}

}  // namespace

ConnectionData connection_at(const System& sys, const AdaptedBasis& ab) {
  ConnectionData cd;
  const VectorXd& q = ab.q;
  const Eigen::Index lie = sys.action.lie_dim;
  auto rebuild = basis_rebuilder(sys, ab);

  MatrixXd gens = sys.action.generators(q);
  cd.P_D = ab.D() * ab.coframe.topRows(ab.nd());
  cd.P_W = ab.W() * ab.coframe.bottomRows(ab.w);
  cd.P_H = ab.H() * ab.coframe.topRows(ab.h);
  cd.P_V = ab.frame.rightCols(ab.k + ab.w) * ab.coframe.bottomRows(ab.k + ab.w);
  MatrixXd gens_dual = dual_coframe(gens);
  cd.A_W = gens_dual * cd.P_W;
  cd.A_V = gens_dual * cd.P_V;
  cd.kappa_g = gens.transpose() * sys.kappa(q);

  auto aw_field = [&sys, &rebuild](const VectorXd& qq) {
    AdaptedBasis b = rebuild(qq);
    return MatrixXd(dual_coframe(sys.action.generators(qq)) * b.W() * b.coframe.bottomRows(b.w));
  };
  auto av_field = [&sys, &rebuild](const VectorXd& qq) {
    AdaptedBasis b = rebuild(qq);
    return MatrixXd(dual_coframe(sys.action.generators(qq)) * b.frame.rightCols(b.k + b.w) *
                    b.coframe.bottomRows(b.k + b.w));
  };

  std::vector<MatrixXd> cstr = algebra_structure(sys, q);
  cd.K_W.resize(static_cast<size_t>(lie));
  cd.K_V.resize(static_cast<size_t>(lie));
  for (Eigen::Index a = 0; a < lie; ++a) {
    OneFormField rowW{[a, &aw_field](const VectorXd& qq) { return RowVectorXd(aw_field(qq).row(a)); },
                      sys.fd_step};
    OneFormField rowV{[a, &av_field](const VectorXd& qq) { return RowVectorXd(av_field(qq).row(a)); },
                      sys.fd_step};
    ChartPoint cp{sys.q_chart_id, q};
    cd.K_W[static_cast<size_t>(a)] = cd.P_D.transpose() * exterior_derivative_at(rowW, cp) * cd.P_D;
    MatrixXd kv = exterior_derivative_at(rowV, cp);
    for (Eigen::Index b = 0; b < lie; ++b)
      for (Eigen::Index c = 0; c < lie; ++c)
        if (cstr[static_cast<size_t>(a)](b, c) != 0.0)
          kv += cstr[static_cast<size_t>(a)](b, c) * (cd.A_V.row(b).transpose() * cd.A_V.row(c));
    cd.K_V[static_cast<size_t>(a)] = 0.5 * (kv - kv.transpose());
  }
  return cd;
}

VectorXd canonical_momentum(const System& sys, const VectorXd& xm) {
  MatrixXd gens = sys.action.generators(sys.q_of(xm));
  return gens.transpose() * sys.covector_at(xm).transpose();
}

VectorXd jnh_at(const System& sys, const VectorXd& xm) { return sys.hgs_momenta(xm); }

double jnh_pairing(const System& sys, const VectorXd& xm,
                   const std::function<VectorXd(const VectorXd&)>& section) {
  VectorXd q = sys.q_of(xm);
  VectorXd gen = sys.action.generators(q) * section(q);
  return sys.covector_at(xm).dot(gen);
}

double momentum_residual_at(const System& sys, const BivectorAt& pi, const VectorXd& xm,
                            const std::function<VectorXd(const VectorXd&)>& section) {
  auto J = [&](const VectorXd& x) { return jnh_pairing(sys, x, section); };
  RowVectorXd dJ = fd_gradient(J, xm, sys.fd_step);
  VectorXd lift = sys.section_lift(section, xm);
  return (pi.sharp(dJ) + lift).norm();
}

double momentum_residual_at(const System& sys, const BivectorAt& pi, const VectorXd& xm, Eigen::Index i) {
  return momentum_residual_at(sys, pi, xm,
                              [&sys, i](const VectorXd& q) { return VectorXd(sys.hgs_sections(q).col(i)); });
}

namespace {

/// d(tau^* Y^i) for the HGS coframe rows, with arguments projected onto the
/// characteristic distribution along W; shared by b1_at and curlyb_at.
std::vector<MatrixXd> dy_projected(const System& sys, const VectorXd& xm) {
  VectorXd q = sys.q_of(xm);
  AdaptedBasis hb = sys.hgs_basis_at(q);
  MatrixXd Pc = projector_along(sys.c_frame(xm), sys.w_frame_m(xm));
  std::vector<MatrixXd> out(static_cast<size_t>(sys.k));
  for (Eigen::Index i = 0; i < sys.k; ++i) {
    OneFormField yi{[&sys, i](const VectorXd& qq) {
                      AdaptedBasis b = sys.hgs_basis_at(qq);
                      return RowVectorXd(b.coframe.row(b.h + i));
                    },
                    sys.fd_step};
    MatrixXd dy = exterior_derivative_at(yi, {sys.q_chart_id, q});
    out[static_cast<size_t>(i)] = Pc.transpose() * pad_to_m(sys, dy) * Pc;
  }
  return out;
}

}  // namespace

MatrixXd b1_at(const System& sys, const VectorXd& xm) {
  AdaptedBasis ab = sys.basis_at(sys.q_of(xm));
  ConnectionData cd = connection_at(sys, ab);
  VectorXd Jcan = canonical_momentum(sys, xm);
  VectorXd J = jnh_at(sys, xm);
  MatrixXd B = MatrixXd::Zero(sys.m_dim(), sys.m_dim());
  for (Eigen::Index a = 0; a < sys.action.lie_dim; ++a)
    B += Jcan(a) * pad_to_m(sys, cd.K_W[static_cast<size_t>(a)]);
  std::vector<MatrixXd> dys = dy_projected(sys, xm);
  for (Eigen::Index i = 0; i < sys.k; ++i) B += J(i) * dys[static_cast<size_t>(i)];
  return 0.5 * (B - B.transpose());
}

MatrixXd curlyb_at(const System& sys, const VectorXd& xm) {
  VectorXd q = sys.q_of(xm);
  AdaptedBasis ab = sys.basis_at(q);
  ConnectionData cd = connection_at(sys, ab);
  VectorXd Jcan = canonical_momentum(sys, xm);
  const Eigen::Index lie = sys.action.lie_dim;

  MatrixXd B = MatrixXd::Zero(sys.m_dim(), sys.m_dim());
  for (Eigen::Index a = 0; a < lie; ++a)
    B -= Jcan(a) * pad_to_m(sys, cd.K_V[static_cast<size_t>(a)]);

  MatrixXd Hm = sys.h_frame_m(xm);
  MatrixXd Sm = sys.s_frame_m(xm);
  MatrixXd Wm = sys.w_frame_m(xm);
  MatrixXd SW(sys.m_dim(), Sm.cols() + Wm.cols());
  SW << Sm, Wm;
  MatrixXd Ph = projector_along(Hm, SW);
  MatrixXd Vm(sys.m_dim(), SW.cols());
  Vm << Sm, Wm;
  MatrixXd Pv = projector_along(Vm, Hm);
  VectorXd Xv = Pv * sys.x_nh_at(xm);

  std::vector<MatrixXd> dys = dy_projected(sys, xm);
  MatrixXd xi = sys.hgs_sections(q);  // lie x k
  for (Eigen::Index a = 0; a < lie; ++a) {
    MatrixXd G = pad_to_m(sys, cd.K_W[static_cast<size_t>(a)]);
    for (Eigen::Index i = 0; i < sys.k; ++i) G += xi(a, i) * dys[static_cast<size_t>(i)];
    RowVectorXd s = pad_row(sys, cd.kappa_g.row(a)) * Ph;
    RowVectorXd r = (Xv.transpose() * G) * Ph;
    B -= 0.5 * (s.transpose() * r - r.transpose() * s);
  }
  return 0.5 * (B - B.transpose());
}

double dynamical_condition_residual_at(const System& sys, const MatrixXd& B, const VectorXd& xm) {
  // Measured against tangent directions; ambient matrices carry no meaning on
  // the normal directions of embedded charts.
  VectorXd X = sys.x_nh_at(xm);
  return (X.transpose() * B * sys.m_tangent_frame(xm)).norm();
}

MatrixXd dj_rows(const System& sys, const VectorXd& xm) {
  MatrixXd rows(sys.k, sys.m_dim());
  for (Eigen::Index i = 0; i < sys.k; ++i) {
    auto f = [&sys, i](const VectorXd& x) { return sys.hgs_momenta(x)(i); };
    rows.row(i) = fd_gradient(f, xm, sys.fd_step);
  }
  return rows;
}

LevelFrames level_tangent_at(const System& sys, const VectorXd& level, const VectorXd& xm,
                             double on_level_tol) {
  VectorXd J = sys.hgs_momenta(xm);
  if (((J - level).cwiseAbs().maxCoeff()) > on_level_tol)
    fail(ErrorCode::NotOnLevelSet, "level_tangent_at: |J - c| = " +
                                       std::to_string((J - level).cwiseAbs().maxCoeff()));
  MatrixXd T = sys.m_tangent_frame(xm);
  MatrixXd dJ = dj_rows(sys, xm);
  LevelFrames lf;
  lf.level_tangent = T * null_space(dJ * T);
  ChartPoint m{sys.m_chart_id, xm};
  FrameAt tl{m, lf.level_tangent, Variance::Tangent};
  lf.C_mu = subspace_intersect(tl, {m, sys.c_frame(xm), Variance::Tangent}).columns;
  lf.W_mu = subspace_intersect(tl, {m, sys.w_frame_m(xm), Variance::Tangent}).columns;
  lf.S_mu = sys.s_frame_m(xm);
  if (lf.level_tangent.cols() != sys.m_dim() - sys.nq_amb + sys.nq - sys.k)
    fail(ErrorCode::NotRegular, "level_tangent_at: unexpected level-set dimension");
  if (lf.C_mu.cols() != sys.nq - sys.w + sys.np() - sys.k)
    fail(ErrorCode::NotRegular, "level_tangent_at: unexpected C_mu dimension");
  return lf;
}

VectorXd shift_at(const System& sys, const VectorXd& level, const VectorXd& xm, double on_level_tol) {
  VectorXd J = sys.hgs_momenta(xm);
  if (((J - level).cwiseAbs().maxCoeff()) > on_level_tol)
    fail(ErrorCode::NotOnLevelSet, "shift_at: point is not on the level set");
  VectorXd q = sys.q_of(xm);
  MatrixXd kap = sys.kappa(q);
  MatrixXd Y = sys.action.generators(q) * sys.hgs_sections(q);  // Nq x k
  MatrixXd gramS = Y.transpose() * kap * Y;
  MatrixXd rows = gramS.llt().solve(Y.transpose() * kap);  // k x Nq: Y^i of the orthogonal splitting
  RowVectorXd mrow = sys.covector_at(xm);
  for (Eigen::Index i = 0; i < sys.k; ++i) mrow -= level(i) * rows.row(i);
  VectorXd p2 = sys.momenta_of_covector(q, mrow);
  VectorXd out(sys.m_dim());
  out << q, p2;
  return out;
}

MatrixXd push_two_form(const System& sys, const QuotientChart& target, const VectorXd& xm,
                       const MatrixXd& two_form, const MatrixXd& span_frame, double* vertical_residual) {
  MatrixXd Jrho = fd_jacobian(target.project, xm, sys.fd_step);
  MatrixXd U = Jrho * span_frame;
  VectorXd z = target.project(xm);
  Eigen::Index target_dim = target.tangent_frame(z).cols();
  if (numerical_rank(U) != target_dim)
    fail(ErrorCode::NotWellDefined, "push_two_form: projected span does not cover the quotient tangent");
  MatrixXd vals = span_frame.transpose() * two_form * span_frame;
  MatrixXd Up = dual_coframe(U).transpose();  // pinv(U)^T, quotient-ambient x span-count
  MatrixXd out = Up * vals * Up.transpose();
  if (vertical_residual) {
    MatrixXd T = sys.m_tangent_frame(xm);
    MatrixXd K = T * null_space(Jrho * T);  // orbit directions
    double r = 0.0;
    if (K.cols() > 0 && span_frame.cols() > 0)
      r = (K.transpose() * two_form * span_frame).cwiseAbs().maxCoeff();
    *vertical_residual = r;
  }
  return 0.5 * (out - out.transpose());
}

ReducedForm reduced_form_at(const System& sys, const QuotientChart& leaf, const VectorXd& level,
                            const VectorXd& xm, WhichForm which, const std::vector<VectorXd>& group_samples) {
  LevelFrames lf = level_tangent_at(sys, level, xm);
  auto form_at = [&](const VectorXd& x) {
    MatrixXd B = b1_at(sys, x);
    if (which == WhichForm::B) B += curlyb_at(sys, x);
    return MatrixXd(sys.omega_at(x).components + B);
  };
  MatrixXd W2 = form_at(xm);

  ReducedForm rf;
  rf.vertical_residual = 0.0;
  if (lf.S_mu.cols() > 0)
    rf.vertical_residual = (lf.S_mu.transpose() * W2 * lf.C_mu).cwiseAbs().maxCoeff();

  double vres = 0.0;
  rf.omega = push_two_form(sys, leaf, xm, W2, lf.C_mu, &vres);
  rf.vertical_residual = std::max(rf.vertical_residual, vres);

  VectorXd z = leaf.project(xm);
  MatrixXd tz = leaf.tangent_frame(z);
  rf.fiber_residual = 0.0;
  for (const auto& g : group_samples) {
    VectorXd xg = sys.act_on_m(g, xm);
    LevelFrames lg = level_tangent_at(sys, level, xg, 1e-6);
    MatrixXd Wg = form_at(xg);
    MatrixXd other = push_two_form(sys, leaf, xg, Wg, lg.C_mu, nullptr);
    VectorXd zg = leaf.project(xg);
    if ((zg - z).cwiseAbs().maxCoeff() > 1e-7 * std::max(1.0, z.cwiseAbs().maxCoeff()))
      fail(ErrorCode::NotWellDefined, "reduced_form_at: group sample leaves the fiber");
    double d = (tz.transpose() * (other - rf.omega) * tz).cwiseAbs().maxCoeff();
    rf.fiber_residual = std::max(rf.fiber_residual, d);
  }

  if (numerical_rank(tz.transpose() * rf.omega * tz) != tz.cols())
    fail(ErrorCode::Degenerate, "reduced_form_at: reduced 2-form is degenerate");
  return rf;
}

VectorXd phi0_at(const System& sys, const QuotientChart& qg, const VectorXd& xm0) {
  VectorXd q = sys.q_of(xm0);
  RowVectorXd mrow = sys.covector_at(xm0);
  AdaptedBasis ab = sys.orth_basis_at(q);
  MatrixXd Jrho = fd_jacobian(qg.project, q, sys.fd_step);
  MatrixXd Hor = ab.H();
  MatrixXd U = Jrho * Hor;  // Nb x h
  VectorXd rhs = Hor.transpose() * mrow.transpose();
  VectorXd Pbar = dual_coframe(U.transpose()) * rhs;  // min-norm solve of U^T Pbar = rhs
  VectorXd z(qg.ambient_dim * 2);
  z << qg.project(q), Pbar;
  return z;
}

VectorXd phi_mu_at(const System& sys, const QuotientChart& qg, const VectorXd& level, const VectorXd& xm) {
  return phi0_at(sys, qg, shift_at(sys, level, xm, 1.0));
}

MatrixXd cotangent_chart_frame(const QuotientChart& qg, const VectorXd& z) {
  const Eigen::Index nb = qg.ambient_dim;
  VectorXd qbar = z.head(nb), Pbar = z.tail(nb);
  MatrixXd tb = qg.tangent_frame(qbar);
  auto proj_field = [&qg](const VectorXd& qq) {
    MatrixXd t = qg.tangent_frame(qq);
    return MatrixXd(t * dual_coframe(t));
  };
  MatrixXd F = MatrixXd::Zero(2 * nb, tb.cols() * 2);
  for (Eigen::Index j = 0; j < tb.cols(); ++j) {
    double scale = std::max(1.0, qbar.cwiseAbs().maxCoeff());
    double t = kDefaultFdStep * scale / std::max(1.0, tb.col(j).norm());
    MatrixXd dproj = (proj_field(qbar + t * tb.col(j)) - proj_field(qbar - t * tb.col(j))) / (2.0 * t);
    F.col(j).head(nb) = tb.col(j);
    F.col(j).tail(nb) = dproj * Pbar;  // keep Pbar in the moving tangent span
    F.col(tb.cols() + j).head(nb).setZero();
    F.col(tb.cols() + j).tail(nb) = tb.col(j);
  }
  return F;
}

MatrixXd canonical_two_form(Eigen::Index nb) {
  MatrixXd W = MatrixXd::Zero(2 * nb, 2 * nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    W(i, nb + i) = 1.0;
    W(nb + i, i) = -1.0;
  }
  return W;
}

MatrixXd hat_b_mu_at(const System& sys, const QuotientChart& qg, const VectorXd& level, const VectorXd& z) {
  const Eigen::Index nb = qg.ambient_dim;
  VectorXd qbar = z.head(nb), Pbar = z.tail(nb);
  VectorXd q = qg.lift(qbar);
  AdaptedBasis ab = sys.orth_hgs_basis_at(q);
  std::vector<MatrixXd> C = sys.structure_functions(ab);
  MatrixXd Jrho = fd_jacobian(qg.project, q, sys.fd_step);
  MatrixXd Hbar = Jrho * ab.H();  // pushed horizontal frame
  VectorXd p_h = Hbar.transpose() * Pbar;

  const Eigen::Index h = ab.h, k = ab.k, w = ab.w;
  MatrixXd kH = ab.gram.topLeftCorner(h, h);
  MatrixXd kS = ab.gram.block(h, h, k, k);
  MatrixXd kH_inv = kH.llt().solve(MatrixXd::Identity(h, h));
  MatrixXd kS_inv = kS.llt().solve(MatrixXd::Identity(k, k));

  // T_{alpha,beta} = p_gamma k^{gamma delta} k_{delta a} C^a_{ab} + c_i (C^i_{ab} + k^{ij} k_{alpha A} C^A_{j beta})
  MatrixXd T = MatrixXd::Zero(h, h);
  VectorXd pk = kH_inv * p_h;  // p_gamma k^{gamma delta}
  for (Eigen::Index a = 0; a < w; ++a) {
    double coef = pk.dot(ab.gram.col(h + k + a).head(h));
    T += coef * C[static_cast<size_t>(h + k + a)].topLeftCorner(h, h);
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    T += level(i) * C[static_cast<size_t>(h + i)].topLeftCorner(h, h);
    // vertical index A ranges over both S and W blocks
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index A = 0; A < k + w; ++A) {
        double kaA_row_dep = kS_inv(i, j);
        MatrixXd CA = C[static_cast<size_t>(h + A)];
        for (Eigen::Index al = 0; al < h; ++al)
          for (Eigen::Index be = 0; be < h; ++be)
            T(al, be) += level(i) * kaA_row_dep * ab.gram(al, h + A) * CA(h + j, be);
      }
  }

  // sigma-bar rows: duals of the pushed horizontal frame within the quotient tangent
  MatrixXd sig = dual_coframe(Hbar);  // h x Nb
  MatrixXd W2 = MatrixXd::Zero(2 * nb, 2 * nb);
  for (Eigen::Index al = 0; al < h; ++al)
    for (Eigen::Index be = 0; be < h; ++be) {
      if (T(al, be) == 0.0) continue;
      RowVectorXd ra = RowVectorXd::Zero(2 * nb), rb = RowVectorXd::Zero(2 * nb);
      ra.head(nb) = sig.row(al);
      rb.head(nb) = sig.row(be);
      W2 += 0.5 * T(al, be) * (ra.transpose() * rb - rb.transpose() * ra);
    }
  return W2;
}

DMomentumReduction dmomentum_zero_reduction(const System& sys, const QuotientChart& leaf0,
                                            const VectorXd& xm) {
  if (sys.d_momenta.empty())
    fail(ErrorCode::HypothesisFailed, "dmomentum_zero_reduction: no D-momenta declared");
  DMomentumReduction out;
  VectorXd q = sys.q_of(xm);
  VectorXd X = sys.x_nh_at(xm);

  // Conservation of the D-momenta along the dynamics.
  out.conservation_residual = 0.0;
  for (const auto& f : sys.d_momenta) {
    auto F = [&sys, &f](const VectorXd& x) { return sys.d_momentum_value(f, x); };
    double r = std::abs(fd_gradient(F, xm, sys.fd_step).dot(X));
    out.conservation_residual = std::max(out.conservation_residual, r);
    if (std::abs(F(xm)) > 1e-9 * std::max(1.0, xm.cwiseAbs().maxCoeff()))
      fail(ErrorCode::NotOnLevelSet, "dmomentum_zero_reduction: " + f.name + " != 0 at the point");
  }

  // Transversality: Stilde-perp ∩ S = 0.
  AdaptedBasis ab = sys.basis_at(q);
  MatrixXd kap = sys.kappa(q);
  MatrixXd St(sys.nq_amb, static_cast<Eigen::Index>(sys.d_momenta.size()));
  for (size_t j = 0; j < sys.d_momenta.size(); ++j) St.col(static_cast<Eigen::Index>(j)) = sys.d_momenta[j].generator(q);
  MatrixXd pairing = St.transpose() * kap * ab.S();
  Eigen::JacobiSVD<MatrixXd> svd(pairing);
  out.transversality_gap = svd.singularValues().minCoeff() /
                           std::max(1.0, svd.singularValues().maxCoeff());
  if (out.transversality_gap < 1e-10)
    fail(ErrorCode::HypothesisFailed, "dmomentum_zero_reduction: Stilde-perp meets S");

  // Htilde = D ∩ Stilde-perp must match the declared splitting and complement V.
  ChartPoint cq{sys.q_chart_id, q};
  MatrixXd D = ab.D();
  MatrixXd Htilde = D * null_space(St.transpose() * kap * D);
  if (subspace_distance(Htilde, ab.H()) > 1e-8)
    fail(ErrorCode::HypothesisFailed, "dmomentum_zero_reduction: splitting H is not D ∩ Stilde-perp");
  MatrixXd V = sys.action.generators(q);
  MatrixXd HV(sys.nq_amb, Htilde.cols() + V.cols());
  HV << Htilde, V;
  if (numerical_rank(sys.tangent_frame_q(q).transpose() * HV) != sys.nq)
    fail(ErrorCode::HypothesisFailed, "dmomentum_zero_reduction: TQ != Htilde + V");

  // C_Htilde inside the zero level.
  MatrixXd Ch(sys.m_dim(), ab.h + sys.np());
  Ch.setZero();
  Ch.topLeftCorner(sys.nq_amb, ab.h) = ab.H();
  Ch.bottomRightCorner(sys.np(), sys.np()).setIdentity();
  MatrixXd dF(static_cast<Eigen::Index>(sys.d_momenta.size()), sys.m_dim());
  for (size_t j = 0; j < sys.d_momenta.size(); ++j) {
    auto F = [&sys, &f = sys.d_momenta[j]](const VectorXd& x) { return sys.d_momentum_value(f, x); };
    dF.row(static_cast<Eigen::Index>(j)) = fd_gradient(F, xm, sys.fd_step);
  }
  MatrixXd ChL = Ch * null_space(dF * Ch);

  double vres = 0.0;
  out.omega_tilde = push_two_form(sys, leaf0, xm, sys.omega_at(xm).components, ChL, &vres);
  out.vertical_residual = vres;
  out.h0_red = sys.energy_at(xm);

  // Hamilton equation on the reduced zero level: i_{X0red} omega = dH0red.
  MatrixXd Jleaf = fd_jacobian(leaf0.project, xm, sys.fd_step);
  VectorXd z = leaf0.project(xm);
  VectorXd X0 = Jleaf * X;
  RowVectorXd dH = fd_gradient([&](const VectorXd& zz) { return sys.energy_at(leaf0.lift(zz)); }, z,
                               sys.fd_step);
  MatrixXd tz = leaf0.tangent_frame(z);
  RowVectorXd lhs = X0.transpose() * out.omega_tilde;
  out.hamilton_residual = ((lhs - dH) * tz).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace nhred::reduction
