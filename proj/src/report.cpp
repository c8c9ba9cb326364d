#include "nhred/report.hpp"

#include <ctime>
#include <json.hpp>
#include <sstream>

#include "nhred/so3.hpp"
#include "nhred/symmetry.hpp"

namespace nhred {

namespace {

using reduction::WhichForm;

struct Ctx {
  const ModelDescriptor& md;
  const System& sys;
  const VerifyOptions& opt;
  std::vector<VectorXd> states;
  std::vector<VectorXd> group_elems;
  VerificationReport& rep;

  [[nodiscard]] double tol(const std::string& name, double fallback) const {
    auto it = opt.tolerance_overrides.find(name);
    return it == opt.tolerance_overrides.end() ? fallback : it->second;
  }
  void add(const std::string& name, const std::string& id, int n, double res, double tolerance) {
    CheckResult c;
    c.name = name;
    c.id = id;
    c.samples = n;
    c.max_residual = res;
    c.tolerance = tol(name, tolerance);
    c.pass = res <= c.tolerance;
    rep.checks.push_back(c);
  }

  [[nodiscard]] bool has_hgs() const { return static_cast<bool>(sys.hgs_sections); }

  [[nodiscard]] std::vector<VectorXd> level_states(const VectorXd& level, size_t count) const {
    std::vector<VectorXd> out;
    for (const auto& xm : states) {
      if (out.size() >= count) break;
      VectorXd J = sys.hgs_momenta(xm);
      out.push_back(reduction::shift_at(sys, J - level, xm, 1e308));
    }
    return out;
  }

  [[nodiscard]] std::vector<VectorXd> levels() const {
    std::vector<VectorXd> out;
    for (double c : {0.0, 0.5, -0.5}) out.push_back(VectorXd::Constant(sys.k, c));
    return out;
  }
};

size_t cap(const Ctx& c, size_t n) { return std::min(n, c.states.size()); }

// ---------------------------------------------------------------------------
// dirac suite
// ---------------------------------------------------------------------------

void suite_dirac(Ctx& c) {
  const System& sys = c.sys;
  double iso = 0, pairF = 0, roundtrip = 0, bwd = 0, fwd = 0, nullr = 0;
  size_t n = cap(c, 25);
  for (size_t s = 0; s < n; ++s) {
    const VectorXd& xm = c.states[s];
    MatrixXd T = sys.m_tangent_frame(xm);
    BivectorAt pi = sys.pi_nh_at(xm);
    DiracSubspace L = graph_of(pi, T);
    iso = std::max(iso, isotropy_residual(L));
    MatrixXd C = sys.c_frame(xm);
    DiracPair pr = pair_representation(L);
    pairF = std::max(pairF, subspace_distance(pr.F.columns, C));
    DiracSubspace back = dirac_from_pair(L.base, T, pr.F.columns, pr.omega_F);
    roundtrip = std::max(roundtrip, dirac_distance(back, L));
    FrameAt K = null_distribution_at(L);
    nullr = std::max(nullr, static_cast<double>(K.columns.cols()));
    LinearMapAt ident{L.base, L.base, MatrixXd::Identity(sys.m_dim(), sys.m_dim()), T, T};
    bwd = std::max(bwd, dirac_distance(backward_image_at(L, ident), L));
    fwd = std::max(fwd, dirac_distance(forward_image_at(L, ident), L));
  }
  c.add("dirac.graph_isotropy", "dirac.isotropy", static_cast<int>(n), iso, 1e-10);
  c.add("dirac.pair_characteristic", "dirac.pair", static_cast<int>(n), pairF, 1e-8);
  c.add("dirac.pair_roundtrip", "dirac.pair", static_cast<int>(n), roundtrip, 1e-9);
  c.add("dirac.null_distribution_trivial", "dirac.null", static_cast<int>(n), nullr, 0.0);
  c.add("dirac.backward_identity", "dirac.backward", static_cast<int>(n), bwd, 1e-10);
  c.add("dirac.forward_identity", "dirac.forward", static_cast<int>(n), fwd, 1e-10);

  if (sys.name == "nonholonomic-particle") {
    // Momentum-map pipeline through the level inclusion and orbit projection.
    double span_res = 0, fwd_res = 0;
    QuotientChart leaf = c.md.leaf((VectorXd(1) << 1.0).finished());
    size_t nn = cap(c, 10);
    for (size_t s = 0; s < nn; ++s) {
      VectorXd xm = c.states[s];
      VectorXd J = sys.hgs_momenta(xm);
      VectorXd lvl = VectorXd::Constant(1, 1.0);
      xm = reduction::shift_at(sys, J - lvl, xm, 1e308);  // place on J = 1
      MatrixXd T = sys.m_tangent_frame(xm);
      BivectorAt pi = sys.pi_nh_at(xm);
      DiracSubspace L = graph_of(pi, T);
      reduction::LevelFrames lf = reduction::level_tangent_at(sys, lvl, xm);
      LinearMapAt inc{ChartPoint{"particle.level", xm}, L.base,
                      MatrixXd::Identity(sys.m_dim(), sys.m_dim()), lf.level_tangent, T};
      DiracSubspace Lmu = backward_image_at(L, inc);

      double y = xm(1), v = xm(4);
      double f = 1.0 / (1.0 + y * y);
      std::vector<std::pair<VectorXd, RowVectorXd>> expect;
      VectorXd Y5 = (VectorXd(5) << 1, 0, y, 0, 0).finished();
      RowVectorXd zero5 = RowVectorXd::Zero(5);
      expect.emplace_back(-std::sqrt(f) * Y5, zero5);
      VectorXd dylev = (VectorXd(5) << 0, 1, 0, 0, y * f * v).finished();
      expect.emplace_back(-dylev, RowVectorXd::Unit(5, 3));
      expect.emplace_back(VectorXd::Unit(5, 3), RowVectorXd::Unit(5, 1));
      RowVectorXd constraint = RowVectorXd::Zero(5);
      constraint(0) = -y;
      constraint(2) = 1.0;
      expect.emplace_back(VectorXd::Zero(5), constraint);
      // Express the expected pairs in the level-frame coordinates.
      MatrixXd dual = dual_coframe(lf.level_tangent);
      MatrixXd expected(2 * 4, 4);
      for (int j = 0; j < 4; ++j) {
        expected.col(j).head(4) = dual * expect[static_cast<size_t>(j)].first;
        expected.col(j).tail(4) = lf.level_tangent.transpose() * expect[static_cast<size_t>(j)].second.transpose();
      }
      span_res = std::max(span_res, subspace_distance(Lmu.basis, expected));

      MatrixXd Jrho = fd_jacobian(leaf.project, xm, sys.fd_step);
      LinearMapAt proj{Lmu.base, ChartPoint{leaf.chart_id, leaf.project(xm)}, Jrho * lf.level_tangent,
                       MatrixXd::Identity(4, 4), leaf.tangent_frame(leaf.project(xm))};
      DiracSubspace Lred = forward_image_at(Lmu, proj);
      BivectorAt pic{proj.target, c.md.reference("particle.pic", leaf.project(xm))};
      DiracSubspace expected_red = graph_of(pic, proj.target_frame);
      fwd_res = std::max(fwd_res, dirac_distance(Lred, expected_red));
    }
    c.add("dirac.level_backward_span", "dirac.pipeline", static_cast<int>(nn), span_res, 1e-8);
    c.add("dirac.level_forward_bivector", "dirac.pipeline", static_cast<int>(nn), fwd_res, 1e-8);
  }
}

// ---------------------------------------------------------------------------
// momentum suite
// ---------------------------------------------------------------------------

void suite_momentum(Ctx& c) {
  const System& sys = c.sys;
  if (c.has_hgs()) {
    double inv = 0, cons = 0, inS = 0, adinv = 0, resB = 0;
    for (const auto& xm : c.states) {
      VectorXd J = sys.hgs_momenta(xm);
      for (const auto& g : c.group_elems) {
        VectorXd J2 = sys.hgs_momenta(sys.act_on_m(g, xm));
        inv = std::max(inv, (J2 - J).cwiseAbs().maxCoeff());
      }
      VectorXd X = sys.x_nh_at(xm);
      MatrixXd dJ = reduction::dj_rows(sys, xm);
      cons = std::max(cons, (dJ * X).cwiseAbs().maxCoeff());

      VectorXd q = sys.q_of(xm);
      MatrixXd S = sys.S_frame(q);
      MatrixXd gen = sys.action.generators(q) * sys.hgs_sections(q);
      for (Eigen::Index i = 0; i < sys.k; ++i) {
        double r = (gen.col(i) - S * solve_in_span(S, gen.col(i))).norm();
        inS = std::max(inS, r);
      }
      for (const auto& g : c.group_elems) {
        VectorXd q2 = sys.action.act(g, q);
        MatrixXd gen2 = sys.action.generators(q2) * sys.hgs_sections(q2);
        for (Eigen::Index i = 0; i < sys.k; ++i) {
          VectorXd pushed = sys.action.pushforward(g, q, gen.col(i));
          adinv = std::max(adinv, (pushed - gen2.col(i)).norm());
        }
      }

      MatrixXd B = reduction::b1_at(sys, xm) + reduction::curlyb_at(sys, xm);
      BivectorAt pi = c.opt.substitute_pi_nh ? sys.pi_nh_at(xm) : sys.gauge_bivector_at(xm, B);
      for (Eigen::Index i = 0; i < sys.k; ++i)
        resB = std::max(resB, reduction::momentum_residual_at(sys, pi, xm, i));
    }
    int n = static_cast<int>(c.states.size());
    c.add("momentum.j_invariance", "momentum.ad_equivariance", n, inv, 1e-9);
    c.add("momentum.conservation", "momentum.first_integral", n, cons, 1e-9);
    c.add("momentum.section_in_S", "momentum.gs_bundle", n, inS, 1e-8);
    c.add("momentum.section_ad_invariance", "momentum.ad_basis", n, adinv, 1e-8);
    c.add("momentum.residual_piB", "momentum.bundle_map", n, resB, 1e-8);
  }

  if (sys.name == "chaplygin-ball") {
    int big = 0;
    for (const auto& xm : c.states) {
      BivectorAt pi = sys.pi_nh_at(xm);
      double r = reduction::momentum_residual_at(sys, pi, xm, 0);
      if (r > 1e-3) ++big;
    }
    double frac = static_cast<double>(big) / static_cast<double>(c.states.size());
    c.add("momentum.residual_pinh_large", "momentum.gauge_needed", static_cast<int>(c.states.size()),
          1.0 - frac, 0.1);
  }

  if (sys.name == "nonholonomic-particle") {
    double min_res = 1e300;
    for (const auto& xm : c.states) {
      BivectorAt pi = sys.pi_nh_at(xm);
      auto section = [](const VectorXd& q) { return VectorXd((VectorXd(2) << 1.0, q(1)).finished()); };
      min_res = std::min(min_res, reduction::momentum_residual_at(sys, pi, xm, section));
    }
    c.add("momentum.unnormalized_section_fails", "momentum.bundle_map", static_cast<int>(c.states.size()),
          std::max(0.0, 0.1 - min_res), 0.0);
  }

  if (!sys.d_momenta.empty()) {
    double cons = 0;
    for (const auto& xm : c.states) {
      VectorXd X = sys.x_nh_at(xm);
      for (const auto& f : sys.d_momenta) {
        auto F = [&sys, &f](const VectorXd& x) { return sys.d_momentum_value(f, x); };
        cons = std::max(cons, std::abs(fd_gradient(F, xm, sys.fd_step).dot(X)));
      }
    }
    c.add("momentum.d_momentum_conservation", "momentum.first_integral",
          static_cast<int>(c.states.size()), cons, 1e-9);
  }
}

// ---------------------------------------------------------------------------
// gauge suite
// ---------------------------------------------------------------------------

MatrixXd pullback_on_frame(const MatrixXd& form_at_target, const MatrixXd& jac, const MatrixXd& frame) {
  MatrixXd pushed = jac * frame;
  return pushed.transpose() * form_at_target * pushed;
}

void suite_gauge(Ctx& c) {
  const System& sys = c.sys;
  size_t n = cap(c, c.states.size());

  if (c.has_hgs()) {
    double coord = 0, semib = 0, b1inv = 0, basic = 0, dyn = 0, ham = 0, b0 = 0;
    for (size_t s = 0; s < n; ++s) {
      const VectorXd& xm = c.states[s];
      VectorXd q = sys.q_of(xm);
      MatrixXd B1 = reduction::b1_at(sys, xm);
      MatrixXd Bc = reduction::curlyb_at(sys, xm);
      MatrixXd Om = sys.omega_at(xm).components;

      // Adapted-coordinate form of (Omega + B1) on the characteristic frame.
      AdaptedBasis hb = sys.hgs_basis_at(q);
      std::vector<MatrixXd> C = sys.structure_functions(hb);
      RowVectorXd mrow = sys.covector_at(xm);
      VectorXd pH(hb.h);
      for (Eigen::Index a = 0; a < hb.h; ++a) pH(a) = mrow.dot(hb.frame.col(a));
      const Eigen::Index nd = hb.nd();
      MatrixXd Cfr = MatrixXd::Zero(sys.m_dim(), nd + sys.np());
      Cfr.topLeftCorner(sys.nq_amb, nd) = hb.D();
      Cfr.bottomRightCorner(sys.np(), sys.np()).setIdentity();
      MatrixXd got = Cfr.transpose() * (Om + B1) * Cfr;
      MatrixXd want = MatrixXd::Zero(nd + sys.np(), nd + sys.np());
      for (Eigen::Index A = 0; A < nd; ++A)
        for (Eigen::Index Bb = 0; Bb < nd; ++Bb) {
          double v = 0;
          for (Eigen::Index g2 = 0; g2 < hb.h; ++g2) v += pH(g2) * C[static_cast<size_t>(g2)](A, Bb);
          want(A, Bb) = v;
        }
      want.topRightCorner(nd, sys.np()).setIdentity();
      want.bottomLeftCorner(sys.np(), nd) = -MatrixXd::Identity(sys.np(), nd);
      coord = std::max(coord, (got - want).cwiseAbs().maxCoeff());

      // Semi-basic: fiber contractions vanish.
      semib = std::max(semib, (B1.bottomRows(sys.np())).cwiseAbs().maxCoeff());
      semib = std::max(semib, (Bc.bottomRows(sys.np())).cwiseAbs().maxCoeff());

      // Invariance under sampled group elements.
      MatrixXd T = sys.m_tangent_frame(xm);
      for (const auto& g : c.group_elems) {
        VectorXd xg = sys.act_on_m(g, xm);
        MatrixXd J = fd_jacobian([&](const VectorXd& x) { return sys.act_on_m(g, x); }, xm, sys.fd_step);
        MatrixXd pb = pullback_on_frame(reduction::b1_at(sys, xg), J, T);
        b1inv = std::max(b1inv, (pb - T.transpose() * B1 * T).cwiseAbs().maxCoeff());
        MatrixXd pbc = pullback_on_frame(reduction::curlyb_at(sys, xg), J, T);
        basic = std::max(basic, (pbc - T.transpose() * Bc * T).cwiseAbs().maxCoeff());
      }
      // Basic: vertical contractions vanish.
      MatrixXd V = sys.v_frame_m(xm);
      basic = std::max(basic, (V.transpose() * Bc * T).cwiseAbs().maxCoeff());

      dyn = std::max(dyn, reduction::dynamical_condition_residual_at(sys, B1 + Bc, xm));
      BivectorAt piB = sys.gauge_bivector_at(xm, B1 + Bc);
      RowVectorXd dH = sys.dh_at(xm);
      ham = std::max(ham, (piB.sharp(dH) + sys.x_nh_at(xm)).norm());

      BivectorAt p0 = sys.gauge_bivector_at(xm, MatrixXd::Zero(sys.m_dim(), sys.m_dim()));
      b0 = std::max(b0, (p0.components - sys.pi_nh_at(xm).components).cwiseAbs().maxCoeff());
    }
    int ni = static_cast<int>(n);
    c.add("gauge.omega1_coordinates", "gauge.omega1", ni, coord, 1e-8);
    c.add("gauge.b_semibasic", "gauge.semibasic", ni, semib, 1e-10);
    c.add("gauge.b1_invariance", "gauge.invariance", ni, b1inv, 1e-8);
    c.add("gauge.curlyb_basic", "gauge.basic", ni, basic, 1e-7);
    c.add("gauge.dynamical_condition", "gauge.dynamical", ni, dyn, 1e-8);
    c.add("gauge.piB_describes_dynamics", "gauge.dynamics", ni, ham, 1e-8);
    c.add("gauge.zero_gauge_is_pi_nh", "gauge.identity", ni, b0, 0.0);
  }

  if (sys.name == "chaplygin-ball") {
    double pi1r = 0, curlyr = 0;
    int nonzero = 0;
    for (size_t s = 0; s < n; ++s) {
      const VectorXd& xm = c.states[s];
      MatrixXd B1 = reduction::b1_at(sys, xm);
      BivectorAt pi1 = sys.gauge_bivector_at(xm, B1);
      pi1r = std::max(pi1r, (pi1.components - c.md.reference("chap.pi1", xm)).cwiseAbs().maxCoeff());
      MatrixXd Bc = reduction::curlyb_at(sys, xm);
      curlyr = std::max(curlyr, (Bc - c.md.reference("chap.curlyB", xm)).cwiseAbs().maxCoeff());
      if (reduction::dynamical_condition_residual_at(sys, B1, xm) > 1e-6) ++nonzero;
    }
    c.add("gauge.pi1_closed_form", "gauge.display", static_cast<int>(n), pi1r, 1e-7);
    c.add("gauge.curlyb_closed_form", "gauge.display", static_cast<int>(n), curlyr, 1e-7);
    c.add("gauge.b1_alone_not_dynamical", "gauge.dynamical", static_cast<int>(n),
          1.0 - static_cast<double>(nonzero) / static_cast<double>(n), 0.5);
  }

  if (sys.name == "ball-on-surface") {
    double pibr = 0, bczero = 0;
    for (size_t s = 0; s < n; ++s) {
      const VectorXd& xm = c.states[s];
      MatrixXd B = reduction::b1_at(sys, xm);
      BivectorAt piB = sys.gauge_bivector_at(xm, B);
      pibr = std::max(pibr, (piB.components - c.md.reference("surface.pib", xm)).cwiseAbs().maxCoeff());
      bczero = std::max(bczero, reduction::curlyb_at(sys, xm).cwiseAbs().maxCoeff());
    }
    c.add("gauge.piB_closed_form", "gauge.display", static_cast<int>(n), pibr, 1e-7);
    c.add("gauge.curlyb_vanishes_rank1", "gauge.rank1", static_cast<int>(n), bczero, 1e-9);
  }

  if (sys.name == "nonholonomic-particle") {
    double pir = 0;
    for (size_t s = 0; s < n; ++s) {
      const VectorXd& xm = c.states[s];
      BivectorAt pi = sys.pi_nh_at(xm);
      pir = std::max(pir, (pi.components - c.md.reference("particle.pi", xm)).cwiseAbs().maxCoeff());
    }
    c.add("gauge.pi_matches_quoted_bivector", "gauge.display", static_cast<int>(n), pir, 1e-9);
  }

  if (sys.name == "bmf-sphere") {
    double rhsr = 0, xredr = 0, piredr = 0;
    for (size_t s = 0; s < n; ++s) {
      const VectorXd& xm = c.states[s];
      VectorXd X = sys.x_nh_at(xm);
      // Body angular velocity derivative along the flow, by finite differences.
      auto omega_of = [&](const VectorXd& x) {
        VectorXd q = x.head(12);
        AdaptedBasis ab = sys.basis_at(q);
        VectorXd v = ab.gram_D.llt().solve(x.tail(3));
        return Vector3d(so3::left_mc_matrix(so3::unpack(q, 0)) * (ab.D() * v).head(9));
      };
      double t = sys.fd_step * std::max(1.0, xm.cwiseAbs().maxCoeff()) / std::max(1.0, X.norm());
      Vector3d dOmega = (omega_of(xm + t * X) - omega_of(xm - t * X)) / (2.0 * t);
      Vector3d want = c.md.reference("bmf.rhs", xm);
      rhsr = std::max(rhsr, (dOmega - want).norm());

      VectorXd z = c.md.mg.project(xm);
      MatrixXd Jr = fd_jacobian(c.md.mg.project, xm, sys.fd_step);
      VectorXd xred = Jr * X;
      VectorXd want_red = c.md.reference("bmf.xred", z);
      xredr = std::max(xredr, (xred - want_red).norm());

      BivectorAt pi = sys.pi_nh_at(xm);
      MatrixXd Pred = Jr * pi.components * Jr.transpose();
      piredr = std::max(piredr, (Pred - c.md.reference("bmf.pired", z)).cwiseAbs().maxCoeff());
    }
    c.add("gauge.reduced_equations_closed_form", "gauge.display", static_cast<int>(n), rhsr, 1e-7);
    c.add("gauge.reduced_field_closed_form", "gauge.display", static_cast<int>(n), xredr, 1e-7);
    c.add("gauge.reduced_bivector_closed_form", "gauge.display", static_cast<int>(n), piredr, 1e-7);
  }
}

// ---------------------------------------------------------------------------
// reduction suite
// ---------------------------------------------------------------------------

void suite_reduction(Ctx& c) {
  const System& sys = c.sys;
  if (c.has_hgs()) {
    double vert = 0, fiber = 0, closed = 0, ham = 0, jac1 = 0;
    double disp = 0;
    int disp_n = 0;
    for (const auto& level : c.levels()) {
      auto pts = c.level_states(level, cap(c, 50));
      QuotientChart leaf = c.md.leaf(level);
      size_t n_closed = std::min<size_t>(pts.size(), 6);
      for (size_t s = 0; s < pts.size(); ++s) {
        const VectorXd& xm = pts[s];
        reduction::ReducedForm one = reduction::reduced_form_at(sys, leaf, level, xm, WhichForm::One,
                                                                c.group_elems);
        reduction::ReducedForm full = reduction::reduced_form_at(sys, leaf, level, xm, WhichForm::B, {});
        vert = std::max(vert, std::max(one.vertical_residual, full.vertical_residual));
        fiber = std::max(fiber, one.fiber_residual);

        VectorXd z = leaf.project(xm);
        MatrixXd tz = leaf.tangent_frame(z);

        // Hamilton equation on the leaf: i_{Xred} omega^B = dH_red.
        MatrixXd Jr = fd_jacobian(leaf.project, xm, sys.fd_step);
        VectorXd Xred = Jr * sys.x_nh_at(xm);
        RowVectorXd dH = fd_gradient([&](const VectorXd& zz) { return sys.energy_at(leaf.lift(zz)); }, z,
                                     sys.fd_step);
        RowVectorXd lhs = Xred.transpose() * full.omega;
        ham = std::max(ham, ((lhs - dH) * tz).cwiseAbs().maxCoeff());

        if (sys.name == "chaplygin-ball") {
          MatrixXd want = c.md.reference("chap.omega1", z);
          disp = std::max(disp, (tz.transpose() * (one.omega - want) * tz).cwiseAbs().maxCoeff());
          ++disp_n;
        }
        if (sys.name == "ball-on-surface") {
          MatrixXd want = c.md.reference("surface.omegaBmu", z);
          disp = std::max(disp, (tz.transpose() * (full.omega - want) * tz).cwiseAbs().maxCoeff());
          ++disp_n;
        }
        if (sys.name == "nonholonomic-particle") {
          MatrixXd want(2, 2);
          want << 0, 1, -1, 0;  // dy ^ dp_H
          disp = std::max(disp, (one.omega - want).cwiseAbs().maxCoeff());
          ++disp_n;
        }

        if (s < n_closed) {
          TwoFormField leaf_form{[&](const VectorXd& zz) {
                                   VectorXd lifted = leaf.lift(zz);
                                   VectorXd lv = sys.hgs_momenta(lifted);
                                   return reduction::reduced_form_at(sys, leaf, lv, lifted,
                                                                     WhichForm::One, {})
                                       .omega;
                                 },
                                 sys.fd_step};
          auto d3 = exterior_derivative_at(leaf_form, {leaf.chart_id, z});
          for (Eigen::Index a = 0; a < tz.cols(); ++a)
            for (Eigen::Index b = a + 1; b < tz.cols(); ++b)
              for (Eigen::Index e = b + 1; e < tz.cols(); ++e)
                closed = std::max(closed, std::abs(three_form_eval(d3, tz.col(a), tz.col(b), tz.col(e))));
        }
      }
    }
    int ni = static_cast<int>(cap(c, 50)) * 3;
    c.add("reduction.vertical_degeneracy", "reduction.nulls", ni, vert, 1e-9);
    c.add("reduction.fiber_well_defined", "reduction.welldef", ni, fiber, 1e-7);
    c.add("reduction.omega1_closed", "reduction.closedness", static_cast<int>(6 * 3), closed, 1e-6);
    c.add("reduction.hamilton_on_leaf", "reduction.dynamics", ni, ham, 1e-6);
    if (disp_n > 0) c.add("reduction.leaf_form_closed_form", "reduction.display", disp_n, disp,
                          sys.name == "ball-on-surface" ? 1e-9 : 1e-7);

    // Jacobi identity of the reduced bracket of pi_1 on M/G.
    size_t nj = std::min<size_t>(c.states.size(), 8);
    for (size_t s = 0; s < nj; ++s) {
      VectorXd z = c.md.mg.project(c.states[s]);
      BivectorField pird{[&](const VectorXd& zz) {
                           VectorXd xm = c.md.mg.lift(zz);
                           MatrixXd B1 = reduction::b1_at(sys, xm);
                           BivectorAt pi = sys.gauge_bivector_at(xm, B1);
                           MatrixXd J = fd_jacobian(c.md.mg.project, xm, sys.fd_step);
                           return MatrixXd(J * pi.components * J.transpose());
                         },
                         sys.fd_step};
      jac1 = std::max(jac1, jacobiator_max_at(pird, {c.md.mg.chart_id, z}));
    }
    c.add("reduction.jacobi_pi1_red", "reduction.poisson", static_cast<int>(nj), jac1, 1e-6);
  }

  if (sys.name == "chaplygin-ball") {
    int nonzero = 0;
    size_t nj = std::min<size_t>(c.states.size(), 20);
    for (size_t s = 0; s < nj; ++s) {
      BivectorField pinh{[&](const VectorXd& x) { return sys.pi_nh_at(x).components; }, sys.fd_step};
      double j = std::abs(
          jacobiator_at(pinh, {sys.m_chart_id, c.states[s]}, 11, 12, 13));
      if (j > 1e-3) ++nonzero;
    }
    c.add("reduction.jacobi_pinh_nonzero", "reduction.almost_poisson", static_cast<int>(nj),
          1.0 - static_cast<double>(nonzero) / static_cast<double>(nj), 0.5);
  }
}

// ---------------------------------------------------------------------------
// identification suite
// ---------------------------------------------------------------------------

void suite_identification(Ctx& c) {
  const System& sys = c.sys;
  if (!c.has_hgs()) return;
  double on0 = 0, equiv = 0, adapted = 0, shf = 0, pull1 = 0, pullB = 0, hatp = 0, hdisp = 0;
  bool chap = sys.name == "chaplygin-ball";
  for (const auto& level : c.levels()) {
    auto pts = c.level_states(level, cap(c, 50));
    for (const auto& xm : pts) {
      VectorXd x0 = reduction::shift_at(sys, level, xm, 1e-6);
      on0 = std::max(on0, sys.hgs_momenta(x0).cwiseAbs().maxCoeff());

      for (const auto& g : c.group_elems) {
        VectorXd a = reduction::shift_at(sys, level, sys.act_on_m(g, xm), 1e-6);
        VectorXd b = sys.act_on_m(g, x0);
        equiv = std::max(equiv, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
      }

      // In the orthogonal adapted coordinates the shift subtracts c_i from p_i
      // and fixes the horizontal momenta.
      AdaptedBasis ob = sys.orth_hgs_basis_at(sys.q_of(xm));
      RowVectorXd m0 = sys.covector_at(x0), m1 = sys.covector_at(xm);
      for (Eigen::Index a = 0; a < ob.h; ++a)
        adapted = std::max(adapted, std::abs((m0 - m1).dot(ob.frame.col(a))));
      for (Eigen::Index i = 0; i < ob.k; ++i)
        adapted = std::max(adapted,
                           std::abs((m0 - m1).dot(ob.frame.col(ob.h + i)) + level(i)));

      // Lemma: Shift preserves (Omega + B1) on the characteristic distribution.
      auto shift_map = [&](const VectorXd& x) { return reduction::shift_at(sys, level, x, 1e308); };
      MatrixXd Jsh = fd_jacobian(shift_map, xm, sys.fd_step);
      MatrixXd C = sys.c_frame(xm);
      MatrixXd W0 = sys.omega_at(x0).components + reduction::b1_at(sys, x0);
      MatrixXd W1 = sys.omega_at(xm).components + reduction::b1_at(sys, xm);
      shf = std::max(shf, (pullback_on_frame(W0, Jsh, C) - C.transpose() * W1 * C).cwiseAbs().maxCoeff());

      // Pullback identities through phi_mu = phi_0 ∘ shift.
      reduction::LevelFrames lf = reduction::level_tangent_at(sys, level, xm, 1e-6);
      auto phi = [&](const VectorXd& x) { return reduction::phi_mu_at(sys, c.md.qg, level, x); };
      VectorXd z = phi(xm);
      MatrixXd Jphi = fd_jacobian(phi, xm, sys.fd_step);
      MatrixXd wcan = reduction::canonical_two_form(c.md.qg.ambient_dim);
      MatrixXd hatB = reduction::hat_b_mu_at(sys, c.md.qg, level, z);
      MatrixXd lhs1 = pullback_on_frame(wcan, Jphi, lf.C_mu);
      MatrixXd lhsB = pullback_on_frame(wcan + hatB, Jphi, lf.C_mu);
      MatrixXd r1 = lf.C_mu.transpose() *
                    (sys.omega_at(xm).components + reduction::b1_at(sys, xm)) * lf.C_mu;
      MatrixXd rB = lf.C_mu.transpose() *
                    (sys.omega_at(xm).components + reduction::b1_at(sys, xm) +
                     reduction::curlyb_at(sys, xm)) *
                    lf.C_mu;
      pull1 = std::max(pull1, (lhs1 - r1).cwiseAbs().maxCoeff());
      pullB = std::max(pullB, (lhsB - rB).cwiseAbs().maxCoeff());
      hatp = std::max(hatp, (pullback_on_frame(hatB, Jphi, lf.C_mu) -
                             lf.C_mu.transpose() * reduction::curlyb_at(sys, xm) * lf.C_mu)
                                .cwiseAbs()
                                .maxCoeff());

      if (chap) {
        VectorXd pt(7);
        pt << z, level(0);
        MatrixXd want = c.md.reference("chap.hatB", pt);
        MatrixXd F = reduction::cotangent_chart_frame(c.md.qg, z);
        hdisp = std::max(hdisp, (F.transpose() * (hatB - want) * F).cwiseAbs().maxCoeff());
      }
    }
  }
  int ni = static_cast<int>(cap(c, 50)) * 3;
  c.add("identification.shift_lands_on_zero", "identification.shift", ni, on0, 1e-9);
  c.add("identification.shift_equivariance", "identification.shift", ni, equiv, 1e-9);
  c.add("identification.shift_adapted_coordinates", "identification.shift", ni, adapted, 1e-10);
  c.add("identification.shift_preserves_gauged_form", "identification.shift", ni, shf, 1e-7);
  c.add("identification.pullback_canonical", "identification.symplectomorphism", ni, pull1, 1e-6);
  c.add("identification.pullback_with_magnetic", "identification.chaplygin_leaf", ni, pullB, 1e-6);
  c.add("identification.magnetic_two_route", "identification.hatB", ni, hatp, 1e-7);
  if (chap) c.add("identification.magnetic_closed_form", "identification.display", ni, hdisp, 1e-7);
}

// ---------------------------------------------------------------------------
// dmomentum suite
// ---------------------------------------------------------------------------

void suite_dmomentum(Ctx& c) {
  const System& sys = c.sys;
  if (sys.name == "bmf-sphere") {
    QuotientChart leaf0 = c.md.leaf(VectorXd::Zero(1));
    double cons = 0, ham = 0, vert = 0, trans = 0, h0 = 0, od = 0, mag = 0;
    size_t n = cap(c, 25);
    for (size_t s = 0; s < n; ++s) {
      // Project the sample to the zero level through the leaf chart.
      VectorXd z0 = leaf0.project(c.states[s]);
      VectorXd xm = leaf0.lift(z0);
      auto res = reduction::dmomentum_zero_reduction(sys, leaf0, xm);
      cons = std::max(cons, res.conservation_residual);
      ham = std::max(ham, res.hamilton_residual);
      vert = std::max(vert, res.vertical_residual);
      trans = std::max(trans, std::max(0.0, 1e-6 - res.transversality_gap));

      VectorXd z = leaf0.project(xm);
      MatrixXd tz = leaf0.tangent_frame(z);
      VectorXd zex(5);
      zex << z;
      MatrixXd H0 = c.md.reference("bmf.H0red", zex);
      h0 = std::max(h0, std::abs(res.h0_red - H0(0, 0)));
      MatrixXd wdisp = c.md.reference("bmf.omega_tilde", z);
      od = std::max(od, (tz.transpose() * (res.omega_tilde - wdisp) * tz).cwiseAbs().maxCoeff());

      // Magnetic route: omega_tilde = phi^* omega_can - <J, Ktilde> pushed down.
      auto phi = [&](const VectorXd& x) {
        VectorXd q = sys.q_of(x);
        RowVectorXd mrow = sys.covector_at(x);
        AdaptedBasis ab = sys.basis_at(q);
        MatrixXd Jrho = fd_jacobian(c.md.qg.project, q, sys.fd_step);
        MatrixXd U = Jrho * ab.H();
        VectorXd rhs = ab.H().transpose() * mrow.transpose();
        VectorXd Pbar = dual_coframe(MatrixXd(U.transpose())) * rhs;
        VectorXd out(6);
        out << c.md.qg.project(q), Pbar;
        return out;
      };
      auto phi_leaf = [&](const VectorXd& zz) { return phi(leaf0.lift(zz)); };
      MatrixXd Jphi = fd_jacobian(phi_leaf, z, sys.fd_step);
      MatrixXd wcan = reduction::canonical_two_form(3);
      MatrixXd route = Jphi.transpose() * wcan * Jphi;
      // <J, Ktilde> on the zero level, pushed to the leaf chart.
      AdaptedBasis ab = sys.basis_at(sys.q_of(xm));
      reduction::ConnectionData cd = reduction::connection_at(sys, ab);
      VectorXd Jcan = reduction::canonical_momentum(sys, xm);
      MatrixXd JK = MatrixXd::Zero(sys.m_dim(), sys.m_dim());
      for (Eigen::Index a = 0; a < sys.action.lie_dim; ++a) {
        MatrixXd padded = MatrixXd::Zero(sys.m_dim(), sys.m_dim());
        padded.topLeftCorner(sys.nq_amb, sys.nq_amb) = cd.K_V[static_cast<size_t>(a)];
        JK += Jcan(a) * padded;
      }
      MatrixXd Ch = MatrixXd::Zero(sys.m_dim(), ab.h + sys.np());
      Ch.topLeftCorner(sys.nq_amb, ab.h) = ab.H();
      Ch.bottomRightCorner(sys.np(), sys.np()).setIdentity();
      MatrixXd dF(1, sys.m_dim());
      auto F = [&](const VectorXd& x) { return sys.d_momentum_value(sys.d_momenta[0], x); };
      dF.row(0) = fd_gradient(F, xm, sys.fd_step);
      MatrixXd ChL = Ch * null_space(dF * Ch);
      MatrixXd JKred = reduction::push_two_form(sys, leaf0, xm, JK, ChL, nullptr);
      mag = std::max(mag,
                     (tz.transpose() * (res.omega_tilde - (route - JKred)) * tz).cwiseAbs().maxCoeff());
    }
    int ni = static_cast<int>(n);
    c.add("dmomentum.conserved", "dmomentum.first_integrals", ni, cons, 1e-9);
    c.add("dmomentum.transversality", "dmomentum.hypotheses", ni, trans, 0.0);
    c.add("dmomentum.hamilton_on_zero_leaf", "dmomentum.dynamics", ni, ham, 1e-6);
    c.add("dmomentum.vertical_degeneracy", "dmomentum.welldef", ni, vert, 1e-8);
    c.add("dmomentum.h0_closed_form", "dmomentum.display", ni, h0, 1e-9);
    c.add("dmomentum.omega_closed_form", "dmomentum.display", ni, od, 1e-6);
    c.add("dmomentum.magnetic_route", "dmomentum.identification", ni, mag, 1e-6);
  }

  if (sys.name == "chaplygin-ball") {
    // Feeding the gauge symmetry as a D-momentum must reproduce the zero-level
    // momentum reduction: H-tilde is the orthogonal horizontal space and the
    // pipeline's 2-form matches (Omega + B1) minus the magnetic term.
    auto orth_sys = std::make_shared<System>(sys);
    auto base = std::make_shared<System>(sys);
    orth_sys->H_frame = [base](const VectorXd& q) { return base->orth_basis_at(q).H(); };
    orth_sys->W_frame = [base](const VectorXd& q) { return base->orth_basis_at(q).W(); };
    orth_sys->d_momenta.push_back(
        DMomentum{"JY", [base](const VectorXd& q) { return VectorXd(base->S_frame(q).col(0)); }});

    QuotientChart leaf0{"chaplygin.orth_leaf0", 5,
                        [orth_sys](const VectorXd& xm) {
                          VectorXd z(5);
                          z << Vector3d(so3::unpack(xm, 0).row(2)), xm(11), xm(12);
                          return z;
                        },
                        [](const VectorXd& z) {
                          Vector3d gamma = z.head(3).normalized();
                          MatrixXd T = MatrixXd::Zero(5, 4);
                          T.topLeftCorner(3, 2) = orthonormal_columns(so3::hat(gamma));
                          T.bottomRightCorner(2, 2).setIdentity();
                          return T;
                        },
                        [orth_sys](const VectorXd& z) {
                          VectorXd q(11);
                          so3::pack(q, 0, so3::from_third_row(Vector3d(z.head(3))));
                          q(9) = 0.8;
                          q(10) = 0.0;
                          VectorXd xm(14);
                          xm << q, z(3), z(4), 0.0;
                          return xm;
                        }};

    double pipe = 0, coinc = 0;
    size_t n = cap(c, 10);
    for (size_t s = 0; s < n; ++s) {
      VectorXd z0 = leaf0.project(c.states[s]);
      VectorXd xm = leaf0.lift(z0);
      auto res = reduction::dmomentum_zero_reduction(*orth_sys, leaf0, xm);
      pipe = std::max(pipe, std::max(res.hamilton_residual, res.conservation_residual));

      // omega_tilde + <J, K0> pushed = reduced (Omega + B1) at the zero level.
      VectorXd lvl = VectorXd::Zero(1);
      reduction::ReducedForm one =
          reduction::reduced_form_at(*orth_sys, leaf0, lvl, xm, WhichForm::One, {});
      AdaptedBasis ab = orth_sys->basis_at(orth_sys->q_of(xm));
      reduction::ConnectionData cd = reduction::connection_at(*orth_sys, ab);
      VectorXd Jcan = reduction::canonical_momentum(*orth_sys, xm);
      MatrixXd JK = MatrixXd::Zero(orth_sys->m_dim(), orth_sys->m_dim());
      for (Eigen::Index a = 0; a < orth_sys->action.lie_dim; ++a) {
        MatrixXd padded = MatrixXd::Zero(orth_sys->m_dim(), orth_sys->m_dim());
        padded.topLeftCorner(orth_sys->nq_amb, orth_sys->nq_amb) = cd.K_V[static_cast<size_t>(a)];
        JK += Jcan(a) * padded;
      }
      reduction::LevelFrames lf = reduction::level_tangent_at(*orth_sys, lvl, xm, 1e-6);
      MatrixXd JKred = reduction::push_two_form(*orth_sys, leaf0, xm, JK, lf.C_mu, nullptr);
      VectorXd z = leaf0.project(xm);
      MatrixXd tz = leaf0.tangent_frame(z);
      coinc = std::max(coinc, (tz.transpose() * (res.omega_tilde + JKred - one.omega) * tz)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    c.add("dmomentum.pipeline_on_gauge_symmetries", "dmomentum.coincidence", static_cast<int>(n), pipe,
          1e-6);
    c.add("dmomentum.coincides_with_zero_level", "dmomentum.coincidence", static_cast<int>(n), coinc,
          1e-7);
  }
}

}  // namespace

VerificationReport run_suites(const ModelDescriptor& md, const VerifyOptions& opt) {
  VerificationReport rep;
  rep.model = md.name;
  rep.seed = opt.seed;
  rep.samples = opt.samples;
  {
    std::time_t t = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    rep.generated_at = buf;
  }
  std::mt19937_64 rng(opt.seed);
  Ctx ctx{md, *md.system, opt, {}, {}, rep};
  for (int i = 0; i < opt.samples; ++i) {
    PresetState st = md.sample_state(rng);
    VectorXd xm(md.system->m_dim());
    xm << st.q, st.p;
    ctx.states.push_back(xm);
  }
  for (int i = 0; i < 8; ++i) ctx.group_elems.push_back(md.system->action.sample(rng));

  auto wants = [&](const char* s) {
    if (opt.suites.empty()) return true;
    for (const auto& w : opt.suites)
      if (w == s) return true;
    return false;
  };
  if (wants("dirac")) suite_dirac(ctx);
  if (wants("momentum")) suite_momentum(ctx);
  if (wants("gauge")) suite_gauge(ctx);
  if (wants("reduction")) suite_reduction(ctx);
  if (wants("identification")) suite_identification(ctx);
  if (wants("dmomentum")) suite_dmomentum(ctx);
  return rep;
}

std::string report_to_json(const VerificationReport& rep) {
  nlohmann::ordered_json j;
  j["tool_version"] = rep.tool_version;
  j["model"] = rep.model;
  j["seed"] = rep.seed;
  j["samples"] = rep.samples;
  j["generated_at"] = rep.generated_at;
  j["overall_pass"] = rep.overall_pass();
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& ch : rep.checks) {
    nlohmann::ordered_json c;
    c["name"] = ch.name;
    c["id"] = ch.id;
    c["samples"] = ch.samples;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", ch.max_residual);
    c["max_residual"] = std::string(buf);
    std::snprintf(buf, sizeof(buf), "%.17g", ch.tolerance);
    c["tolerance"] = std::string(buf);
    c["pass"] = ch.pass;
    j["checks"].push_back(c);
  }
  return j.dump(2) + "\n";
}

VerificationReport report_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  VerificationReport rep;
  rep.tool_version = j.at("tool_version").get<std::string>();
  rep.model = j.at("model").get<std::string>();
  rep.seed = j.at("seed").get<std::uint64_t>();
  rep.samples = j.at("samples").get<int>();
  rep.generated_at = j.at("generated_at").get<std::string>();
  for (const auto& c : j.at("checks")) {
    CheckResult ch;
    ch.name = c.at("name").get<std::string>();
    ch.id = c.at("id").get<std::string>();
    ch.samples = c.at("samples").get<int>();
    ch.max_residual = std::stod(c.at("max_residual").get<std::string>());
    ch.tolerance = std::stod(c.at("tolerance").get<std::string>());
    ch.pass = c.at("pass").get<bool>();
    rep.checks.push_back(ch);
  }
  return rep;
}

std::string report_summary(const VerificationReport& rep) {
  std::ostringstream os;
  os << "model " << rep.model << "  seed " << rep.seed << "  samples " << rep.samples << "\n";
  for (const auto& c : rep.checks) {
    os << (c.pass ? "PASS " : "FAIL ") << c.name << "  max " << c.max_residual << "  tol " << c.tolerance
       << "  n " << c.samples << "\n";
  }
  os << (rep.overall_pass() ? "OVERALL PASS" : "OVERALL FAIL") << "\n";
  return os.str();
}

}  // namespace nhred
