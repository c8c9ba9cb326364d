#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "nhred/config.hpp"
#include "nhred/report.hpp"
#include "nhred/symmetry.hpp"

namespace {

using namespace nhred;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownModel:
    case ErrorCode::InvalidParameter:
    case ErrorCode::UnknownExpression:
      return 1;
    default:
      return 2;
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << text;
}

VectorXd initial_state(const ModelDescriptor& md, const ConfigDocument& cfg) {
  VectorXd xm = md.preset_state();
  if (cfg.on_zero_level) {
    if (!md.system->d_momenta.empty()) {
      QuotientChart leaf0 = md.leaf(VectorXd::Zero(1));
      return leaf0.lift(leaf0.project(xm));
    }
    if (md.system->hgs_sections) {
      VectorXd J = md.system->hgs_momenta(xm);
      return reduction::shift_at(*md.system, J, xm, 1e308);
    }
  }
  return xm;
}

int cmd_simulate(const ModelDescriptor& md, const ConfigDocument& cfg) {
  const System& sys = *md.system;
  VectorXd xm0 = initial_state(md, cfg);
  Trajectory traj = sys.integrate(xm0, cfg.dt, cfg.t_end);

  std::string path = cfg.out_path.empty() ? "trajectory.csv" : cfg.out_path;
  std::ostringstream os;
  os << "t";
  for (Eigen::Index i = 0; i < sys.nq_amb; ++i) os << ",q" << (i + 1);
  for (Eigen::Index i = 0; i < sys.np(); ++i) os << ",p" << (i + 1);
  for (const auto& name : traj.conserved_names) os << "," << name;
  os << "\n";
  char buf[64];
  for (size_t r = 0; r < traj.states.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[r]);
    os << buf;
    for (Eigen::Index i = 0; i < traj.states[r].size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.states[r](i));
      os << "," << buf;
    }
    for (Eigen::Index i = 0; i < traj.conserved.cols(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.conserved(static_cast<Eigen::Index>(r), i));
      os << "," << buf;
    }
    os << "\n";
  }
  write_file(path, os.str());
  std::cout << "wrote " << traj.states.size() << " rows to " << path << "\n";
  if (traj.left_admissible_region) {
    std::cerr << "LeftAdmissibleRegion: last good state at t = " << traj.t_last_good << "\n";
    return 2;
  }
  return 0;
}

int cmd_verify(const ModelDescriptor& md, const ConfigDocument& cfg) {
  VerifyOptions opt;
  opt.suites = cfg.suites;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  opt.substitute_pi_nh = cfg.substitute_pi_nh;
  opt.tolerance_overrides = cfg.tolerance_overrides;
  VerificationReport rep = run_suites(md, opt);
  std::string path = cfg.out_path.empty() ? "report.json" : cfg.out_path;
  write_file(path, report_to_json(rep));
  std::cout << report_summary(rep);

  if (!cfg.expect_fail.empty()) {
    bool named_failed = false, others_pass = true;
    for (const auto& c : rep.checks) {
      if (c.name == cfg.expect_fail)
        named_failed = !c.pass;
      else if (!c.pass)
        others_pass = false;
    }
    if (named_failed && others_pass) {
      std::cout << "expected failure observed in " << cfg.expect_fail << "\n";
      return 0;
    }
    std::cerr << "expected " << cfg.expect_fail << " to fail\n";
    return 3;
  }
  return rep.overall_pass() ? 0 : 3;
}

int cmd_reduce(const ModelDescriptor& md, const ConfigDocument& cfg) {
  const System& sys = *md.system;
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["model"] = md.name;
  j["seed"] = cfg.seed;
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto mat_to_json = [&](const MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index cc = 0; cc < m.cols(); ++cc) row.push_back(fmt(m(r, cc)));
      rows.push_back(row);
    }
    return rows;
  };

  std::mt19937_64 rng(cfg.seed);
  int count = std::min(cfg.samples, 20);
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();

  if (!sys.d_momenta.empty() && !sys.hgs_sections) {
    QuotientChart leaf0 = md.leaf(VectorXd::Zero(1));
    j["level"] = "zero";
    for (int i = 0; i < count; ++i) {
      PresetState st = md.sample_state(rng);
      VectorXd xm(sys.m_dim());
      xm << st.q, st.p;
      xm = leaf0.lift(leaf0.project(xm));
      auto res = reduction::dmomentum_zero_reduction(sys, leaf0, xm);
      nlohmann::ordered_json pt;
      pt["z"] = mat_to_json(leaf0.project(xm));
      pt["omega_tilde"] = mat_to_json(res.omega_tilde);
      pt["H0_red"] = fmt(res.h0_red);
      pt["hamilton_residual"] = fmt(res.hamilton_residual);
      pt["conservation_residual"] = fmt(res.conservation_residual);
      pts.push_back(pt);
    }
  } else {
    VectorXd level = VectorXd::Zero(sys.k);
    for (size_t i = 0; i < cfg.mu.size() && i < static_cast<size_t>(sys.k); ++i)
      level(static_cast<Eigen::Index>(i)) = cfg.mu[i];
    nlohmann::ordered_json lv = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < level.size(); ++i) lv.push_back(fmt(level(i)));
    j["level"] = lv;
    QuotientChart leaf = md.leaf(level);
    for (int i = 0; i < count; ++i) {
      PresetState st = md.sample_state(rng);
      VectorXd xm(sys.m_dim());
      xm << st.q, st.p;
      VectorXd J = sys.hgs_momenta(xm);
      xm = reduction::shift_at(sys, J - level, xm, 1e308);
      auto one = reduction::reduced_form_at(sys, leaf, level, xm, reduction::WhichForm::One, {});
      auto full = reduction::reduced_form_at(sys, leaf, level, xm, reduction::WhichForm::B, {});
      VectorXd z = leaf.project(xm);
      VectorXd phi = reduction::phi_mu_at(sys, md.qg, level, xm);
      MatrixXd hatB = reduction::hat_b_mu_at(sys, md.qg, level, phi);

      // Residuals of the pullback identities at this point.
      reduction::LevelFrames lf = reduction::level_tangent_at(sys, level, xm, 1e-6);
      auto phimap = [&](const VectorXd& x) { return reduction::phi_mu_at(sys, md.qg, level, x); };
      MatrixXd Jphi = fd_jacobian(phimap, xm, sys.fd_step);
      MatrixXd wcan = reduction::canonical_two_form(md.qg.ambient_dim);
      MatrixXd pushed = Jphi * lf.C_mu;
      MatrixXd lhs1 = pushed.transpose() * wcan * pushed;
      MatrixXd lhsB = pushed.transpose() * (wcan + hatB) * pushed;
      MatrixXd B1 = reduction::b1_at(sys, xm);
      MatrixXd Bc = reduction::curlyb_at(sys, xm);
      MatrixXd Om = sys.omega_at(xm).components;
      double r1 = (lhs1 - lf.C_mu.transpose() * (Om + B1) * lf.C_mu).cwiseAbs().maxCoeff();
      double rB = (lhsB - lf.C_mu.transpose() * (Om + B1 + Bc) * lf.C_mu).cwiseAbs().maxCoeff();

      nlohmann::ordered_json pt;
      pt["z"] = mat_to_json(z);
      pt["omega_1"] = mat_to_json(one.omega);
      pt["omega_B"] = mat_to_json(full.omega);
      pt["hat_B"] = mat_to_json(hatB);
      pt["phi_mu"] = mat_to_json(phi);
      pt["pullback_residual_canonical"] = fmt(r1);
      pt["pullback_residual_magnetic"] = fmt(rB);
      pt["vertical_residual"] = fmt(std::max(one.vertical_residual, full.vertical_residual));
      pts.push_back(pt);
    }
  }
  j["points"] = pts;
  std::string path = cfg.out_path.empty() ? "leaf.json" : cfg.out_path;
  write_file(path, j.dump(2) + "\n");
  std::cout << "wrote " << pts.size() << " leaf points to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical workbench for nonholonomic systems with symmetry"};
  app.require_subcommand(1);

  std::string model, config_path, out_path, suites_arg, mu_arg, expect_fail;
  double dt = -1, t_end = -1;
  int samples = -1;
  long long seed = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--model", model, "model name");
    cmd->add_option("--config", config_path, "config file (key/value sections or JSON)");
    cmd->add_option("--dt", dt, "integrator step");
    cmd->add_option("--t-end", t_end, "integration end time");
    cmd->add_option("--samples", samples, "sample count");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--mu", mu_arg, "momentum level coefficients c1,c2,...");
    cmd->add_option("--suite", suites_arg, "verification suites, comma separated");
    cmd->add_option("--out", out_path, "output path");
    cmd->add_option("--expect-fail", expect_fail, "check expected to fail (verify)");
  };

  CLI::App* sim = app.add_subcommand("simulate", "integrate a trajectory and write CSV");
  CLI::App* ver = app.add_subcommand("verify", "run verification suites and write a JSON report");
  CLI::App* red = app.add_subcommand("reduce", "emit reduced-leaf data as JSON");
  add_common(sim);
  add_common(ver);
  add_common(red);

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigDocument cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (!model.empty()) cfg.model = model;
    if (dt > 0) cfg.dt = dt;
    if (t_end > 0) cfg.t_end = t_end;
    if (samples > 0) cfg.samples = samples;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out_path.empty()) cfg.out_path = out_path;
    if (!expect_fail.empty()) cfg.expect_fail = expect_fail;
    if (!suites_arg.empty()) {
      cfg.suites.clear();
      std::stringstream ss(suites_arg);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.suites.push_back(item);
    }
    if (!mu_arg.empty()) {
      cfg.mu.clear();
      std::stringstream ss(mu_arg);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.mu.push_back(std::stod(item));
    }
    if (cfg.model.empty()) fail(ErrorCode::ConfigError, "no model given (use --model or [model] name)");

    ModelDescriptor md = get_model(cfg.model, cfg.model_params);
    if (sim->parsed()) return cmd_simulate(md, cfg);
    if (ver->parsed()) return cmd_verify(md, cfg);
    if (red->parsed()) return cmd_reduce(md, cfg);
    return 1;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
