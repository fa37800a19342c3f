#include "commands.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "noether/conservation.hpp"
#include "noether/ntk.hpp"
#include "output.hpp"

namespace noether::app {

namespace {

using nlohmann::json;

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// File names keep [A-Za-z0-9_-]; everything else becomes '_'.
std::string file_safe(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return out;
}

struct Setup {
  Network<double> net;
  std::shared_ptr<Dataset<double>> data;
  LossSpec<double> loss;
  DynamicsSpec<double> spec;
  RunOptions<double> opts;
};

Setup setup(const Config& cfg, const Architecture& arch) {
  Setup s{build_network(cfg, arch), build_dataset(cfg), {}, build_dynamics(cfg), {}};
  s.loss = build_loss(cfg, s.data);
  s.opts = build_run_options(cfg, s.net);
  try {
    loss(s.net, s.loss);
  } catch (const InputError& e) {
    throw ConfigError("dataset", e.what());
  }
  return s;
}

json describe_run(const Config& cfg, const Setup& s) {
  return {{"config", cfg.source},
          {"seed", cfg.seed},
          {"init_seed", cfg.init_seed},
          {"dataset", s.data ? s.data->provenance : std::string("none")},
          {"loss", cfg.loss == "potential" ? "potential:" + cfg.potential : cfg.loss},
          {"dynamics", cfg.dynamics.kind},
          {"eta", cfg.dynamics.eta},
          {"steps", cfg.dynamics.steps},
          {"time_step", s.spec.time_step()},
          {"param_count", s.net.param_count()}};
}

}  // namespace

int cmd_run(const Config& cfg, const std::string& out_dir, std::ostream& out) {
  const Setup s = setup(cfg, cfg.arch);
  const auto monitors = build_monitors(cfg, s.net);
  const Trajectory<double> traj = run(s.spec, s.net, s.loss, monitors, s.opts);

  std::ostringstream csv, jsonl;
  write_csv(csv, traj);
  write_jsonl(jsonl, traj);
  write_file(join(out_dir, "trajectory.csv"), csv.str());
  write_file(join(out_dir, "trajectory.jsonl"), jsonl.str());

  json meta = describe_run(cfg, s);
  meta["samples"] = traj.size();
  meta["sample_every"] = traj.sample_every;
  meta["truncated"] = traj.truncated;
  if (traj.truncated) {
    meta["truncation_step"] = traj.truncation_step;
    meta["truncation_reason"] = traj.truncation_reason;
  }
  write_file(join(out_dir, "run.json"), meta.dump(2) + "\n");

  if (cfg.plots && !traj.records.empty()) {
    std::vector<double> t, loss_values;
    for (const auto& r : traj.records) {
      t.push_back(r.t);
      loss_values.push_back(r.loss);
    }
    for (const auto& [name, v] : traj.records.front().quantities) {
      Series right{name, {}};
      for (const auto& r : traj.records) right.y.push_back(scalar_view(r.at(name)));
      write_file(join(out_dir, "plot_" + file_safe(name) + ".svg"),
                 svg_two_axis(name + " and loss", "t", t, Series{"loss", loss_values}, right));
    }
  }

  out << "samples: " << traj.size() << ", final loss " << format_number(traj.records.back().loss) << "\n";
  if (traj.truncated) {
    out << "diverged: truncated at step " << traj.truncation_step << " (" << traj.truncation_reason << ")\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_check(const Config& cfg, const std::string& out_dir, std::ostream& out) {
  if (cfg.generators.empty()) throw ConfigError("generators", "check needs at least one [[generators]] entry");
  Setup s = setup(cfg, cfg.arch);
  const auto generators = build_generators(cfg, s.net);
  s.opts.sample_every = cfg.check.stride;
  const Trajectory<double> traj = run(s.spec, s.net, s.loss, {}, s.opts);
  const Objective<double> objective(s.net, s.loss);
  const Oracle<double> oracle = make_oracle(objective);

  const double loss0 = loss(s.net, s.loss);
  const double inv_tol = 1e-10 * (1.0 + std::abs(loss0));
  const double rt_tol = 1e-8;
  const bool fd = cfg.check.force == ForceEstimate::FiniteDifference;
  const double traj_tol = fd ? 10.0 * traj.sample_spacing() : 1e-8;

  // E and the network at every window centre, shared by all generators.
  std::vector<Window<double>> windows;
  std::vector<Vector<double>> forces;
  std::vector<Network<double>> nets;
  for (std::size_t c = 1; c + 1 < traj.size(); ++c) {
    windows.push_back(window_at(traj, c));
    forces.push_back(noether_force(windows.back(), s.spec, cfg.check.force, &oracle));
    nets.push_back(s.net.with_params(traj.snapshots[c].w));
  }

  json report = describe_run(cfg, s);
  report["tolerances"] = {{"invariance", inv_tol}, {"rund_trautmann", rt_tol}, {"trajectory", traj_tol}};
  report["truncated"] = traj.truncated;
  json rows = json::array();
  std::size_t failures = 0;

  out << pad("generator", 40) << pad("invariance", 12) << pad("RT rel", 12) << pad("traj rel", 12)
      << "verdict\n";
  for (const auto& g : generators) {
    json row = {{"generator", describe(g)}};
    std::vector<std::string> reasons;

    const double defect = loss_invariance_defect(g, s.net, s.loss, cfg.check.eps);
    const bool inv_ok = defect <= inv_tol;
    row["invariance_defect"] = defect;
    if (!inv_ok) {
      reasons.push_back(std::holds_alternative<Rotation<double>>(g)
                            ? "loss is not rotation invariant: the dataset is not rotationally symmetric"
                            : "loss changes under the finite transformation");
    }

    const auto rt = rund_trautmann_check(g, s.net, s.loss);
    const double rt_scale = rt.grad_norm * rt.xi_norm;
    const double rt_rel = rt_scale > 0 ? std::abs(rt.residual) / rt_scale : 0.0;
    const bool rt_ok = rt.certified(rt_tol);
    row["rund_trautmann"] = {{"residual", rt.residual}, {"relative", rt_rel}, {"certified", rt_ok}};
    if (!rt_ok) reasons.push_back("<grad L, xi> does not vanish");

    double worst = 0.0;
    double trace_gap = 0.0;
    for (std::size_t c = 0; c < windows.size(); ++c) {
      const Vector<double> xi = apply_generator(g, nets[c]);
      const double value = forces[c].dot(xi);
      const double scale = forces[c].norm() * xi.norm();
      if (scale > 0) worst = std::max(worst, std::abs(value) / scale);
      if (const auto* lin = std::get_if<LinearLayer<double>>(&g)) {
        const Matrix<double> r = dynamic_balance_residual(s.net, windows[c], lin->h, s.spec, cfg.check.force, &oracle);
        const double tr = (r * lin->A).trace();
        const double bound = 1e-12 * (1.0 + r.norm() * lin->A.norm() + scale);
        trace_gap = std::max(trace_gap, std::abs(tr - value) / bound);
      }
    }
    const bool traj_ok = windows.empty() || worst <= traj_tol;
    row["trajectory_relative"] = windows.empty() ? json(nullptr) : json(worst);
    if (!traj_ok) reasons.push_back("conserved expression drifts along the trajectory");
    if (std::holds_alternative<LinearLayer<double>>(g) && !windows.empty()) {
      const bool ok = trace_gap <= 1.0;
      row["trace_form"] = ok ? "PASS" : "FAIL";
      if (!ok) reasons.push_back("tr(R A) disagrees with <E, xi_A>");
    }

    const bool pass = reasons.empty();
    failures += pass ? 0 : 1;
    row["verdict"] = pass ? "PASS" : "FAIL";
    row["reasons"] = reasons;
    rows.push_back(row);
    out << pad(describe(g), 40) << pad(sci(defect), 12) << pad(sci(rt_rel), 12)
        << pad(windows.empty() ? std::string("n/a") : sci(worst), 12) << (pass ? "PASS" : "FAIL");
    for (const auto& r : reasons) out << "  [" << r << "]";
    out << "\n";
  }
  report["generators"] = rows;
  report["failures"] = failures;
  write_file(join(out_dir, "check.json"), report.dump(2) + "\n");
  out << generators.size() - failures << "/" << generators.size() << " generators PASS\n";

  if (traj.truncated) {
    out << "diverged: truncated at step " << traj.truncation_step << "\n";
    return kExitDiverged;
  }
  return failures == 0 ? kExitOk : kExitFail;
}

int cmd_ntk(const Config& cfg, const std::string& out_dir, std::ostream& out) {
  if (cfg.arch.dims.back() != 1)
    throw ConfigError("architecture.dims", "kernel suite needs a scalar output, d_K = " +
                                               std::to_string(cfg.arch.dims.back()));
  if (cfg.arch.dims.size() < 3) throw ConfigError("architecture.dims", "width sweep needs a hidden layer");
  if (cfg.dynamics.kind != "gf" && cfg.dynamics.kind != "nd")
    throw ConfigError("dynamics.kind", "kernel suite supports gf and nd");
  if (cfg.w0) throw ConfigError("initial_state.w", "explicit parameters cannot follow a width sweep");
  const bool second = cfg.dynamics.kind == "nd";
  const bool kernel = cfg.loss == "quadratic";

  json rows = json::array();
  std::ostringstream csv;
  csv << "width,param_count,loss0,sup_v_norm,norm_bound,sup_v_avg,avg_bound,weight_movement,kernel_divergence\r\n";
  out << pad("width", 8) << pad("L0", 12) << pad("sup|v|", 12) << pad("sqrt(2L0)", 12) << pad("sup avg|v|", 12)
      << pad("sqrt(2L0/m)", 12) << pad("movement", 12) << "divergence\n";
  std::vector<std::string> failures;
  bool diverged = false;
  std::vector<double> movements, divergences;

  for (Index m : cfg.ntk.widths) {
    Architecture arch = cfg.arch;
    for (std::size_t h = 1; h + 1 < arch.dims.size(); ++h) arch.dims[h] = m;
    const Setup s = setup(cfg, arch);
    const Trajectory<double> traj = run(s.spec, s.net, s.loss, {}, s.opts);
    const std::string tag = "width " + std::to_string(m);
    if (traj.truncated) {
      diverged = true;
      failures.push_back(tag + ": diverged at step " + std::to_string(traj.truncation_step));
    }

    json row = {{"width", m}, {"param_count", s.net.param_count()}, {"loss0", traj.records.front().loss}};
    const double movement = weight_movement(traj);
    row["weight_movement"] = movement;
    movements.push_back(movement);

    VelocityStats<double> vs;
    if (second) {
      vs = velocity_stats(traj);
      row["sup_v_norm"] = vs.sup_norm;
      row["norm_bound"] = vs.norm_bound;
      row["sup_v_avg"] = vs.sup_avg;
      row["avg_bound"] = vs.avg_bound;
      const bool norm_ok = vs.sup_norm * vs.sup_norm <= 2.0 * vs.loss0 * 1.01;
      const bool avg_ok = vs.sup_avg <= vs.avg_bound;
      row["norm_bound_ok"] = norm_ok;
      row["avg_bound_ok"] = avg_ok;
      if (!norm_ok) failures.push_back(tag + ": sup ||v||^2 exceeds 2 L0 (1.01 slack)");
      if (!avg_ok) failures.push_back(tag + ": sup avg |v_i| exceeds sqrt(2 L0 / m)");
    }

    double divergence = std::numeric_limits<double>::quiet_NaN();
    if (kernel && !traj.truncated) {
      const Matrix<double>& x = s.data->inputs;
      const Matrix<double> h = gram(s.net, x);
      const auto ku = kernel_dynamics_run<double>(h, s.data->targets.col(0), predictions(s.net, x),
                                                  second ? DynamicsKind::ND : DynamicsKind::GF, cfg.dynamics.eta,
                                                  cfg.dynamics.steps, cfg.sample_every);
      divergence = network_vs_kernel_divergence(prediction_trajectory(traj, s.net, x), ku.u);
      divergences.push_back(divergence);
    }
    row["kernel_divergence"] = number_or_null(divergence);
    rows.push_back(row);

    auto cell = [](const json& j) { return j.is_number() ? format_number(j.get<double>()) : std::string(); };
    csv << m << ',' << s.net.param_count() << ',' << cell(row["loss0"]) << ',' << cell(row.value("sup_v_norm", json()))
        << ',' << cell(row.value("norm_bound", json())) << ',' << cell(row.value("sup_v_avg", json())) << ','
        << cell(row.value("avg_bound", json())) << ',' << cell(row["weight_movement"]) << ','
        << cell(row["kernel_divergence"]) << "\r\n";
    auto col = [](const json& j) { return j.is_number() ? sci(j.get<double>()) : std::string("n/a"); };
    out << pad(std::to_string(m), 8) << pad(col(row["loss0"]), 12) << pad(col(row.value("sup_v_norm", json())), 12)
        << pad(col(row.value("norm_bound", json())), 12) << pad(col(row.value("sup_v_avg", json())), 12)
        << pad(col(row.value("avg_bound", json())), 12) << pad(col(row["weight_movement"]), 12)
        << col(row["kernel_divergence"]) << "\n";
  }

  json trends = json::object();
  if (cfg.ntk.widths.size() >= 2) {
    auto strictly_decreasing = [](const std::vector<double>& v) {
      for (std::size_t j = 1; j < v.size(); ++j)
        if (!(v[j] < v[j - 1])) return false;
      return true;
    };
    const bool mv = strictly_decreasing(movements);
    trends["weight_movement_decreasing"] = mv;
    if (!mv) failures.push_back("weight movement is not strictly decreasing across widths");
    if (divergences.size() == cfg.ntk.widths.size()) {
      const bool dv = strictly_decreasing(divergences);
      trends["kernel_divergence_decreasing"] = dv;
      if (!dv) failures.push_back("kernel divergence is not strictly decreasing across widths");
    }
  }

  json report = {{"config", cfg.source}, {"seed", cfg.seed},         {"dynamics", cfg.dynamics.kind},
                 {"eta", cfg.dynamics.eta}, {"steps", cfg.dynamics.steps}, {"widths", rows},
                 {"trends", trends},         {"failures", failures}};
  write_file(join(out_dir, "ntk.csv"), csv.str());
  write_file(join(out_dir, "ntk.json"), report.dump(2) + "\n");
  for (const auto& f : failures) out << "FAIL: " << f << "\n";
  if (diverged) return kExitDiverged;
  if (!failures.empty()) return kExitFail;
  out << "all checks PASS\n";
  return kExitOk;
}

int dispatch(const std::string& command, const std::string& config_path,
             const std::optional<std::string>& out_dir, std::optional<std::uint64_t> seed_override,
             std::ostream& out, std::ostream& err) {
  try {
    const Config cfg = load_config(config_path, seed_override);
    const std::string dir = out_dir.value_or(cfg.output);
    if (command == "run") return cmd_run(cfg, dir, out);
    if (command == "check") return cmd_check(cfg, dir, out);
    if (command == "ntk") return cmd_ntk(cfg, dir, out);
    err << "unknown command '" << command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace noether::app
