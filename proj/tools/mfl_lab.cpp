// Command-line front end: simulate | solve-pde | liouville | regularize |
// check-kernel | diagnose | rate-sweep | emit-plot-data.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "meanfield/diagnostics.hpp"
#include "meanfield/harness.hpp"
#include "meanfield/kernels.hpp"
#include "meanfield/liouville.hpp"
#include "meanfield/meanfield_pde.hpp"
#include "meanfield/particle_sim.hpp"
#include "meanfield/regularizer.hpp"

using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  long seed = -1;     // -1 = use config value
  long workers = -1;  // -1 = use config value
};

mfl::KeyValueConfig load_config(const GlobalOpts& g) {
  if (g.config_path.empty()) return mfl::KeyValueConfig::from_string("");
  return mfl::KeyValueConfig::from_file(g.config_path);
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
  std::filesystem::create_directories(g.out_dir);
  return g.out_dir + "/" + name;
}

mfl::GridField cosine_density(int dim, int n, double amp) {
  mfl::GridField rho(dim, n, 1.0);
  for (std::size_t j = 0; j < rho.size(); ++j)
    rho.values[j] += amp * std::cos(2.0 * M_PI * rho.point(j)[0]);
  return rho;
}

mfl::KernelSpec kernel_from_config(mfl::KeyValueConfig& cfg, const std::string& section, int n,
                                   int dim) {
  std::string fam = cfg.get_str(section + ".kernel", "periodic-log");
  mfl::BuildParams bp;
  bp.s = cfg.get_double(section + ".kernel_param", 0.5);
  bp.lambda = bp.s;
  return mfl::build_kernel(mfl::family_from_name(fam), bp, n, dim);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

int cmd_simulate(const GlobalOpts& g) {
  auto cfg = load_config(g);
  mfl::SimConfig sim;
  sim.N = static_cast<int>(cfg.get_long("simulate.n_particles", 16));
  sim.d = static_cast<int>(cfg.get_long("simulate.dim", 1));
  sim.sigma = cfg.get_double("simulate.sigma", 0.5);
  sim.vanishing_sigma = cfg.get_long("simulate.vanishing_sigma", 0) != 0;
  sim.beta = cfg.get_double("simulate.beta", 0.0);
  sim.dt = cfg.get_double("simulate.dt", 1e-3);
  sim.T = cfg.get_double("simulate.T", 0.1);
  sim.R = static_cast<int>(cfg.get_long("simulate.replicas", 1));
  sim.snapshot_stride = static_cast<int>(cfg.get_long("simulate.snapshot_stride", 10));
  sim.seed = static_cast<std::uint64_t>(g.seed >= 0 ? g.seed : cfg.get_long("simulate.seed", 0));
  sim.workers = static_cast<int>(g.workers >= 0 ? g.workers : cfg.get_long("simulate.workers", 1));
  int grid_n = static_cast<int>(cfg.get_long("simulate.grid_n", 256));
  double amp = cfg.get_double("simulate.init_amp", 0.0);
  sim.init_density = cosine_density(sim.d, grid_n, amp);

  mfl::KernelSpec kernel;
  bool has_kernel = cfg.get_str("simulate.kernel", "none") != "none";
  if (has_kernel) kernel = kernel_from_config(cfg, "simulate", grid_n, sim.d);
  sim.kernel = has_kernel ? &kernel : nullptr;
  cfg.finish_section("simulate");

  auto snaps = mfl::run(sim);
  std::string hash = cfg.hash_hex();
  json manifest;
  manifest["config_hash"] = hash;
  manifest["config"] = cfg.canonical();
  manifest["seed"] = sim.seed;
  manifest["snapshots"] = json::array();
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const auto& s = snaps[k];
    std::vector<std::vector<double>> rows;
    for (int r = 0; r < s.state.replicas(); ++r)
      for (int i = 0; i < s.state.N; ++i) {
        const auto& p = s.state.positions[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
        rows.push_back({static_cast<double>(r), static_cast<double>(i), p[0], p[1]});
      }
    std::string name = "particles_" + std::to_string(k) + ".csv";
    mfl::write_csv(out_path(g, name), hash, {"replica", "particle", "x1", "x2"}, rows);
    long caps = 0;
    for (auto c : s.state.cap_events) caps += static_cast<long>(c);
    manifest["snapshots"].push_back(
        {{"t", s.t}, {"file", name}, {"min_dist", s.min_dist}, {"cap_events", caps}});
  }
  write_json(out_path(g, "simulate_manifest.json"), manifest);
  std::cout << "simulate: " << snaps.size() << " snapshots -> " << g.out_dir << "\n";
  return 0;
}

int cmd_solve_pde(const GlobalOpts& g) {
  auto cfg = load_config(g);
  int n = static_cast<int>(cfg.get_long("pde.grid_n", 256));
  int dim = static_cast<int>(cfg.get_long("pde.dim", 1));
  mfl::PdeState st;
  st.sigma = cfg.get_double("pde.sigma", 0.5);
  double dt = cfg.get_double("pde.dt", 1e-4);
  double T = cfg.get_double("pde.T", 0.1);
  int stride = static_cast<int>(cfg.get_long("pde.stride", 10));
  st.rho = cosine_density(dim, n, cfg.get_double("pde.init_amp", 0.3));
  mfl::KernelSpec kernel;
  bool has_kernel = cfg.get_str("pde.kernel", "none") != "none";
  if (has_kernel) kernel = kernel_from_config(cfg, "pde", n, dim);
  st.kernel = has_kernel ? &kernel : nullptr;
  cfg.finish_section("pde");

  std::string hash = cfg.hash_hex();
  std::vector<std::vector<double>> series;
  long nsteps = std::lround(T / dt);
  auto record = [&]() {
    auto fe = mfl::free_energy(st);
    series.push_back({st.t, fe.entropy, fe.interaction, fe.total, st.rho.mean(), st.rho.min()});
  };
  record();
  for (long k = 1; k <= nsteps; ++k) {
    mfl::advance(st, dt);
    if (k % stride == 0 || k == nsteps) record();
  }
  mfl::write_csv(out_path(g, "free_energy.csv"), hash,
                 {"t", "entropy", "interaction", "total", "mass", "min_rho"}, series);
  std::vector<std::vector<double>> rho_rows;
  for (std::size_t j = 0; j < st.rho.size(); ++j) {
    auto p = st.rho.point(j);
    rho_rows.push_back({p[0], p[1], st.rho.values[j]});
  }
  mfl::write_csv(out_path(g, "rho_final.csv"), hash, {"x1", "x2", "rho"}, rho_rows);
  json manifest{{"config_hash", hash}, {"config", cfg.canonical()},
                {"t_final", st.t},     {"floor_events", st.floor_events},
                {"mass", st.rho.mean()}};
  write_json(out_path(g, "pde_manifest.json"), manifest);
  std::cout << "solve-pde: t=" << st.t << " mass=" << st.rho.mean() << "\n";
  return 0;
}

int cmd_liouville(const GlobalOpts& g) {
  auto cfg = load_config(g);
  int m = static_cast<int>(cfg.get_long("liouville.m", 128));
  double sigma = cfg.get_double("liouville.sigma", 0.5);
  double dt = cfg.get_double("liouville.dt", 2e-4);
  double T = cfg.get_double("liouville.T", 0.02);
  int stride = static_cast<int>(cfg.get_long("liouville.stride", 10));
  double amp = cfg.get_double("liouville.init_amp", 0.3);
  double eps = cfg.get_double("liouville.eps", 0.2);
  double C = cfg.get_double("liouville.C", 4.0);

  // The delta scales are not resolvable on the coarse m-grid; build the
  // regularized kernel on a fine grid and band-limit it down to m.
  int fine_n = std::max(m, 4096);
  mfl::KernelSpec base = kernel_from_config(cfg, "liouville", fine_n, 1);
  cfg.finish_section("liouville");
  mfl::RegularizedKernel reg = mfl::build_regularized(base, eps, C);
  mfl::KernelSpec kernel = mfl::resample_kernel(reg.smooth, m);

  mfl::GridField rho0 = cosine_density(1, m, amp);
  double mass = rho0.mean();
  for (double& v : rho0.values) v /= mass;

  mfl::LiouvilleState st = mfl::make_liouville(2, 1, m, sigma, &kernel, rho0);
  mfl::PdeState ref;
  ref.rho = rho0;
  ref.sigma = sigma;
  ref.kernel = &kernel;

  std::vector<double> ts, es, ds, is, hs, ks;
  std::vector<std::vector<double>> rows;
  auto record = [&]() {
    auto mref = mfl::make_meanfield_ref(kernel, ref.rho, sigma);
    double h_n = mfl::relative_entropy(st, ref.rho);
    double k_n = mfl::modulated_energy(st, mref);
    double d = mfl::fisher_dissipation(st, mref);
    double i_n = mfl::i_n_functional(st, mref);
    auto ckp = mfl::ckp_check(st, ref.rho);
    ts.push_back(st.t);
    hs.push_back(h_n);
    ks.push_back(k_n);
    es.push_back(h_n + k_n);
    ds.push_back(d);
    is.push_back(i_n);
    rows.push_back({st.t, h_n, k_n, h_n + k_n, d, i_n, ckp.ckp_lhs, ckp.ckp_rhs, ckp.sub_lhs,
                    ckp.sub_rhs});
  };
  record();
  long nsteps = std::lround(T / dt);
  for (long k = 1; k <= nsteps; ++k) {
    mfl::advance_liouville(st, dt);
    mfl::advance(ref, dt);
    if (k % stride == 0 || k == nsteps) record();
  }
  auto master = mfl::master_inequality_check(ts, es, ds, is);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].push_back(master.lhs[k]);
    rows[k].push_back(master.rhs[k]);
  }
  std::string hash = cfg.hash_hex();
  mfl::write_csv(out_path(g, "liouville.csv"), hash,
                 {"t", "H_N", "K_N", "E_N", "D", "I_N", "ckp_lhs", "ckp_rhs", "sub_lhs",
                  "sub_rhs", "master_lhs", "master_rhs"},
                 rows);
  json manifest{{"config_hash", hash},
                {"config", cfg.canonical()},
                {"max_violation", master.max_violation},
                {"floor_events", st.floor_events},
                {"deltas", reg.deltas},
                {"truncated", reg.truncated}};
  write_json(out_path(g, "liouville_manifest.json"), manifest);
  std::cout << "liouville: max master violation " << master.max_violation << "\n";
  return 0;
}

int cmd_regularize(const GlobalOpts& g) {
  auto cfg = load_config(g);
  int n = static_cast<int>(cfg.get_long("regularize.grid_n", 4096));
  int dim = static_cast<int>(cfg.get_long("regularize.dim", 1));
  double eps = cfg.get_double("regularize.eps", 0.1);
  double C = cfg.get_double("regularize.C", 4.0);
  mfl::KernelSpec base = kernel_from_config(cfg, "regularize", n, dim);
  cfg.finish_section("regularize");

  auto reg = mfl::build_regularized(base, eps, C);
  mfl::export_kernel_csv(reg.smooth, out_path(g, "kernel_regularized.csv"));
  json rep{{"config_hash", cfg.hash_hex()},
           {"epsilon", reg.epsilon},
           {"C", reg.C},
           {"M_requested", reg.M_requested},
           {"deltas", reg.deltas},
           {"truncated", reg.truncated},
           {"min_mode", reg.report.min_mode},
           {"l1_distance", reg.report.l1_distance},
           {"max_excess", reg.report.max_excess}};
  for (const auto& [d, v] : reg.report.l1_tail) rep["l1_tail"][mfl::fmt_num(d)] = v;
  for (const auto& [d, v] : reg.report.l1_tail_grad) rep["l1_tail_grad"][mfl::fmt_num(d)] = v;
  write_json(out_path(g, "regularize_report.json"), rep);
  std::cout << "regularize: " << reg.deltas.size() << " scales, min mode " << reg.report.min_mode
            << "\n";
  return 0;
}

int cmd_check_kernel(const GlobalOpts& g) {
  auto cfg = load_config(g);
  mfl::KernelSpec spec;
  std::string import = cfg.get_str("kernel.import", "");
  if (!import.empty()) {
    spec = mfl::import_kernel_csv(import);
  } else {
    int n = static_cast<int>(cfg.get_long("kernel.grid_n", 256));
    int dim = static_cast<int>(cfg.get_long("kernel.dim", 1));
    spec = kernel_from_config(cfg, "kernel", n, dim);
  }
  std::string export_path = cfg.get_str("kernel.export", "");
  cfg.finish_section("kernel");
  if (!export_path.empty()) mfl::export_kernel_csv(spec, export_path);

  auto rep = mfl::check_hypotheses(spec);
  json out{{"config_hash", cfg.hash_hex()}, {"family", mfl::family_name(spec.family)}};
  bool all_ok = true;
  for (const auto& [key, e] : rep.entries) {
    std::string status = e.status == mfl::HypStatus::Pass
                             ? "pass"
                             : (e.status == mfl::HypStatus::Fail ? "fail" : "n/a");
    if (e.status == mfl::HypStatus::Fail) all_ok = false;
    out["hypotheses"][key] = {{"status", status},
                              {"constant", e.constant},
                              {"worst_location", e.worst_location},
                              {"resolution", e.resolution},
                              {"note", e.note}};
  }
  write_json(out_path(g, "kernel_hypotheses.json"), out);
  std::cout << "check-kernel: " << (all_ok ? "all hypotheses pass" : "FAILURES") << "\n";
  return all_ok ? 0 : 1;
}

int cmd_diagnose(const GlobalOpts& g) {
  auto cfg = load_config(g);
  mfl::SimConfig sim;
  sim.N = static_cast<int>(cfg.get_long("diagnose.n_particles", 64));
  sim.d = static_cast<int>(cfg.get_long("diagnose.dim", 1));
  sim.sigma = cfg.get_double("diagnose.sigma", 0.5);
  sim.dt = cfg.get_double("diagnose.dt", 1e-3);
  sim.T = cfg.get_double("diagnose.T", 0.05);
  sim.R = static_cast<int>(cfg.get_long("diagnose.replicas", 50));
  sim.snapshot_stride = static_cast<int>(cfg.get_long("diagnose.snapshot_stride", 10));
  sim.seed = static_cast<std::uint64_t>(g.seed >= 0 ? g.seed : cfg.get_long("diagnose.seed", 0));
  sim.workers =
      static_cast<int>(g.workers >= 0 ? g.workers : cfg.get_long("diagnose.workers", 1));
  int grid_n = static_cast<int>(cfg.get_long("diagnose.grid_n", 256));
  double amp = cfg.get_double("diagnose.init_amp", 0.3);
  double eta = cfg.get_double("diagnose.eta", 0.1);
  double delta = cfg.get_double("diagnose.delta", 0.05);
  sim.init_density = cosine_density(sim.d, grid_n, amp);
  mfl::KernelSpec kernel = kernel_from_config(cfg, "diagnose", grid_n, sim.d);
  sim.kernel = &kernel;
  cfg.finish_section("diagnose");

  mfl::PdeState ref;
  ref.rho = sim.init_density;
  double mass = ref.rho.mean();
  for (double& v : ref.rho.values) v /= mass;
  ref.sigma = sim.sigma;
  ref.kernel = &kernel;

  auto snaps = mfl::run(sim);
  std::vector<std::vector<double>> rows;
  double t_done = 0.0;
  for (const auto& s : snaps) {
    while (t_done + 0.5 * sim.dt < s.t) {
      mfl::advance(ref, sim.dt);
      t_done += sim.dt;
    }
    auto mref = mfl::make_meanfield_ref(kernel, ref.rho, sim.sigma);
    auto k_n = mfl::modulated_energy(s.state, mref);
    auto k_eta = mfl::truncated_energy(s.state, mref, eta);
    auto cp = mfl::close_pair_energy(s.state, kernel, delta);
    auto i_n = mfl::i_n_functional(s.state, mref);
    std::vector<mfl::TorusPoint> pooled;
    for (const auto& xs : s.state.positions) pooled.insert(pooled.end(), xs.begin(), xs.end());
    mfl::GridField marg = mfl::estimate_marginal(pooled, sim.d, grid_n);
    double w1 = mfl::wasserstein1(marg, ref.rho);
    rows.push_back({s.t, k_n.value, k_n.std_error, k_eta.value, k_eta.std_error, cp.value,
                    i_n.value, i_n.std_error, w1, s.min_dist});
  }
  std::string hash = cfg.hash_hex();
  mfl::write_csv(out_path(g, "diagnostics.csv"), hash,
                 {"t", "K_N", "K_N_se", "K_N_eta", "K_N_eta_se", "close_pair", "I_N", "I_N_se",
                  "W1_marginal", "min_dist"},
                 rows);
  json header{{"config_hash", hash}, {"config", cfg.canonical()}, {"seed", sim.seed},
              {"eta", eta},          {"delta", delta},            {"estimator", "replica mean"},
              {"H_N", "not estimated for sampled runs"}};
  write_json(out_path(g, "diagnostics_header.json"), header);
  std::cout << "diagnose: " << rows.size() << " records\n";
  return 0;
}

int cmd_rate_sweep(const GlobalOpts& g) {
  auto cfg = load_config(g);
  mfl::RatePlan plan = mfl::plan_from_config(cfg);
  cfg.finish_section("rate-sweep");
  if (g.seed >= 0) plan.seed = static_cast<std::uint64_t>(g.seed);
  if (g.workers >= 0) plan.workers = static_cast<int>(g.workers);

  auto res = mfl::run_rate_sweep(plan);
  std::vector<std::vector<double>> rows;
  for (const auto& p : res.points)
    rows.push_back({static_cast<double>(p.N), p.distance, p.min_dist,
                    static_cast<double>(p.cap_events)});
  mfl::write_csv(out_path(g, "rate_sweep.csv"), res.config_hash,
                 {"N", "distance", "min_dist", "cap_events"}, rows);
  json fitj{{"config_hash", res.config_hash},
            {"theta", res.fit.theta},
            {"r2", res.fit.r2},
            {"ci_lo", res.fit.ci_lo},
            {"ci_hi", res.fit.ci_hi},
            {"warning", res.fit.warning}};
  write_json(out_path(g, "rate_fit.json"), fitj);
  std::cout << "rate-sweep: theta=" << res.fit.theta << " r2=" << res.fit.r2
            << (res.fit.warning ? " (warning: low R^2)" : "") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field particle laboratory"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--config", g.config_path, "key-value config file");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "override config seed");
  app.add_option("--workers", g.workers, "override worker count");

  auto* sim = app.add_subcommand("simulate", "run the interacting particle SDE");
  auto* pde = app.add_subcommand("solve-pde", "solve the mean-field PDE");
  auto* lio = app.add_subcommand("liouville", "exact N=2 Liouville diagnostics");
  auto* reg = app.add_subcommand("regularize", "build the smoothed kernel");
  auto* chk = app.add_subcommand("check-kernel", "verify kernel hypotheses");
  auto* dia = app.add_subcommand("diagnose", "modulated-energy diagnostics of a run");
  auto* rate = app.add_subcommand("rate-sweep", "N-rate convergence study");
  auto* plot = app.add_subcommand("emit-plot-data", "convert a CSV to long plot format");
  std::string plot_in, plot_out;
  plot->add_option("--in", plot_in, "input CSV")->required();
  plot->add_option("--out", plot_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed()) return cmd_simulate(g);
    if (pde->parsed()) return cmd_solve_pde(g);
    if (lio->parsed()) return cmd_liouville(g);
    if (reg->parsed()) return cmd_regularize(g);
    if (chk->parsed()) return cmd_check_kernel(g);
    if (dia->parsed()) return cmd_diagnose(g);
    if (rate->parsed()) return cmd_rate_sweep(g);
    if (plot->parsed()) {
      mfl::emit_plot_data(plot_in, plot_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
