#include "meanfield/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "meanfield/diagnostics.hpp"
#include "meanfield/meanfield_pde.hpp"
#include "meanfield/regularizer.hpp"
#include "meanfield/rng.hpp"

namespace mfl {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const MollifierSpec& cached_mollifier(int dim) {
  static std::mutex mu;
  static std::map<int, MollifierSpec> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(dim);
  if (it == cache.end()) it = cache.emplace(dim, make_mollifier(dim)).first;
  return it->second;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.kv_.count(full)) throw std::runtime_error("config: duplicate key " + full);
    cfg.kv_[full] = value;
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KeyValueConfig::get_str(const std::string& key, const std::string& fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  read_[key] = true;
  return it->second;
}

std::string KeyValueConfig::require_str(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("config: missing required key " + key);
  read_[key] = true;
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  read_[key] = true;
  return std::stod(it->second);
}

long KeyValueConfig::get_long(const std::string& key, long fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  read_[key] = true;
  return std::stol(it->second);
}

std::vector<long> KeyValueConfig::get_long_list(const std::string& key,
                                                const std::string& fallback) {
  std::string raw = get_str(key, fallback);
  std::vector<long> out;
  std::istringstream ss(raw);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stol(tok));
  }
  if (out.empty()) throw std::runtime_error("config: empty list for key " + key);
  return out;
}

void KeyValueConfig::finish() const {
  std::string unknown;
  for (const auto& [k, v] : kv_)
    if (!read_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw std::runtime_error("config: unknown keys: " + unknown);
}

void KeyValueConfig::finish_section(const std::string& section) const {
  std::string prefix = section + ".";
  std::string unknown;
  for (const auto& [k, v] : kv_) {
    bool relevant = k.rfind(prefix, 0) == 0 || k.find('.') == std::string::npos;
    if (relevant && !read_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw std::runtime_error("config: unknown keys: " + unknown);
}

std::string KeyValueConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
  return out;
}

std::string KeyValueConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RateFit fit_rate(const std::vector<double>& n_values, const std::vector<double>& distances) {
  if (n_values.size() != distances.size() || n_values.size() < 3)
    throw std::invalid_argument("fit_rate: need at least 3 sweep points");
  RateFit fit;
  fit.n_values = n_values;
  fit.distances = distances;
  auto m = static_cast<double>(n_values.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::vector<double> xs(n_values.size()), ys(n_values.size());
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (!(distances[i] > 0.0)) throw std::invalid_argument("fit_rate: nonpositive distance");
    xs[i] = std::log(n_values[i]);
    ys[i] = std::log(distances[i]);
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double sxx_c = sxx - sx * sx / m;
  double slope = (sxy - sx * sy / m) / sxx_c;
  double intercept = (sy - slope * sx) / m;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - (intercept + slope * xs[i]);
    ss_res += r * r;
    double d = ys[i] - sy / m;
    ss_tot += d * d;
  }
  fit.theta = -slope;
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  double se = std::sqrt(ss_res / (m - 2.0) / sxx_c);
  fit.ci_lo = fit.theta - 1.96 * se;
  fit.ci_hi = fit.theta + 1.96 * se;
  fit.warning = fit.r2 < 0.5;
  return fit;
}

GridField estimate_marginal(std::span<const TorusPoint> particles, int dim, int n) {
  if (particles.empty()) throw std::invalid_argument("estimate_marginal: no particles");
  GridField hist(dim, n, 0.0);
  double unit = std::pow(static_cast<double>(n), dim) / static_cast<double>(particles.size());
  for (const auto& p : particles) {
    int i = static_cast<int>(wrap1(p[0]) * n) % n;
    if (dim == 1) {
      hist.at(i) += unit;
    } else {
      int j = static_cast<int>(wrap1(p[1]) * n) % n;
      hist.at(i, j) += unit;
    }
  }
  // One mollification pass at bandwidth 2h.
  const MollifierSpec& moll = cached_mollifier(dim);
  SpectralCoeffs c = forward_transform(hist);
  double bw = 2.0 / n;
  for (std::size_t j = 0; j < c.size(); ++j)
    c.modes[j] *= moll.khat(bw * std::sqrt(c.mode_norm2(j)));
  return inverse_transform(c);
}

RatePlan plan_from_config(KeyValueConfig& cfg) {
  RatePlan plan;
  plan.n_list.clear();
  for (long n : cfg.get_long_list("rate-sweep.n_list", "16,32,64,128,256"))
    plan.n_list.push_back(static_cast<int>(n));
  plan.R = static_cast<int>(cfg.get_long("rate-sweep.replicas", 100));
  plan.dim = static_cast<int>(cfg.get_long("rate-sweep.dim", 1));
  plan.sigma = cfg.get_double("rate-sweep.sigma", 0.5);
  plan.vanishing_sigma = cfg.get_long("rate-sweep.vanishing_sigma", 0) != 0;
  plan.beta = cfg.get_double("rate-sweep.beta", 0.0);
  plan.dt = cfg.get_double("rate-sweep.dt", 1e-3);
  plan.T = cfg.get_double("rate-sweep.T", 0.1);
  plan.grid_n = static_cast<int>(cfg.get_long("rate-sweep.grid_n", 256));
  std::string fam = cfg.get_str("rate-sweep.kernel", "periodic-log");
  plan.has_kernel = fam != "none";
  if (plan.has_kernel) plan.family = family_from_name(fam);
  plan.kernel_param = cfg.get_double("rate-sweep.kernel_param", 0.5);
  plan.init_amp = cfg.get_double("rate-sweep.init_amp", 0.3);
  std::string branch = cfg.get_str("rate-sweep.branch", "w1");
  if (branch == "w1") {
    plan.branch = DistanceBranch::W1;
  } else if (branch == "l1") {
    plan.branch = DistanceBranch::SmoothedL1;
  } else {
    throw std::runtime_error("config: rate-sweep.branch must be w1 or l1");
  }
  plan.seed = static_cast<std::uint64_t>(cfg.get_long("rate-sweep.seed", 0));
  plan.workers = static_cast<int>(cfg.get_long("rate-sweep.workers", 1));
  plan.config_hash = cfg.hash_hex();
  if (plan.n_list.size() < 3) throw std::runtime_error("config: rate-sweep needs >= 3 N values");
  return plan;
}

RateSweepResult run_rate_sweep(const RatePlan& plan) {
  RateSweepResult res;
  res.config_hash = plan.config_hash;

  KernelSpec kernel;
  if (plan.has_kernel) {
    BuildParams bp;
    bp.s = plan.kernel_param;
    bp.lambda = plan.kernel_param;
    kernel = build_kernel(plan.family, bp, plan.grid_n, plan.dim);
  }

  GridField rho0(plan.dim, plan.grid_n, 1.0);
  for (std::size_t j = 0; j < rho0.size(); ++j)
    rho0.values[j] += plan.init_amp * std::cos(2.0 * M_PI * rho0.point(j)[0]);

  // Mean-field reference, solved once on the finest grid.
  PdeState pde;
  pde.rho = rho0;
  pde.sigma = plan.sigma;
  pde.kernel = plan.has_kernel ? &kernel : nullptr;
  long nsteps = std::lround(plan.T / plan.dt);
  for (long k = 0; k < nsteps; ++k) advance(pde, plan.dt);
  res.rhobar_final = pde.rho;

  std::vector<double> n_values, distances;
  for (int N : plan.n_list) {
    SimConfig sim;
    sim.N = N;
    sim.d = plan.dim;
    sim.sigma = plan.sigma;
    sim.vanishing_sigma = plan.vanishing_sigma;
    sim.beta = plan.beta;
    sim.dt = plan.dt;
    sim.T = plan.T;
    sim.R = plan.R;
    sim.seed = mix64(plan.seed ^ static_cast<std::uint64_t>(N));
    sim.kernel = plan.has_kernel ? &kernel : nullptr;
    sim.init = InitLaw::Density;
    sim.init_density = rho0;
    sim.snapshot_stride = static_cast<int>(std::max(1L, nsteps));
    sim.workers = plan.workers;

    auto snaps = run(sim);
    const Snapshot& last = snaps.back();

    std::vector<TorusPoint> pooled;
    pooled.reserve(static_cast<std::size_t>(N) * static_cast<std::size_t>(plan.R));
    for (const auto& xs : last.state.positions) pooled.insert(pooled.end(), xs.begin(), xs.end());
    GridField est = estimate_marginal(pooled, plan.dim, plan.grid_n);

    double dist;
    if (plan.branch == DistanceBranch::W1) {
      dist = wasserstein1(est, res.rhobar_final);
    } else {
      const MollifierSpec& moll = cached_mollifier(plan.dim);
      SpectralCoeffs c = forward_transform(res.rhobar_final);
      double bw = 2.0 / plan.grid_n;
      for (std::size_t j = 0; j < c.size(); ++j)
        c.modes[j] *= moll.khat(bw * std::sqrt(c.mode_norm2(j)));
      GridField ref = inverse_transform(c);
      double acc = 0.0;
      for (std::size_t j = 0; j < ref.size(); ++j)
        acc += std::abs(est.values[j] - ref.values[j]);
      dist = acc / static_cast<double>(ref.size());
    }

    RatePoint pt;
    pt.N = N;
    pt.distance = dist;
    pt.min_dist = last.min_dist;
    for (auto c : last.state.cap_events) pt.cap_events += static_cast<long>(c);
    res.points.push_back(pt);
    n_values.push_back(static_cast<double>(N));
    distances.push_back(dist);
  }
  res.fit = fit_rate(n_values, distances);
  return res;
}

void write_csv(const std::string& path, const std::string& config_hash,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << "# config_hash," << config_hash << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw std::invalid_argument("write_csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt_num(row[i]);
    out << "\n";
  }
}

void emit_plot_data(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("emit_plot_data: cannot open " + in_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("emit_plot_data: cannot open " + out_path);

  std::string line;
  std::vector<std::string> columns;
  long row_index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      out << line << "\n";
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (columns.empty()) {
      columns = cells;
      out << "row,series,value\n";
      continue;
    }
    if (cells.size() != columns.size())
      throw std::runtime_error("emit_plot_data: ragged row in " + in_path);
    for (std::size_t i = 0; i < cells.size(); ++i)
      out << row_index << "," << columns[i] << "," << cells[i] << "\n";
    ++row_index;
  }
}

}  // namespace mfl
