// Experiment orchestration: key-value config files, the N-rate sweep with its
// log-log fit, marginal estimation from pooled particles, and deterministic
// CSV emission (every file carries the config hash that produced it).
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meanfield/kernels.hpp"
#include "meanfield/particle_sim.hpp"
#include "meanfield/torus.hpp"

namespace mfl {

// Flat key-value config with [section] headers; keys are stored as
// "section.key". Reads are tracked so unconsumed (unknown) keys fail fast.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback);
  std::string require_str(const std::string& key);
  double get_double(const std::string& key, double fallback);
  long get_long(const std::string& key, long fallback);
  std::vector<long> get_long_list(const std::string& key, const std::string& fallback);

  // Throws listing every key never read (fail-fast on unknown keys).
  void finish() const;
  // Same check restricted to one "section." prefix plus unsectioned keys.
  void finish_section(const std::string& section) const;

  // Sorted canonical serialization and its FNV-1a hash (hex).
  std::string canonical() const;
  std::string hash_hex() const;

  void set(const std::string& key, const std::string& value);

 private:
  std::map<std::string, std::string> kv_;
  mutable std::map<std::string, bool> read_;
};

std::uint64_t fnv1a64(const std::string& s);

// Deterministic shortest-roundtrip double formatting for CSV output.
std::string fmt_num(double v);

struct RateFit {
  std::vector<double> n_values;
  std::vector<double> distances;
  double theta = 0.0;  // fitted decay exponent (distance ~ N^-theta)
  double r2 = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95% interval on theta
  bool warning = false;             // R^2 < 0.5
};

RateFit fit_rate(const std::vector<double>& n_values, const std::vector<double>& distances);

// Histogram of pooled particles on the n-grid followed by one mollification
// pass (autocorrelation profile, bandwidth 2h). Unit mean.
GridField estimate_marginal(std::span<const TorusPoint> particles, int dim, int n);

enum class DistanceBranch { W1, SmoothedL1 };

struct RatePlan {
  std::vector<int> n_list;
  int R = 100;
  int dim = 1;
  double sigma = 0.5;
  bool vanishing_sigma = false;
  double beta = 0.0;
  double dt = 1e-3;
  double T = 0.1;
  int grid_n = 256;
  KernelFamily family = KernelFamily::CosineTest;
  bool has_kernel = true;
  double kernel_param = 0.5;
  double init_amp = 0.3;  // init density 1 + amp cos(2 pi x1)
  DistanceBranch branch = DistanceBranch::W1;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string config_hash;
};

// Reads the [rate-sweep] section; errors on malformed or missing keys.
RatePlan plan_from_config(KeyValueConfig& cfg);

struct RatePoint {
  int N = 0;
  double distance = 0.0;
  double min_dist = 0.0;   // over all replicas at final time
  long cap_events = 0;
};

struct RateSweepResult {
  RateFit fit;
  std::vector<RatePoint> points;
  GridField rhobar_final;
  std::string config_hash;
};

RateSweepResult run_rate_sweep(const RatePlan& plan);

// CSV with "# config_hash,<hex>" first, then a header row and numeric rows.
void write_csv(const std::string& path, const std::string& config_hash,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

// Wide CSV -> long (row, column, value) format; comment lines preserved.
void emit_plot_data(const std::string& in_path, const std::string& out_path);

}  // namespace mfl
