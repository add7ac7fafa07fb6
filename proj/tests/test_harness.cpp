#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "meanfield/harness.hpp"

using namespace mfl;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing: sections, types, fail-fast") {
  auto cfg = KeyValueConfig::from_string(
      "top = 1\n[sim]\nn_particles = 32\nsigma = 0.5\nn_list = 16,64,256\n");
  CHECK(cfg.get_long("top", 0) == 1);
  CHECK(cfg.get_long("sim.n_particles", 0) == 32);
  CHECK(cfg.get_double("sim.sigma", 0.0) == doctest::Approx(0.5));
  auto lst = cfg.get_long_list("sim.n_list", "");
  REQUIRE(lst.size() == 3);
  CHECK(lst[2] == 256);
  CHECK_NOTHROW(cfg.finish());

  auto cfg2 = KeyValueConfig::from_string("[sim]\nunknown_key = 3\n");
  CHECK_THROWS(cfg2.finish());

  CHECK_THROWS(KeyValueConfig::from_string("[s]\na = 1\na = 2\n"));
  CHECK_THROWS(KeyValueConfig::from_string("[s]\nnot_key_value\n"));
  auto cfg3 = KeyValueConfig::from_string("[s]\npresent = 1\n");
  CHECK_THROWS(cfg3.require_str("s.absent"));
}

TEST_CASE("canonical serialization and hashing") {
  auto a = KeyValueConfig::from_string("[b]\ny = 2\n[a]\nx = 1\n");
  auto b = KeyValueConfig::from_string("[a]\nx = 1\n[b]\ny = 2\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash_hex() == b.hash_hex());
  CHECK(a.hash_hex().size() == 16);
  b.set("a.x", "3");
  CHECK(a.hash_hex() != b.hash_hex());
}

TEST_CASE("fmt_num round trips doubles") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456.789, -2.5e300}) {
    CHECK(std::stod(fmt_num(v)) == v);
  }
}

TEST_CASE("rate fit recovers a clean power law") {
  std::vector<double> ns{16, 32, 64, 128, 256}, ds;
  for (double n : ns) ds.push_back(2.0 * std::pow(n, -0.5));
  auto fit = fit_rate(ns, ds);
  CHECK(fit.theta == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_FALSE(fit.warning);
  CHECK(fit.ci_lo <= 0.5);
  CHECK(fit.ci_hi >= 0.5);

  CHECK_THROWS(fit_rate({16, 32}, {1.0, 0.5}));  // needs >= 3 points
}

TEST_CASE("marginal estimation from pooled samples") {
  std::vector<TorusPoint> pts;
  for (int i = 0; i < 4096; ++i) pts.push_back({(i + 0.5) / 4096.0, 0.0});
  auto est = estimate_marginal(pts, 1, 64);
  CHECK(est.mean() == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : est.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("CSV writing and plot-data emission are deterministic") {
  auto dir = std::filesystem::temp_directory_path();
  auto csv = dir / "mfl_test.csv";
  auto csv2 = dir / "mfl_test2.csv";
  auto longf = dir / "mfl_test_long.csv";

  std::vector<std::string> cols{"N", "distance"};
  std::vector<std::vector<double>> rows{{16.0, 0.5}, {64.0, 0.25}};
  write_csv(csv.string(), "deadbeef00000000", cols, rows);
  write_csv(csv2.string(), "deadbeef00000000", cols, rows);
  auto text = slurp(csv);
  CHECK(text == slurp(csv2));
  CHECK(text.rfind("# config_hash,deadbeef00000000", 0) == 0);
  CHECK(text.find("N,distance") != std::string::npos);

  emit_plot_data(csv.string(), longf.string());
  auto lt = slurp(longf);
  CHECK(lt.find("row,series,value") != std::string::npos);
  CHECK(lt.find("distance") != std::string::npos);
  CHECK(lt.find("# config_hash,deadbeef00000000") != std::string::npos);

  std::filesystem::remove(csv);
  std::filesystem::remove(csv2);
  std::filesystem::remove(longf);
}

TEST_CASE("rate plan parsing") {
  auto cfg = KeyValueConfig::from_string(
      "[rate-sweep]\nn_list = 16,32,64\nreplicas = 10\nsigma = 0.5\ndt = 0.001\nT = 0.05\n"
      "grid_n = 128\nkernel = periodic-log\nbranch = w1\nseed = 9\n");
  auto plan = plan_from_config(cfg);
  CHECK(plan.n_list.size() == 3);
  CHECK(plan.R == 10);
  CHECK(plan.grid_n == 128);
  CHECK(plan.seed == 9);
  CHECK(plan.branch == DistanceBranch::W1);
  CHECK_FALSE(plan.config_hash.empty());
}
