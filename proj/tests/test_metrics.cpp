#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sbd/config.hpp"
#include "sbd/experiments.hpp"
#include "sbd/metrics.hpp"

using namespace sbd;

TEST_CASE("nmse / psnr: sentinels and trivial values") {
  Rng rng = make_stream(70, 0);
  const Vec t = gaussian_vec(8, rng);
  CHECK(nmse(t, t) == 0.0);
  CHECK(std::isinf(psnr(t, t, 1.0)));
  CHECK(nmse(Vec::Zero(8), t) == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)nmse(t, Vec::Zero(8)), std::domain_error);
}

TEST_CASE("nmse / psnr: dual re-implementation agreement") {
  Rng rng = make_stream(70, 1);
  for (int k = 0; k < 20; ++k) {
    const Vec e = gaussian_vec(16, rng), t = gaussian_vec(16, rng);
    double num = 0.0, den = 0.0, mse = 0.0;
    for (int i = 0; i < 16; ++i) {
      num += (e[i] - t[i]) * (e[i] - t[i]);
      den += t[i] * t[i];
      mse += (e[i] - t[i]) * (e[i] - t[i]) / 16.0;
    }
    CHECK(std::abs(nmse(e, t) - num / den) < 1e-12);
    CHECK(std::abs(psnr(e, t, 2.0) - 10.0 * std::log10(4.0 / mse)) < 1e-12);
  }
}

TEST_CASE("gcnr: identical, disjoint, and Gaussian-overlap values") {
  Rng rng = make_stream(70, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a, b, c, d;
  for (int k = 0; k < 100000; ++k) {
    const double v = normal(rng);
    a.push_back(v);
    b.push_back(v);           // identical distribution (same draws)
    c.push_back(v + 3.0);     // N(3, 1)
    d.push_back(normal(rng)); // independent N(0, 1)
  }
  CHECK(gcnr(a, b) < 0.02);
  std::vector<double> lo{0.0, 0.1, 0.2}, hi{10.0, 10.1, 10.2};
  CHECK(gcnr(lo, hi) == doctest::Approx(1.0));
  // analytic overlap of N(0,1) vs N(3,1): 2 Phi(-1.5), gcnr = 0.8664
  const double expected = 1.0 - 2.0 * 0.5 * std::erfc(1.5 / std::sqrt(2.0));
  CHECK(std::abs(gcnr(d, c, 256) - expected) < 0.01);
}

TEST_CASE("gcnr: bounds, symmetry, and degenerate regions") {
  Rng rng = make_stream(70, 3);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a, b;
    for (int i = 0; i < 64; ++i) a.push_back(unif(rng));
    for (int i = 0; i < 48; ++i) b.push_back(unif(rng));
    const double g1 = gcnr(a, b), g2 = gcnr(b, a);
    CHECK(g1 >= 0.0);
    CHECK(g1 <= 1.0);
    CHECK(g1 == doctest::Approx(g2).epsilon(1e-12));
  }
  std::vector<double> same_a{0.5, 0.5}, same_b{0.5, 0.5, 0.5};
  CHECK(gcnr(same_a, same_b) == 0.0);  // single shared value -> full overlap
  std::vector<double> va{0.5, 0.5}, vb{1.5, 1.5};
  CHECK(gcnr(va, vb) == 1.0);
}

TEST_CASE("noise_floor: exponential-median correction recovers sigma^2 in dB") {
  Rng rng = make_stream(70, 4);
  const double sigma = 0.35;
  const int n = 10000;
  CVec profile(n);
  std::normal_distribution<double> normal(0.0, sigma / std::sqrt(2.0));
  for (int i = 0; i < n; ++i) profile[i] = {normal(rng), normal(rng)};
  const double floor = noise_floor_db(profile, {});
  CHECK(std::abs(floor - 10.0 * std::log10(sigma * sigma)) < 0.5);
}

TEST_CASE("noise_floor: sentinels, bin exclusion, interference monotonicity") {
  CVec zeros = CVec::Zero(64);
  CHECK(std::isinf(noise_floor_db(zeros, {})));
  CHECK(noise_floor_db(zeros, {}) < 0.0);

  Rng rng = make_stream(70, 5);
  CVec profile(64);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (int i = 0; i < 64; ++i) profile[i] = {normal(rng), normal(rng)};
  profile[5] = {30.0, 0.0};
  const double with_exclusion = noise_floor_db(profile, {5});
  CHECK(with_exclusion < 0.0);

  std::vector<int> all(64);
  for (int i = 0; i < 64; ++i) all[i] = i;
  CHECK_THROWS_AS((void)noise_floor_db(profile, all), std::domain_error);

  CVec contaminated = profile;
  for (int i = 0; i < 32; ++i) contaminated[i] += std::complex<double>(1.0, 0.0);
  CHECK(noise_floor_db(contaminated, {5}) > with_exclusion);
}

TEST_CASE("csv: write/read round trip and deterministic aggregation") {
  const std::string path = (std::filesystem::temp_directory_path() / "sbd_metrics.csv").string();
  MetricTable table;
  table.columns = {"seed", "nmse", "floor_db"};
  table.rows = {{1, 0.125, -31.7}, {2, 0.25, -29.4}, {3, 0.0625, -35.0}};
  write_csv(path, table);
  const MetricTable back = read_csv(path);
  REQUIRE(back.columns == table.columns);
  REQUIRE(back.rows.size() == table.rows.size());
  for (size_t r = 0; r < table.rows.size(); ++r)
    for (size_t c = 0; c < table.columns.size(); ++c)
      CHECK(back.rows[r][c] == table.rows[r][c]);  // %.17g round trips exactly

  const MetricTable agg1 = aggregate_table(table);
  const MetricTable agg2 = aggregate_table(back);
  for (size_t r = 0; r < agg1.rows.size(); ++r)
    for (size_t c = 0; c < agg1.columns.size(); ++c)
      CHECK(agg1.rows[r][c] == agg2.rows[r][c]);
  std::filesystem::remove(path);
}

TEST_CASE("config: schema validation and unknown keys") {
  const ConfigSchema schema{
      {"sampler.steps", {FieldType::kInt, "200"}},
      {"sampler.zeta", {FieldType::kReal, "1.0"}},
      {"scenario.kind", {FieldType::kString, "radar"}},
      {"scenario.companded", {FieldType::kBool, "false"}},
  };
  const Config cfg = Config::from_string(
      "# comment\nsampler.steps = 64\nscenario.companded = true\n", schema);
  CHECK(cfg.get_int("sampler.steps") == 64);
  CHECK(cfg.get_real("sampler.zeta") == 1.0);  // default
  CHECK(cfg.get_string("scenario.kind") == "radar");
  CHECK(cfg.get_bool("scenario.companded"));

  try {
    (void)Config::from_string("sampler.stepz = 64\n", schema);
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(e.field() == "sampler.stepz");
    CHECK(std::string(e.what()).find("sampler.stepz") != std::string::npos);
  }
  CHECK_THROWS_AS((void)Config::from_string("sampler.steps = abc\n", schema), ConfigError);
  CHECK_THROWS_AS((void)Config::from_string("sampler.steps : 3\n", schema), ConfigError);
}
