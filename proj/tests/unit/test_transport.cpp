#include <cmath>
#include <cstring>
#include <optional>
#include <vector>

#include "bhc/model.hpp"
#include "bhc/transport.hpp"
#include "doctest.h"

using namespace bhc;

namespace {

/// Single-site synthetic series with a prescribed variance (and mean) law.
MomentSeries synthetic_series(const std::vector<double>& times,
                              double (*variance_law)(double),
                              double (*mean_law)(double) = nullptr) {
  MomentSeries s;
  s.times = times;
  const int n = static_cast<int>(times.size());
  s.mean = Eigen::MatrixXd::Zero(n, 1);
  s.variance = Eigen::MatrixXd::Zero(n, 1);
  s.se_mean = Eigen::MatrixXd::Zero(n, 1);
  s.se_var = Eigen::MatrixXd::Zero(n, 1);
  s.n_orbits = 2;
  for (int i = 0; i < n; ++i) {
    s.variance(i, 0) = variance_law(times[i]);
    s.mean(i, 0) = mean_law ? mean_law(times[i]) : 0.0;
  }
  return s;
}

EnsembleSpec base_spec(std::uint64_t seed = 424242) {
  EnsembleSpec spec;
  spec.filled = {2, 7};
  spec.width = 1e-3;
  spec.n_orbits = 16;
  spec.seed = seed;
  spec.save_times = {0.05, 0.1};
  return spec;
}

}  // namespace

TEST_CASE("geometric save schedule covers the requested range") {
  const std::vector<double> t = log_spaced_times(1e-2, 1.0, 16);
  REQUIRE(t.size() == 33);  // two decades at 16 per decade, endpoints inclusive
  CHECK(t.front() == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK(t.back() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < t.size(); ++i) {
    CHECK(t[i] > t[i - 1]);
    CHECK(t[i] / t[i - 1] == doctest::Approx(std::pow(10.0, 1.0 / 16)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(log_spaced_times(0.0, 1.0, 16), ConfigError);
  CHECK_THROWS_AS(log_spaced_times(1.0, 0.5, 16), ConfigError);
  CHECK_THROWS_AS(log_spaced_times(1e-2, 1.0, 0), ConfigError);
}

TEST_CASE("log-log fit recovers exact power laws") {
  const std::vector<double> t = log_spaced_times(1e-2, 1e2, 16);
  const MomentSeries quartic =
      synthetic_series(t, [](double x) { return 3.0 * x * x * x * x; });
  ExponentFit f4 = fit_exponent(quartic, 0, MomentKind::Variance, {1e-2, 1e2});
  CHECK(f4.slope == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(f4.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-8));
  CHECK(f4.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f4.n_points == static_cast<int>(t.size()));

  const MomentSeries linear = synthetic_series(t, [](double x) { return 0.5 * x; });
  ExponentFit f1 = fit_exponent(linear, 0, MomentKind::Variance, {1e-2, 1e2});
  CHECK(f1.slope == doctest::Approx(1.0).epsilon(1e-10));

  // Mean-channel fit uses |mean|.
  const MomentSeries mseries = synthetic_series(
      t, [](double) { return 1.0; }, [](double x) { return 2.0 * x * x; });
  ExponentFit fm = fit_exponent(mseries, 0, MomentKind::Mean, {1e-2, 1e2});
  CHECK(fm.slope == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("fit respects the window and the moment floor") {
  const std::vector<double> t = log_spaced_times(1e-2, 1e2, 16);
  // Piecewise law: t^4 below 1, t^1 above.
  const MomentSeries s = synthetic_series(
      t, [](double x) { return x < 1.0 ? x * x * x * x : x; });
  ExponentFit lo = fit_exponent(s, 0, MomentKind::Variance, {1e-2, 0.9});
  ExponentFit hi = fit_exponent(s, 0, MomentKind::Variance, {1.5, 1e2});
  CHECK(lo.slope == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(hi.slope == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(lo.window.t_min == doctest::Approx(1e-2));
  CHECK(lo.window.t_max == doctest::Approx(0.9));

  // All-zero variance: every point sits below the floor.
  const MomentSeries flat = synthetic_series(t, [](double) { return 0.0; });
  CHECK_THROWS_AS(fit_exponent(flat, 0, MomentKind::Variance, {1e-2, 1e2}),
                  WindowError);
  // Window containing too few samples.
  CHECK_THROWS_AS(fit_exponent(s, 0, MomentKind::Variance, {1e-2, 1.5e-2}),
                  WindowError);
  CHECK_THROWS_AS(fit_exponent(s, 0, MomentKind::Variance, {0.5, 0.1}), WindowError);
  CHECK_THROWS_AS(fit_exponent(s, 5, MomentKind::Variance, {1e-2, 1e2}),
                  ValidationError);
}

TEST_CASE("ladder rung values") {
  CHECK(ladder_rung(LadderKind::Variance4m, 0) == 0);
  CHECK(ladder_rung(LadderKind::Variance4m, 1) == 4);
  CHECK(ladder_rung(LadderKind::Variance4m, 2) == 8);
  CHECK(ladder_rung(LadderKind::Variance4m, 3) == 12);
  CHECK(ladder_rung(LadderKind::Variance2m, 2) == 4);
  CHECK(ladder_rung(LadderKind::MeanLadder, 0) == 0);
  CHECK(ladder_rung(LadderKind::MeanLadder, 1) == 0);
  CHECK(ladder_rung(LadderKind::MeanLadder, 2) == 2);
  CHECK(ladder_rung(LadderKind::MeanLadder, 3) == 4);
  CHECK_THROWS_AS(ladder_rung(LadderKind::Variance4m, -1), ValidationError);
}

TEST_CASE("classification tags slopes near a rung and rejects the rest") {
  const std::vector<double> t = log_spaced_times(1e-2, 1e2, 16);
  auto fit_of = [&](double (*law)(double), LadderKind ladder) {
    return fit_exponent(synthetic_series(t, law), 0, MomentKind::Variance,
                        {1e-2, 1e2}, ladder);
  };
  // Slope 4.1 vs rung 4 (tolerance 0.6): classified.
  ExponentFit a = classify_ladder(
      fit_of([](double x) { return std::pow(x, 4.1); }, LadderKind::Variance4m), 1);
  REQUIRE(a.classified.has_value());
  CHECK(*a.classified == 4);
  // Slope 0.05 vs the zero rung (absolute tolerance 0.3): classified flat.
  ExponentFit b = classify_ladder(
      fit_of([](double x) { return std::pow(x, 0.05); }, LadderKind::Variance4m), 0);
  REQUIRE(b.classified.has_value());
  CHECK(*b.classified == 0);
  // Slope 2.9 sits between rungs of the 4m ladder: unclassified.
  ExponentFit c = classify_ladder(
      fit_of([](double x) { return std::pow(x, 2.9); }, LadderKind::Variance4m), 1);
  CHECK(!c.classified.has_value());
  // The same slope 2.1 against the 2m ladder lands on rung 2.
  ExponentFit d = classify_ladder(
      fit_of([](double x) { return std::pow(x, 2.1); }, LadderKind::Variance2m), 1);
  REQUIRE(d.classified.has_value());
  CHECK(*d.classified == 2);
}

TEST_CASE("a noisy slope near a rung still needs a good fit quality") {
  const std::vector<double> t = log_spaced_times(1.0, 1e2, 24);
  // Slope ~4 on average, but with large log-space oscillation.
  const MomentSeries s = synthetic_series(t, [](double x) {
    return std::pow(x, 4.0) * std::exp(2.0 * std::sin(7.0 * std::log(x)));
  });
  ExponentFit f = fit_exponent(s, 0, MomentKind::Variance, {1.0, 1e2});
  REQUIRE(f.r2 < 0.98);  // the synthetic really is noisy
  f = classify_ladder(f, 1);
  CHECK(!f.classified.has_value());
}

TEST_CASE("crossover detection finds the knee of a saturating power law") {
  const std::vector<double> t = log_spaced_times(1e-2, 1e2, 16);
  // v = t^4 / (1 + t^3): local slope 4 at early times, 1 late; knee near t = 1.
  const MomentSeries s = synthetic_series(
      t, [](double x) { return std::pow(x, 4) / (1.0 + std::pow(x, 3)); });
  const std::optional<double> tc = detect_crossover(s, 0);
  REQUIRE(tc.has_value());
  CHECK(*tc > 1.0 / 3.0);
  CHECK(*tc < 3.0);
  // Pure power laws never cross over.
  CHECK(!detect_crossover(
             synthetic_series(t, [](double x) { return std::pow(x, 4); }), 0)
             .has_value());
  CHECK(!detect_crossover(synthetic_series(t, [](double x) { return x; }), 0)
             .has_value());
}

TEST_CASE("ensemble validation rejects malformed specifications") {
  const Lattice lat = build_lattice(1, {10});
  EnsembleSpec s = base_spec();
  CHECK_NOTHROW(s.validate(lat));
  s.filled = {};
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.filled = {2, 10};  // out of range
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.filled = {2, 2};
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.weights = {1.0};  // one weight for two sites
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.width = 0.0;
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.n_orbits = 1;
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.save_times = {0.2, 0.1};
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
  s = base_spec();
  s.save_times.clear();
  CHECK_THROWS_AS(s.validate(lat), ValidationError);
}

TEST_CASE("sampled orbits concentrate weight on the filled sites") {
  const Lattice lat = build_lattice(1, {10});
  EnsembleSpec spec = base_spec();
  double filled_min = 1.0, empty_max = 0.0;
  for (int k = 0; k < 16; ++k) {
    const FieldState s = sample_orbit(spec, lat, k);
    const Eigen::VectorXd I = s.occupations();
    CHECK(I.sum() == doctest::Approx(1.0).epsilon(1e-12));
    filled_min = std::min({filled_min, I[2], I[7]});
    for (int j = 0; j < 10; ++j)
      if (j != 2 && j != 7) empty_max = std::max(empty_max, I[j]);
  }
  CHECK(filled_min > 0.5 - 1e-2);       // half the norm each, up to the kick
  CHECK(empty_max < 1e-4);              // empty sites receive O(width^2)
  // Determinism in (seed, orbit index).
  const FieldState a = sample_orbit(spec, lat, 3);
  const FieldState b = sample_orbit(spec, lat, 3);
  CHECK((a.amplitudes() - b.amplitudes()).norm() == 0.0);
  const FieldState c = sample_orbit(spec, lat, 4);
  CHECK((a.amplitudes() - c.amplitudes()).norm() > 0.0);
  // A different master seed moves every orbit.
  EnsembleSpec spec2 = base_spec(7);
  const FieldState d = sample_orbit(spec2, lat, 3);
  CHECK((a.amplitudes() - d.amplitudes()).norm() > 0.0);
}

TEST_CASE("per-site weights control the initial norm split") {
  const Lattice lat = build_lattice(1, {6});
  EnsembleSpec spec;
  spec.filled = {1, 4};
  spec.weights = {0.3, 0.7};
  spec.width = 1e-5;
  spec.n_orbits = 4;
  spec.seed = 99;
  spec.save_times = {0.1};
  const FieldState s = sample_orbit(spec, lat, 0);
  CHECK(s.occupations()[1] == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(s.occupations()[4] == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("sampling renormalizes even when the kick dwarfs the base state") {
  const Lattice lat = build_lattice(1, {4});
  EnsembleSpec spec;
  spec.filled = {0};
  spec.width = 1e6;
  spec.n_orbits = 4;
  spec.seed = 5;
  spec.save_times = {0.1};
  for (int k = 0; k < 8; ++k) {
    const FieldState s = sample_orbit(spec, lat, k);
    CHECK(s.occupations().sum() == doctest::Approx(1.0).epsilon(1e-12));
    // The intended concentration on the filled site is gone: noise dominates.
    CHECK(s.occupations()[0] < 0.99);
  }
}

TEST_CASE("moment reduction is byte-identical across thread counts") {
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  EnsembleSpec spec;
  spec.filled = {1, 4};
  spec.width = 1e-3;
  spec.n_orbits = 8;
  spec.seed = 31415;
  spec.save_times = {0.02, 0.05, 0.1};
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 0.1;
  const MomentSeries s1 = run_ensemble(spec, p, lat, cfg, 1);
  const MomentSeries s4 = run_ensemble(spec, p, lat, cfg, 4);
  REQUIRE(s1.mean.size() == s4.mean.size());
  CHECK(std::memcmp(s1.mean.data(), s4.mean.data(),
                    sizeof(double) * s1.mean.size()) == 0);
  CHECK(std::memcmp(s1.variance.data(), s4.variance.data(),
                    sizeof(double) * s1.variance.size()) == 0);
  CHECK(std::memcmp(s1.se_mean.data(), s4.se_mean.data(),
                    sizeof(double) * s1.se_mean.size()) == 0);
  CHECK(std::memcmp(s1.se_var.data(), s4.se_var.data(),
                    sizeof(double) * s1.se_var.size()) == 0);
  CHECK(s1.n_orbits == 8);
}

TEST_CASE("ensemble means conserve the total norm at every time") {
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  EnsembleSpec spec;
  spec.filled = {2};
  spec.width = 1e-3;
  spec.n_orbits = 8;
  spec.seed = 2718;
  spec.save_times = {0.05, 0.2, 0.5};
  IntegratorConfig cfg;
  cfg.dt = 5e-4;
  cfg.t_max = 0.5;
  EnsembleDiagnostics diag;
  const MomentSeries s = run_ensemble(spec, p, lat, cfg, 2, &diag);
  for (int i = 0; i < s.mean.rows(); ++i)
    CHECK(s.mean.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(diag.orbit_energy_drift.size() == 8);
  CHECK(diag.max_norm_drift < 1e-10);
  CHECK(diag.max_energy_drift < 1e-7);
  // Variances are non-negative and standard errors finite.
  CHECK(s.variance.minCoeff() >= 0.0);
  CHECK(s.se_mean.allFinite());
  CHECK(s.se_var.allFinite());
}

TEST_CASE("without hopping the occupation statistics are frozen") {
  const Lattice lat = build_lattice(1, {5});
  ModelParams p(0.0, 2.0, 0.7);  // J = 0
  EnsembleSpec spec;
  spec.filled = {1, 3};
  spec.width = 1e-3;
  spec.n_orbits = 6;
  spec.seed = 161803;
  spec.save_times = {0.5, 2.0, 5.0};
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 5.0;
  const MomentSeries s = run_ensemble(spec, p, lat, cfg, 1);
  for (int i = 1; i < s.mean.rows(); ++i)
    for (int j = 0; j < s.mean.cols(); ++j) {
      CHECK(std::abs(s.mean(i, j) - s.mean(0, j)) < 1e-13);
      CHECK(std::abs(s.variance(i, j) - s.variance(0, j)) < 1e-13);
    }
}

TEST_CASE("jackknife errors shrink with the ensemble size") {
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 0.2;
  auto run_with = [&](int n) {
    EnsembleSpec spec;
    spec.filled = {2};
    spec.width = 1e-3;
    spec.n_orbits = n;
    spec.seed = 112358;
    spec.save_times = {0.2};
    return run_ensemble(spec, p, lat, cfg, 2);
  };
  const MomentSeries small = run_with(8);
  const MomentSeries big = run_with(128);
  // SE ~ 1/sqrt(n): a 16x ensemble should shrink errors by roughly 4.
  const double ratio = small.se_mean.row(0).mean() / big.se_mean.row(0).mean();
  CHECK(ratio > 1.8);
  CHECK(ratio < 9.0);
}
