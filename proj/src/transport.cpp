#include "bhc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "bhc/errors.hpp"
#include "bhc/rng.hpp"

namespace bhc {

namespace {

/// Fixed-order pairwise reduction over values[first, last); deterministic and
/// better conditioned than sequential accumulation for large ensembles.
double pairwise_sum(const double* values, std::ptrdiff_t count) {
  if (count <= 8) {
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < count; ++i) s += values[i];
    return s;
  }
  const std::ptrdiff_t half = count / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

double pairwise_mean(const std::vector<double>& values) {
  return pairwise_sum(values.data(), static_cast<std::ptrdiff_t>(values.size())) /
         static_cast<double>(values.size());
}

}  // namespace

void EnsembleSpec::validate(const Lattice& lattice) const {
  if (filled.empty()) throw ValidationError("ensemble needs at least one filled site");
  for (int s : filled)
    if (s < 0 || s >= lattice.num_sites())
      throw ValidationError("filled site " + std::to_string(s + 1) + " outside lattice");
  std::vector<int> sorted = filled;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("duplicate filled site");
  if (!weights.empty()) {
    if (weights.size() != filled.size())
      throw ValidationError("weights must match filled sites one-to-one");
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("weights must be positive");
  }
  if (!(width > 0.0) || !std::isfinite(width))
    throw ValidationError("Gaussian width must be positive");
  if (n_orbits < 2) throw ValidationError("need at least 2 orbits");
  if (save_times.empty()) throw ValidationError("save schedule is empty");
  double prev = 0.0;
  for (double t : save_times) {
    if (!(t > prev) || !std::isfinite(t))
      throw ValidationError("save times must be positive and strictly increasing");
    prev = t;
  }
}

std::vector<double> log_spaced_times(double t_min, double t_max, int points_per_decade) {
  if (!(t_min > 0.0) || !(t_max > t_min)) throw ConfigError("need 0 < t_min < t_max");
  if (points_per_decade < 1) throw ConfigError("points_per_decade must be >= 1");
  const double ratio = std::pow(10.0, 1.0 / points_per_decade);
  std::vector<double> times;
  for (double t = t_min; t < t_max * (1.0 - 1e-12); t *= ratio) times.push_back(t);
  times.push_back(t_max);
  return times;
}

FieldState sample_orbit(const EnsembleSpec& spec, const Lattice& lattice,
                        std::uint64_t orbit_index) {
  const int n = lattice.num_sites();
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);

  double total_weight = 0.0;
  if (spec.weights.empty()) {
    total_weight = static_cast<double>(spec.filled.size());
    for (int s : spec.filled) psi[s] = std::sqrt(1.0 / total_weight);
  } else {
    for (double w : spec.weights) total_weight += w;
    for (std::size_t i = 0; i < spec.filled.size(); ++i)
      psi[spec.filled[i]] = std::sqrt(spec.weights[i] / total_weight);
  }

  Rng rng(derive_seed(spec.seed, orbit_index));
  if (spec.target == PerturbationTarget::AllSites) {
    for (int s = 0; s < n; ++s)
      psi[s] += Complex(spec.width * rng.gaussian(), spec.width * rng.gaussian());
  } else {
    std::vector<int> targets = spec.filled;
    std::sort(targets.begin(), targets.end());  // site order fixes the draw order
    for (int s : targets)
      psi[s] += Complex(spec.width * rng.gaussian(), spec.width * rng.gaussian());
  }

  const double norm = psi.norm();
  if (norm < 1e-6)
    throw ValidationError("perturbation width leaves orbit " + std::to_string(orbit_index) +
                          " with norm " + std::to_string(norm) + "; cannot renormalize");
  psi /= norm;
  return FieldState(psi);
}

std::vector<FieldState> sample_ensemble(const EnsembleSpec& spec, const Lattice& lattice) {
  spec.validate(lattice);
  std::vector<FieldState> states;
  states.reserve(static_cast<std::size_t>(spec.n_orbits));
  for (int i = 0; i < spec.n_orbits; ++i)
    states.push_back(sample_orbit(spec, lattice, static_cast<std::uint64_t>(i)));
  return states;
}

MomentSeries run_ensemble(const EnsembleSpec& spec, const ModelParams& params,
                          const Lattice& lattice, const IntegratorConfig& config,
                          int n_threads, EnsembleDiagnostics* diagnostics) {
  spec.validate(lattice);
  config.validate();
  const int n = lattice.num_sites();
  const int n_orbits = spec.n_orbits;
  const int n_times = static_cast<int>(spec.save_times.size()) + 1;  // leading t=0

  IntegratorConfig cfg = config;
  cfg.t_max = spec.save_times.back();  // the save schedule owns the horizon

  // Per-orbit occupation slabs, written by exactly one worker each.
  std::vector<Eigen::MatrixXd> occupation(static_cast<std::size_t>(n_orbits));
  std::vector<double> energy_drift(static_cast<std::size_t>(n_orbits), 0.0);
  std::vector<double> norm_drift(static_cast<std::size_t>(n_orbits), 0.0);
  std::vector<std::string> failure(static_cast<std::size_t>(n_orbits));

  const int workers = std::clamp(n_threads, 1, n_orbits);
  auto work = [&](int first_orbit) {
    for (int orbit = first_orbit; orbit < n_orbits; orbit += workers) {
      try {
        const FieldState state0 =
            sample_orbit(spec, lattice, static_cast<std::uint64_t>(orbit));
        const Trajectory traj = integrate(state0, params, lattice, cfg, spec.save_times);
        Eigen::MatrixXd& occ = occupation[static_cast<std::size_t>(orbit)];
        occ.resize(n_times, n);
        for (int k = 0; k < n_times; ++k)
          occ.row(k) = traj.states[static_cast<std::size_t>(k)].cwiseAbs2().transpose();
        const ConservationReport report = check_conservation(traj);
        energy_drift[static_cast<std::size_t>(orbit)] = report.max_energy_drift;
        norm_drift[static_cast<std::size_t>(orbit)] = report.max_norm_drift;
      } catch (const Error& e) {
        failure[static_cast<std::size_t>(orbit)] =
            "orbit " + std::to_string(orbit) + ": " + e.what();
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }

  for (const std::string& msg : failure)
    if (!msg.empty()) throw DivergedError(msg);

  MomentSeries series;
  series.n_orbits = n_orbits;
  series.times.reserve(static_cast<std::size_t>(n_times));
  series.times.push_back(0.0);
  series.times.insert(series.times.end(), spec.save_times.begin(), spec.save_times.end());
  series.mean.resize(n_times, n);
  series.variance.resize(n_times, n);
  series.se_mean.resize(n_times, n);
  series.se_var.resize(n_times, n);

  // Fixed-order reduction over orbits; identical for any worker count.
  std::vector<double> x(static_cast<std::size_t>(n_orbits));
  std::vector<double> x2(static_cast<std::size_t>(n_orbits));
  std::vector<double> replica(static_cast<std::size_t>(n_orbits));
  const double nn = static_cast<double>(n_orbits);
  for (int k = 0; k < n_times; ++k) {
    for (int s = 0; s < n; ++s) {
      for (int orbit = 0; orbit < n_orbits; ++orbit) {
        const double v = occupation[static_cast<std::size_t>(orbit)](k, s);
        x[static_cast<std::size_t>(orbit)] = v;
        x2[static_cast<std::size_t>(orbit)] = v * v;
      }
      const double sum = pairwise_sum(x.data(), n_orbits);
      const double sum2 = pairwise_sum(x2.data(), n_orbits);
      const double mean = sum / nn;
      const double var = std::max(0.0, sum2 / nn - mean * mean);
      series.mean(k, s) = mean;
      series.variance(k, s) = var;

      // Delete-one jackknife for both estimators.
      for (int orbit = 0; orbit < n_orbits; ++orbit) {
        const std::size_t i = static_cast<std::size_t>(orbit);
        replica[i] = (sum - x[i]) / (nn - 1.0);
      }
      double rbar = pairwise_mean(replica);
      double dev = 0.0;
      for (int orbit = 0; orbit < n_orbits; ++orbit) {
        const double d = replica[static_cast<std::size_t>(orbit)] - rbar;
        dev += d * d;
      }
      series.se_mean(k, s) = std::sqrt((nn - 1.0) / nn * dev);

      for (int orbit = 0; orbit < n_orbits; ++orbit) {
        const std::size_t i = static_cast<std::size_t>(orbit);
        const double m1 = (sum - x[i]) / (nn - 1.0);
        replica[i] = std::max(0.0, (sum2 - x2[i]) / (nn - 1.0) - m1 * m1);
      }
      rbar = pairwise_mean(replica);
      dev = 0.0;
      for (int orbit = 0; orbit < n_orbits; ++orbit) {
        const double d = replica[static_cast<std::size_t>(orbit)] - rbar;
        dev += d * d;
      }
      series.se_var(k, s) = std::sqrt((nn - 1.0) / nn * dev);
    }
  }

  if (diagnostics != nullptr) {
    diagnostics->orbit_energy_drift = energy_drift;
    diagnostics->orbit_norm_drift = norm_drift;
    diagnostics->max_energy_drift =
        *std::max_element(energy_drift.begin(), energy_drift.end());
    diagnostics->max_norm_drift = *std::max_element(norm_drift.begin(), norm_drift.end());
  }
  return series;
}

namespace {

struct LogPoints {
  std::vector<double> lt;
  std::vector<double> lv;
};

LogPoints collect_log_points(const MomentSeries& series, int site, MomentKind moment,
                             FitWindow window) {
  if (site < 0 || site >= series.mean.cols()) throw ValidationError("site index out of range");
  if (!(window.t_min > 0.0) || !(window.t_max > window.t_min))
    throw WindowError("fit window must satisfy 0 < t_min < t_max");
  LogPoints pts;
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const double t = series.times[k];
    if (t < window.t_min || t > window.t_max) continue;
    const double v = (moment == MomentKind::Mean) ? series.mean(static_cast<int>(k), site)
                                                  : series.variance(static_cast<int>(k), site);
    if (v <= kMomentFloor) continue;  // below numerical floor, not trustworthy
    pts.lt.push_back(std::log(t));
    pts.lv.push_back(std::log(v));
  }
  return pts;
}

}  // namespace

ExponentFit fit_exponent(const MomentSeries& series, int site, MomentKind moment,
                         FitWindow window, LadderKind ladder) {
  const LogPoints pts = collect_log_points(series, site, moment, window);
  const int m = static_cast<int>(pts.lt.size());
  if (m < 8)
    throw WindowError("only " + std::to_string(m) + " usable points in fit window (need 8); " +
                      "values at or below the 1e-28 floor are excluded");

  const double xm = pairwise_mean(pts.lt);
  const double ym = pairwise_mean(pts.lv);
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < m; ++i) {
    const double dx = pts.lt[static_cast<std::size_t>(i)] - xm;
    sxx += dx * dx;
    sxy += dx * (pts.lv[static_cast<std::size_t>(i)] - ym);
  }
  if (sxx == 0.0) throw WindowError("fit window collapses to a single time");
  const double slope = sxy / sxx;
  const double intercept = ym - slope * xm;
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < m; ++i) {
    const double y = pts.lv[static_cast<std::size_t>(i)];
    const double f = intercept + slope * pts.lt[static_cast<std::size_t>(i)];
    ss_res += (y - f) * (y - f);
    ss_tot += (y - ym) * (y - ym);
  }

  ExponentFit fit;
  fit.site = site;
  fit.moment = moment;
  fit.ladder = ladder;
  fit.slope = slope;
  fit.intercept = intercept;
  fit.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  fit.window = window;
  fit.n_points = m;
  return fit;
}

FitWindow default_fit_window(const MomentSeries& series, int site, double dt) {
  if (site < 0 || site >= series.variance.cols())
    throw ValidationError("site index out of range");
  FitWindow window;
  window.t_min = 10.0 * dt;
  window.t_max = series.times.back();
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    if (series.times[k] > 0.0 && series.variance(static_cast<int>(k), site) >= 1e-4) {
      window.t_max = series.times[k];
      break;
    }
  }
  return window;
}

int ladder_rung(LadderKind ladder, int m) {
  if (m < 0) throw ValidationError("graph distance m must be non-negative");
  switch (ladder) {
    case LadderKind::Variance4m:
      return 4 * m;
    case LadderKind::Variance2m:
      return 2 * m;
    case LadderKind::MeanLadder:
      return std::max(0, 2 * m - 2);
  }
  throw ValidationError("unknown ladder kind");
}

ExponentFit classify_ladder(ExponentFit fit, int m) {
  const int rung = ladder_rung(fit.ladder, m);
  const double tol = (rung == 0) ? 0.3 : 0.15 * rung;
  const bool slope_ok = std::abs(fit.slope - rung) <= tol;
  const bool quality_ok = (rung == 0) || fit.r2 >= 0.98;
  fit.classified = (slope_ok && quality_ok) ? std::optional<int>(rung) : std::nullopt;
  return fit;
}

std::optional<double> detect_crossover(const MomentSeries& series, int site) {
  if (site < 0 || site >= series.variance.cols())
    throw ValidationError("site index out of range");
  std::vector<double> lt, lv;
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const double t = series.times[k];
    const double v = series.variance(static_cast<int>(k), site);
    if (t <= 0.0 || v <= kMomentFloor) continue;
    lt.push_back(std::log(t));
    lv.push_back(std::log(v));
  }
  if (lt.size() < 8 || lt.back() - lt.front() < 2.0 * std::log(10.0))
    throw WindowError("crossover detection needs at least two usable decades");

  const double span = 0.5 * std::log(10.0);  // half-decade sliding window
  bool armed = false;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    std::size_t j = i;
    while (j + 1 < lt.size() && lt[j] - lt[i] < span) ++j;
    if (lt[j] - lt[i] < span) break;  // ran off the end
    if (j - i + 1 < 4) continue;
    double xm = 0.0, ym = 0.0;
    const double cnt = static_cast<double>(j - i + 1);
    for (std::size_t k = i; k <= j; ++k) {
      xm += lt[k];
      ym += lv[k];
    }
    xm /= cnt;
    ym /= cnt;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = i; k <= j; ++k) {
      sxx += (lt[k] - xm) * (lt[k] - xm);
      sxy += (lt[k] - xm) * (lv[k] - ym);
    }
    if (sxx == 0.0) continue;
    const double slope = sxy / sxx;
    if (slope >= 2.0) armed = true;
    if (armed && slope <= 1.3) return std::exp(0.5 * (lt[i] + lt[j]));
  }
  return std::nullopt;
}

}  // namespace bhc
