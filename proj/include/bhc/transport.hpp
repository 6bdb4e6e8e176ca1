#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "bhc/dynamics.hpp"
#include "bhc/model.hpp"

namespace bhc {

enum class MomentKind { Mean, Variance };

/// Which amplitudes receive the Gaussian kick when sampling an orbit.
/// AllSites perturbs every real coordinate; FilledSites restricts the kick to
/// the initially occupied sites (useful to isolate the transported
/// fluctuations from the locally injected ones).
enum class PerturbationTarget { AllSites, FilledSites };

struct EnsembleSpec {
  std::vector<int> filled;        // sites carrying macroscopic weight (0-based)
  std::vector<double> weights;    // optional per-filled-site norm shares; equal split if empty
  double width = 1e-3;            // Gaussian std-dev per real amplitude coordinate
  int n_orbits = 2;
  std::uint64_t seed = 0;
  std::vector<double> save_times; // strictly increasing, > 0
  PerturbationTarget target = PerturbationTarget::AllSites;

  void validate(const Lattice& lattice) const;
};

/// Geometric save schedule from t_min to t_max inclusive.
std::vector<double> log_spaced_times(double t_min, double t_max, int points_per_decade);

/// One orbit, fully determined by (spec.seed, orbit_index) — worker threads
/// may sample in any order without affecting results.
FieldState sample_orbit(const EnsembleSpec& spec, const Lattice& lattice,
                        std::uint64_t orbit_index);

std::vector<FieldState> sample_ensemble(const EnsembleSpec& spec, const Lattice& lattice);

struct MomentSeries {
  std::vector<double> times;
  Eigen::MatrixXd mean;      // n_times x L
  Eigen::MatrixXd variance;  // population variance <I^2> - <I>^2
  Eigen::MatrixXd se_mean;   // delete-one jackknife standard errors
  Eigen::MatrixXd se_var;
  int n_orbits = 0;
};

struct EnsembleDiagnostics {
  std::vector<double> orbit_energy_drift;
  std::vector<double> orbit_norm_drift;
  double max_energy_drift = 0.0;
  double max_norm_drift = 0.0;
};

/// Integrates every orbit and reduces occupation moments in a fixed order, so
/// the result is byte-identical for any n_threads >= 1.
MomentSeries run_ensemble(const EnsembleSpec& spec, const ModelParams& params,
                          const Lattice& lattice, const IntegratorConfig& config,
                          int n_threads = 1, EnsembleDiagnostics* diagnostics = nullptr);

enum class LadderKind { Variance4m, Variance2m, MeanLadder };

struct FitWindow {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct ExponentFit {
  int site = -1;
  MomentKind moment = MomentKind::Variance;
  LadderKind ladder = LadderKind::Variance4m;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  FitWindow window;
  int n_points = 0;
  std::optional<int> classified;  // ladder rung value, set by classify_ladder
};

/// Moments below this are double-precision noise and are excluded from fits.
inline constexpr double kMomentFloor = 1e-28;

/// Least-squares slope of log(moment) vs log(t) over the window. Points at or
/// below kMomentFloor are dropped; fewer than 8 usable points is a WindowError.
ExponentFit fit_exponent(const MomentSeries& series, int site, MomentKind moment,
                         FitWindow window, LadderKind ladder = LadderKind::Variance4m);

/// Default early-time window [10·dt, t*], with t* the first time this site's
/// variance reaches 1e-4 (last save time if it never does).
FitWindow default_fit_window(const MomentSeries& series, int site, double dt);

/// Rung value for graph distance m under a ladder.
int ladder_rung(LadderKind ladder, int m);

/// Tags the fit with the rung value when the slope lands within tolerance:
/// 15% of the rung value, or 0.3 absolute at the zero rung. Nonzero rungs also
/// require R^2 >= 0.98; a flat series has no meaningful R^2, so the zero rung
/// is classified on the slope alone. "Unclassified" (nullopt) is a valid outcome.
ExponentFit classify_ladder(ExponentFit fit, int m);

/// First sliding-window center where the local log-log slope of the variance
/// drops to <= 1.3 after having exceeded 2.0; nullopt if that never happens.
std::optional<double> detect_crossover(const MomentSeries& series, int site);

}  // namespace bhc
