#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "bhc/model.hpp"

namespace bhc {

struct IntegratorConfig {
  enum class Scheme {
    ImplicitMidpoint,  // fixed-step, symplectic; the default
    AdaptiveRK         // Dormand-Prince 5(4), for cross-validation
  };
  Scheme scheme = Scheme::ImplicitMidpoint;
  double dt = 1e-3;          // fixed step (units of 1/J)
  double tolerance = 1e-10;  // local error tolerance of the adaptive scheme
  double t_max = 1.0;        // integration horizon

  // Fixed-point solve of the implicit midpoint stage.
  double fixed_point_tol = 1e-13;
  int fixed_point_max_iters = 50;

  // Norm deviation beyond this aborts the run (step size too large).
  double norm_drift_limit = 1e-6;

  void validate() const;
};

/// Sampled orbit. Snapshots are stored as raw amplitude vectors because a
/// long run may carry norm error above the FieldState construction tolerance
/// (while staying far below the divergence limit).
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXcd> states;
  std::vector<double> energy;
  std::vector<double> norm;  // sum_j |psi_j|^2 per snapshot

  const Eigen::VectorXcd& state_at(int i) const { return states[i]; }
};

/// dpsi_j/dt = i [ (U |psi_j|^2 - mu) psi_j - J sum_{k in nbr(j)} psi_k ].
/// This is the amplitude form of the (I, phi) equations of motion,
/// polynomial everywhere including empty sites.
Eigen::VectorXcd eom_rhs(const FieldState& state, const ModelParams& params,
                         const Lattice& lattice);

/// In-place raw version used by the integrator loops.
void eom_rhs_raw(const Eigen::VectorXcd& psi, const ModelParams& params,
                 const Lattice& lattice, Eigen::VectorXcd& out);

/// Converts an amplitude derivative into number-phase rates
///   Idot_j = 2 Re(conj(psi_j) dpsi_j),  phidot_j = Im(conj(psi_j) dpsi_j)/I_j,
/// with phidot reported as 0 below the phase floor.
std::pair<Eigen::VectorXd, Eigen::VectorXd> number_phase_rate(
    const Eigen::VectorXcd& psi, const Eigen::VectorXcd& dpsi);

/// Integrates from state0 and snapshots at the requested times. The stepper
/// shortens steps to land exactly on save points, never interpolates.
/// A leading t=0 snapshot is always present.
Trajectory integrate(const FieldState& state0, const ModelParams& params,
                     const Lattice& lattice, const IntegratorConfig& config,
                     const std::vector<double>& save_times);

struct ConservationReport {
  double max_energy_drift = 0.0;  // max_t |H(t)-H(0)| / |H(0)|
  double max_norm_drift = 0.0;    // max_t |norm(t) - 1|
};

ConservationReport check_conservation(const Trajectory& trajectory);

/// One implicit-midpoint step; exposed for the tangent-map propagation and
/// for reversibility checks (h may be negative).
class MidpointStepper {
 public:
  MidpointStepper(const ModelParams& params, const Lattice& lattice,
                  const IntegratorConfig& config);

  /// Advances psi by h in place and stores the converged stage midpoint,
  /// readable via midpoint(). Throws DivergedError if the solve stalls.
  void step(Eigen::VectorXcd& psi, double h);

  const Eigen::VectorXcd& midpoint() const { return mid_; }

 private:
  const ModelParams& params_;
  const Lattice& lattice_;
  double tol_;
  int max_iters_;
  Eigen::VectorXcd f_, mid_, next_;
};

}  // namespace bhc
