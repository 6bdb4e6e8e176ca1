#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bhc/dynamics.hpp"
#include "bhc/model.hpp"

namespace bhc {

/// Tangent space uses the real interleaved layout
///   x = (Re psi_0, Im psi_0, Re psi_1, Im psi_1, ...),
/// so the J=0 Jacobian is block-diagonal with one 2x2 block per site.
Eigen::VectorXd to_real_tangent(const Eigen::VectorXcd& psi);
Eigen::VectorXcd from_real_tangent(const Eigen::VectorXd& x);

/// Exact analytic Jacobian of eom_rhs at the given state, 2L x 2L.
Eigen::MatrixXd tangent_jacobian(const FieldState& state, const ModelParams& params,
                                 const Lattice& lattice);

void tangent_jacobian_raw(const Eigen::VectorXcd& psi, const ModelParams& params,
                          const Lattice& lattice, Eigen::MatrixXd& out);

struct LyapunovResult {
  Eigen::VectorXd exponents;  // sorted descending
  double horizon = 0.0;       // realized averaging time
  double pairing_error = 0.0; // max_i |lambda_i + lambda_{2L+1-i}|
  /// Finite-time estimates after each orthonormalization epoch (unsorted,
  /// one entry per tangent direction), for convergence inspection.
  std::vector<double> epoch_times;
  std::vector<Eigen::VectorXd> history;
};

/// Benettin-style spectrum: the tangent frame is propagated with the exact
/// derivative of the implicit midpoint map and re-orthonormalized (QR) every
/// renorm_interval. Growth rates average log |R_ii| over epochs.
///
/// Tangent vectors span the full 2L-dimensional amplitude space; the norm and
/// global-phase directions are identified a posteriori by near-zero exponents.
/// `warmup` integrates the state forward before accumulation starts, so the
/// relaxation transient of a localized initial condition does not bias the
/// finite-time average (it decays only as 1/horizon otherwise).
LyapunovResult lyapunov_spectrum(const FieldState& state0, const ModelParams& params,
                                 const Lattice& lattice, const IntegratorConfig& config,
                                 double horizon, double renorm_interval, double warmup = 0.0);

/// Finite-time growth rate of a tangent vector initially localized on one site.
/// No warmup: the whole point is the growth seen by this initial perturbation.
double site_perturbation_growth(const FieldState& state0, int site,
                                const ModelParams& params, const Lattice& lattice,
                                const IntegratorConfig& config, double horizon,
                                double renorm_interval = 1.0);

}  // namespace bhc
