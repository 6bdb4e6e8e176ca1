#pragma once

#include <cstdint>

#include "bhc/errors.hpp"
#include "bhc/model.hpp"

namespace bhc {

/// Which quantity a thermodynamic evaluation carries.
enum class ThermoKind {
  LogZAnnealed,      ///< log of the full-phase-space partition sum
  FreeEnergyQuenched,///< phase-integrated free energy averaged over numbers
  LogZGaussian,      ///< quadratic path-integral limit (bare, unnormalized)
};

/// One series/closed-form evaluation at fixed inverse temperature.
/// `value` is a dimensionless log for the LogZ kinds and an energy for the
/// free-energy kind. `tail_estimate` is |last included shell| / |total| and
/// is recorded for every series evaluation (0 for closed forms).
struct ThermoPoint {
  double beta = 0.0;
  int num_sites = 0;
  ThermoKind kind = ThermoKind::LogZAnnealed;
  double value = 0.0;
  int truncation_order = 0;
  double tail_estimate = 0.0;
};

/// Truncation controls for the hopping-series evaluations. Shells are
/// grouped by total hopping order K; the ratio of consecutive shell
/// magnitudes must stay below `shell_ratio_threshold` at the truncation
/// point or the evaluation reports ConvergenceError.
struct SeriesConfig {
  int k_max = 40;
  double shell_ratio_threshold = 0.5;

  void validate() const;  ///< throws ConfigError (k_max >= 1, threshold in (0,1))
};

/// log Z of the chain with every variable thermally averaged, evaluated as a
/// strong-coupling hopping expansion: number integrals done against the
/// on-site Gaussian weight, phase integrals against the bond Bessel factors
/// expanded in powers of 2*beta*J^2/U. Shells of fixed total order K are
/// accumulated through a transfer recursion along the chain (cost
/// O(L * k_max^3)); all Gamma/factorial factors go through lgamma so the
/// evaluation stays finite for L <= 200, beta*U <= 1e4.
/// Throws ValidationError (requires U > 0, beta > 0, L >= 2) and
/// ConvergenceError (shell ratio above threshold at k_max).
ThermoPoint annealed_logZ_series(const ModelParams& params, double beta, int L,
                                 const SeriesConfig& cfg);

/// Closed forms obtained by keeping only the zeroth and first hopping shells.
/// log_Z is exactly the K <= 1 truncation of annealed_logZ_series; F uses the
/// additionally log-linearized hopping correction 2(L-1)J^2 beta/(pi U).
/// E and C are the ideal-gas-like forms (L/2)(T - mu^2/U) and L/2.
struct AnnealedFirstOrder {
  double log_Z = 0.0;
  double F = 0.0;
  double E = 0.0;
  double C = 0.0;
};
AnnealedFirstOrder annealed_first_order(const ModelParams& params, double beta,
                                        int L);

/// Free energy with phases averaged first and the log then averaged over the
/// number simplex (solid simplex sum I_j <= 1, volume 1/L!): the leading
/// bracket is exact and the hopping corrections form an alternating series
/// in (beta J)^2, grouped by total order K with coefficients given by the
/// log of the bond Bessel factor. 1/L! and all Gamma factors go through
/// lgamma. Throws ValidationError (beta > 0, L >= 2) and ConvergenceError
/// when consecutive shell magnitudes grow (series outside its radius).
ThermoPoint quenched_F_series(const ModelParams& params, double beta, int L,
                              const SeriesConfig& cfg);

/// Closed forms from the single lowest hopping correction (K = 1):
/// F is the K <= 1 truncation of quenched_F_series exactly; E and C are the
/// compact forms E = (U - mu L - 2 beta J^2)/(L! L), C = 2 beta^2 J^2/(L! L),
/// with C pinned as the exact temperature derivative of E.
struct QuenchedFirstOrder {
  double F = 0.0;
  double E = 0.0;
  double C = 0.0;
};
QuenchedFirstOrder quenched_first_order(const ModelParams& params, double beta,
                                        int L);

/// Quadratic-action path-integral evaluation of the partition sum over
/// small number oscillations: bare value log Z = (L/2) log(2 pi/(beta U)).
/// The overall measure normalization is fixed separately (see below) by
/// requiring equality with the zeroth hopping shell of the fully annealed
/// log Z at mu = 0.
ThermoPoint gaussian_path_Z(const ModelParams& params, double beta, int L);

/// log of the measure normalization that aligns gaussian_path_Z with the
/// zeroth annealed shell at mu = 0; equals L * log(pi).
double gaussian_path_log_normalization(int L);

/// Mean kinetic energy per site of the phase variables,
/// mu^2/(2U) - mu*v_bar/(2U) + T/2, where v_bar is the caller-supplied mean
/// drift velocity (only the mu = 0 case is exercised by the test suite).
double mean_kinetic_energy(const ModelParams& params, double temperature,
                           double v_bar);

/// A Monte-Carlo estimate with its standard error.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
};

/// Importance-sampled check of the number integral behind the annealed
/// log Z: occupations drawn from the on-site half-Gaussian proposal, the
/// phase integrals folded in analytically through the bond Bessel factors,
/// the chemical-potential tilt and Bessel factors carried as weights.
/// Deterministic for a fixed seed. Requires 2 <= L <= 6 (oracle scale).
McEstimate mc_annealed_oracle(const ModelParams& params, double beta, int L,
                              std::int64_t n_samples, std::uint64_t seed);

/// Deterministic tensor-product Gauss-Legendre evaluation of the same
/// number integral (Gaussian on-site weight times bond Bessel factors) on
/// [0, I_max]^L with I_max chosen from the Gaussian width. Requires
/// L in {2, 3}. Returns the log of the partition sum.
double quadrature_annealed_oracle(const ModelParams& params, double beta,
                                  int L, int nodes_per_dim);

/// Mesh controls for the simplex quadrature oracle. The oracle evaluates at
/// `nodes_per_dim` and at double that resolution and reports MeshError if
/// the two differ by more than 10x `tolerance`.
struct SimplexMesh {
  int nodes_per_dim = 48;
  double tolerance = 1e-6;
};

/// Deterministic nested Gauss-Legendre quadrature of the log of the
/// phase-integrated weight over the solid occupation simplex
/// (I_j >= 0, sum I_j <= 1, volume 1/L!), returning the free energy
/// -(1/beta) * integral. Independent of the series machinery; requires
/// L in {2, 3}. Throws MeshError if refinement moves the result by more
/// than 10x mesh.tolerance.
double simplex_quenched_oracle(const ModelParams& params, double beta, int L,
                               const SimplexMesh& mesh);

/// Monte-Carlo estimate of <phi_dot^2>/(2U) for one site of an open chain
/// under the full thermal weight: occupations from the half-Gaussian
/// proposal, phases uniform, bond factors reweighted, the phase velocity
/// evaluated from the equations of motion. Site index is 0-based.
McEstimate mc_phase_velocity_oracle(const ModelParams& params, double beta,
                                    int L, int site, std::int64_t n_samples,
                                    std::uint64_t seed);

/// Energy and heat capacity from centered finite differences of
/// annealed_logZ_series in beta (relative step rel_step):
/// E = -d log Z/d beta, C = beta^2 d^2 log Z/d beta^2.
struct ThermoDerivatives {
  double energy = 0.0;
  double heat_capacity = 0.0;
};
ThermoDerivatives annealed_series_EC(const ModelParams& params, double beta,
                                     int L, const SeriesConfig& cfg,
                                     double rel_step = 1e-3);

}  // namespace bhc
