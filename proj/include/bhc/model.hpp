#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <utility>
#include <vector>

#include "bhc/errors.hpp"

namespace bhc {

using Complex = std::complex<double>;

/// Physical couplings of the chain. U is the rescaled on-site repulsion
/// (particle number folded in), so the natural knobs are the ratios U/J, mu/J.
struct ModelParams {
  double J = 1.0;   // hopping
  double U = 0.0;   // on-site repulsion
  double mu = 0.0;  // chemical potential

  ModelParams() = default;
  ModelParams(double J_, double U_, double mu_);
};

/// Open-boundary chain (1D) or square lattice (2D), row-major site order.
/// Immutable after construction; neighbor lists are stored in CSR form.
class Lattice {
 public:
  int dimension() const { return dim_; }
  const std::array<int, 2>& extents() const { return extents_; }
  int num_sites() const { return num_sites_; }

  /// Neighbors of site s (graph neighbors across lattice edges, no wrap).
  std::pair<const int*, const int*> neighbors(int s) const {
    return {nbr_.data() + offsets_[s], nbr_.data() + offsets_[s + 1]};
  }
  int num_neighbors(int s) const { return offsets_[s + 1] - offsets_[s]; }

  /// Each undirected bond appears exactly once, (a, b) with a < b.
  const std::vector<std::pair<int, int>>& bonds() const { return bonds_; }

  int site_index(int row, int col) const;           // 2D only
  std::pair<int, int> site_coords(int s) const;     // 2D only

  friend Lattice build_lattice(int dimension, const std::vector<int>& extents);

 private:
  Lattice() = default;
  int dim_ = 1;
  std::array<int, 2> extents_{0, 0};
  int num_sites_ = 0;
  std::vector<int> offsets_;
  std::vector<int> nbr_;
  std::vector<std::pair<int, int>> bonds_;
};

/// Builds an open-boundary lattice. dimension must be 1 or 2, extents >= 2.
Lattice build_lattice(int dimension, const std::vector<int>& extents);

/// Canonical dynamical state: per-site complex amplitudes with unit total
/// occupation sum |psi_j|^2 = 1. The amplitude form stays smooth at empty
/// sites, where the number-phase chart is singular.
class FieldState {
 public:
  static constexpr double kNormTol = 1e-12;

  /// Validates the norm constraint to kNormTol; throws ValidationError.
  explicit FieldState(Eigen::VectorXcd psi);

  /// Rescales psi to unit norm first (rejects the zero vector).
  static FieldState normalized(Eigen::VectorXcd psi);

  const Eigen::VectorXcd& amplitudes() const { return psi_; }
  int num_sites() const { return static_cast<int>(psi_.size()); }

  /// Occupation numbers I_j = |psi_j|^2.
  Eigen::VectorXd occupations() const { return psi_.cwiseAbs2(); }

 private:
  Eigen::VectorXcd psi_;
};

/// Derived (I_j, phi_j) chart used by the transport observables.
/// phi is reported as 0 on sites with I below the phase floor.
struct NumberPhaseView {
  Eigen::VectorXd occupation;  // I_j in [0, 1]
  Eigen::VectorXd phase;       // phi_j in [-pi, pi)
};

/// Occupations below this floor carry no phase information (atan2(0,0) guard).
inline constexpr double kPhaseFloor = 1e-12;

NumberPhaseView to_number_phase(const FieldState& state);

/// Inverse chart. Rejects I with any negative entry or sum off 1 by > 1e-9.
FieldState from_number_phase(const NumberPhaseView& view);

/// Classical Hamiltonian energy
///   H = sum_j (U/2 I_j^2 - mu I_j) - 2J sum_<jk> sqrt(I_j I_k) cos(phi_j - phi_k)
/// with the bond sum visiting each lattice bond once.
double hamiltonian_energy(const FieldState& state, const ModelParams& params,
                          const Lattice& lattice);

/// Same energy evaluated on raw (I, phi) arrays, without the norm constraint.
/// Needed by finite-difference checks that vary a single I_j.
double hamiltonian_energy_raw(const Eigen::VectorXd& occupation,
                              const Eigen::VectorXd& phase,
                              const ModelParams& params, const Lattice& lattice);

/// Graph distances m_j to the nearest initially filled site (BFS).
struct FilledSiteMap {
  std::vector<int> filled;    // the filled set, sorted
  std::vector<int> distance;  // m per site; 0 exactly on filled sites
};

FilledSiteMap distance_map(const Lattice& lattice,
                           const std::vector<int>& filled_sites);

}  // namespace bhc
