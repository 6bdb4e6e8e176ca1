#include "bhc/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

namespace bhc {

ModelParams::ModelParams(double J_, double U_, double mu_) : J(J_), U(U_), mu(mu_) {
  if (J < 0.0 || U < 0.0)
    throw ValidationError("model parameters J and U must be non-negative");
  if (J == 0.0 && U == 0.0)
    throw ValidationError("at least one of J, U must be strictly positive");
  if (!std::isfinite(J) || !std::isfinite(U) || !std::isfinite(mu))
    throw ValidationError("model parameters must be finite");
}

Lattice build_lattice(int dimension, const std::vector<int>& extents) {
  if (dimension != 1 && dimension != 2)
    throw ValidationError("lattice dimension must be 1 or 2");
  if (static_cast<int>(extents.size()) != dimension)
    throw ValidationError("extents list must have one entry per dimension");
  for (int e : extents)
    if (e < 2) throw ValidationError("every lattice extent must be >= 2");

  Lattice lat;
  lat.dim_ = dimension;
  lat.extents_ = {extents[0], dimension == 2 ? extents[1] : 1};
  lat.num_sites_ = lat.extents_[0] * lat.extents_[1];

  const int rows = lat.extents_[0];
  const int cols = lat.extents_[1];
  std::vector<std::vector<int>> adj(lat.num_sites_);
  auto link = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
    lat.bonds_.emplace_back(std::min(a, b), std::max(a, b));
  };
  if (dimension == 1) {
    for (int s = 0; s + 1 < rows; ++s) link(s, s + 1);
  } else {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int s = r * cols + c;
        if (c + 1 < cols) link(s, s + 1);
        if (r + 1 < rows) link(s, s + cols);
      }
  }

  lat.offsets_.assign(lat.num_sites_ + 1, 0);
  for (int s = 0; s < lat.num_sites_; ++s) {
    std::sort(adj[s].begin(), adj[s].end());
    lat.offsets_[s + 1] = lat.offsets_[s] + static_cast<int>(adj[s].size());
    lat.nbr_.insert(lat.nbr_.end(), adj[s].begin(), adj[s].end());
  }
  std::sort(lat.bonds_.begin(), lat.bonds_.end());
  return lat;
}

int Lattice::site_index(int row, int col) const {
  if (dim_ != 2) throw ValidationError("site_index(row, col) requires a 2D lattice");
  if (row < 0 || row >= extents_[0] || col < 0 || col >= extents_[1])
    throw ValidationError("lattice coordinates out of range");
  return row * extents_[1] + col;
}

std::pair<int, int> Lattice::site_coords(int s) const {
  if (dim_ != 2) throw ValidationError("site_coords requires a 2D lattice");
  if (s < 0 || s >= num_sites_) throw ValidationError("site index out of range");
  return {s / extents_[1], s % extents_[1]};
}

FieldState::FieldState(Eigen::VectorXcd psi) : psi_(std::move(psi)) {
  if (psi_.size() < 2) throw ValidationError("state needs at least 2 sites");
  const double norm2 = psi_.squaredNorm();
  if (std::abs(norm2 - 1.0) > kNormTol)
    throw ValidationError("state norm deviates from 1 beyond tolerance");
}

FieldState FieldState::normalized(Eigen::VectorXcd psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw ValidationError("cannot normalize a zero or non-finite state");
  psi /= norm;
  return FieldState(std::move(psi));
}

NumberPhaseView to_number_phase(const FieldState& state) {
  const auto& psi = state.amplitudes();
  NumberPhaseView view;
  view.occupation = psi.cwiseAbs2();
  view.phase.resize(psi.size());
  for (Eigen::Index j = 0; j < psi.size(); ++j) {
    if (view.occupation[j] < kPhaseFloor) {
      view.phase[j] = 0.0;
    } else {
      double phi = std::atan2(psi[j].imag(), psi[j].real());
      if (phi >= M_PI) phi -= 2.0 * M_PI;  // report in [-pi, pi)
      view.phase[j] = phi;
    }
  }
  return view;
}

FieldState from_number_phase(const NumberPhaseView& view) {
  const auto& I = view.occupation;
  if (I.size() != view.phase.size())
    throw ValidationError("occupation and phase arrays must have equal length");
  if ((I.array() < 0.0).any())
    throw ValidationError("occupation numbers must be non-negative");
  if (std::abs(I.sum() - 1.0) > 1e-9)
    throw ValidationError("occupation numbers must sum to 1 within 1e-9");
  Eigen::VectorXcd psi(I.size());
  for (Eigen::Index j = 0; j < I.size(); ++j)
    psi[j] = std::sqrt(I[j]) * Complex(std::cos(view.phase[j]), std::sin(view.phase[j]));
  return FieldState::normalized(std::move(psi));
}

double hamiltonian_energy_raw(const Eigen::VectorXd& occupation,
                              const Eigen::VectorXd& phase,
                              const ModelParams& params, const Lattice& lattice) {
  double onsite = 0.0;
  for (Eigen::Index j = 0; j < occupation.size(); ++j)
    onsite += 0.5 * params.U * occupation[j] * occupation[j] - params.mu * occupation[j];
  double hop = 0.0;
  for (const auto& [a, b] : lattice.bonds())
    hop += std::sqrt(occupation[a] * occupation[b]) * std::cos(phase[a] - phase[b]);
  return onsite - 2.0 * params.J * hop;
}

double hamiltonian_energy(const FieldState& state, const ModelParams& params,
                          const Lattice& lattice) {
  if (state.num_sites() != lattice.num_sites())
    throw ValidationError("state size does not match lattice");
  const auto& psi = state.amplitudes();
  double onsite = 0.0;
  for (Eigen::Index j = 0; j < psi.size(); ++j) {
    const double I = std::norm(psi[j]);
    onsite += 0.5 * params.U * I * I - params.mu * I;
  }
  // sqrt(I_a I_b) cos(phi_a - phi_b) = Re(psi_a conj(psi_b))
  double hop = 0.0;
  for (const auto& [a, b] : lattice.bonds())
    hop += psi[a].real() * psi[b].real() + psi[a].imag() * psi[b].imag();
  return onsite - 2.0 * params.J * hop;
}

FilledSiteMap distance_map(const Lattice& lattice, const std::vector<int>& filled_sites) {
  if (filled_sites.empty())
    throw ValidationError("distance map needs a non-empty filled set");
  std::set<int> filled;
  for (int s : filled_sites) {
    if (s < 0 || s >= lattice.num_sites())
      throw ValidationError("filled site index out of lattice range");
    filled.insert(s);
  }

  FilledSiteMap map;
  map.filled.assign(filled.begin(), filled.end());
  map.distance.assign(lattice.num_sites(), -1);
  std::deque<int> queue;
  for (int s : map.filled) {
    map.distance[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    auto [first, last] = lattice.neighbors(s);
    for (const int* k = first; k != last; ++k)
      if (map.distance[*k] < 0) {
        map.distance[*k] = map.distance[s] + 1;
        queue.push_back(*k);
      }
  }
  return map;
}

}  // namespace bhc
