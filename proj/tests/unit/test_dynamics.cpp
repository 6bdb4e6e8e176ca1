#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "bhc/dynamics.hpp"
#include "bhc/model.hpp"
#include "bhc/rng.hpp"
#include "doctest.h"

using namespace bhc;

namespace {

/// Random state with every occupation bounded away from zero, so both the
/// phase-velocity expressions and finite differences in I stay well-defined.
FieldState random_occupied_state(int L, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd I(L), phi(L);
  for (int j = 0; j < L; ++j) {
    I[j] = 0.5 + rng.uniform();  // in (0.5, 1.5]
    phi[j] = 2.0 * M_PI * rng.uniform() - M_PI;
  }
  I /= I.sum();
  Eigen::VectorXcd psi(L);
  for (int j = 0; j < L; ++j) psi[j] = std::polar(std::sqrt(I[j]), phi[j]);
  return FieldState(psi);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> rates_of(const FieldState& s,
                                                     const ModelParams& p,
                                                     const Lattice& lat) {
  return number_phase_rate(s.amplitudes(), eom_rhs(s, p, lat));
}

}  // namespace

TEST_CASE("decoupled limit: frozen occupations, linear phase winding") {
  const Lattice lat = build_lattice(1, {5});
  ModelParams p(0.0, 2.0, 0.7);  // J = 0
  const FieldState s = random_occupied_state(5, 101ull);
  const auto [Idot, phidot] = rates_of(s, p, lat);
  const Eigen::VectorXd I = s.occupations();
  for (int j = 0; j < 5; ++j) {
    CHECK(std::abs(Idot[j]) < 1e-15);
    CHECK(phidot[j] == doctest::Approx(-p.mu + p.U * I[j]).epsilon(1e-13));
  }
}

TEST_CASE("total occupation rate vanishes identically") {
  const Lattice lat = build_lattice(1, {8});
  ModelParams p(1.0, 0.375, 0.25);
  for (std::uint64_t seed : {111ull, 112ull, 113ull, 114ull}) {
    const FieldState s = random_occupied_state(8, seed);
    const auto [Idot, phidot] = rates_of(s, p, lat);
    CHECK(std::abs(Idot.sum()) < 1e-14);
  }
}

TEST_CASE("equations of motion match finite-difference energy gradients") {
  // Hamilton's equations in the (I, phi) chart:
  //   Idot_j = -dH/dphi_j,  phidot_j = +dH/dI_j.
  // The right-hand side is checked against central differences of the energy.
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  const double h = 1e-6;
  for (std::uint64_t seed : {201ull, 202ull, 203ull}) {
    const FieldState s = random_occupied_state(6, seed);
    const NumberPhaseView v = to_number_phase(s);
    const auto [Idot, phidot] = rates_of(s, p, lat);
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd phi_p = v.phase, phi_m = v.phase;
      phi_p[j] += h;
      phi_m[j] -= h;
      const double dH_dphi = (hamiltonian_energy_raw(v.occupation, phi_p, p, lat) -
                              hamiltonian_energy_raw(v.occupation, phi_m, p, lat)) /
                             (2 * h);
      CHECK(Idot[j] == doctest::Approx(-dH_dphi).epsilon(1e-6));

      Eigen::VectorXd I_p = v.occupation, I_m = v.occupation;
      I_p[j] += h;
      I_m[j] -= h;
      const double dH_dI = (hamiltonian_energy_raw(I_p, v.phase, p, lat) -
                            hamiltonian_energy_raw(I_m, v.phase, p, lat)) /
                           (2 * h);
      CHECK(phidot[j] == doctest::Approx(dH_dI).epsilon(1e-6));
    }
  }
}

TEST_CASE("gradient structure holds across many random states") {
  const Lattice lat = build_lattice(1, {4});
  ModelParams p(1.0, 3.0, 0.5);
  const double h = 1e-6;
  int checked = 0;
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
    const FieldState s = random_occupied_state(4, seed);
    const NumberPhaseView v = to_number_phase(s);
    const auto [Idot, phidot] = rates_of(s, p, lat);
    for (int j = 0; j < 4; ++j) {
      Eigen::VectorXd phi_p = v.phase, phi_m = v.phase;
      phi_p[j] += h;
      phi_m[j] -= h;
      const double dH_dphi = (hamiltonian_energy_raw(v.occupation, phi_p, p, lat) -
                              hamiltonian_energy_raw(v.occupation, phi_m, p, lat)) /
                             (2 * h);
      Eigen::VectorXd I_p = v.occupation, I_m = v.occupation;
      I_p[j] += h;
      I_m[j] -= h;
      const double dH_dI = (hamiltonian_energy_raw(I_p, v.phase, p, lat) -
                            hamiltonian_energy_raw(I_m, v.phase, p, lat)) /
                           (2 * h);
      const double scale = 1.0 + std::abs(Idot[j]) + std::abs(phidot[j]);
      if (std::abs(Idot[j] + dH_dphi) > 1e-5 * scale) ++checked;
      if (std::abs(phidot[j] - dH_dI) > 1e-5 * scale) ++checked;
    }
  }
  CHECK(checked == 0);
}

TEST_CASE("amplitude and number-phase equations agree") {
  // Direct (I, phi) form:
  //   Idot_j  = 2 J sum_k sqrt(I_j I_k) sin(phi_k - phi_j)
  //   phidot_j = -mu + U I_j - J sum_k sqrt(I_k / I_j) cos(phi_j - phi_k)
  const Lattice lat = build_lattice(1, {7});
  ModelParams p(1.0, 0.375, 0.25);
  for (std::uint64_t seed : {301ull, 302ull}) {
    const FieldState s = random_occupied_state(7, seed);
    const NumberPhaseView v = to_number_phase(s);
    const auto [Idot, phidot] = rates_of(s, p, lat);
    for (int j = 0; j < 7; ++j) {
      if (v.occupation[j] <= 1e-6) continue;
      double Idot_ref = 0.0, hop = 0.0;
      auto [b, e] = lat.neighbors(j);
      for (auto it = b; it != e; ++it) {
        const int k = *it;
        Idot_ref += 2.0 * p.J * std::sqrt(v.occupation[j] * v.occupation[k]) *
                    std::sin(v.phase[k] - v.phase[j]);
        hop += std::sqrt(v.occupation[k] / v.occupation[j]) *
               std::cos(v.phase[j] - v.phase[k]);
      }
      const double phidot_ref = -p.mu + p.U * v.occupation[j] - p.J * hop;
      CHECK(Idot[j] == doctest::Approx(Idot_ref).epsilon(1e-10));
      CHECK(phidot[j] == doctest::Approx(phidot_ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("integrator freezes occupations when hopping is off") {
  const Lattice lat = build_lattice(1, {5});
  ModelParams p(0.0, 2.0, 0.7);
  const FieldState s0 = random_occupied_state(5, 401ull);
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 5.0;
  const Trajectory traj = integrate(s0, p, lat, cfg, {1.0, 2.5, 5.0});
  REQUIRE(traj.times.size() == 4);  // leading t=0 snapshot plus save points
  CHECK(traj.times[0] == 0.0);
  const Eigen::VectorXd I0 = s0.occupations();
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    for (int j = 0; j < 5; ++j)
      CHECK(std::abs(std::norm(traj.states[i][j]) - I0[j]) < 1e-12);
  }
  const ConservationReport rep = check_conservation(traj);
  CHECK(rep.max_energy_drift < 1e-12);
  CHECK(rep.max_norm_drift < 1e-12);
}

TEST_CASE("non-interacting two-site dynamics matches the closed form") {
  // With U = mu = 0, dpsi/dt = -i J sigma_x psi, so
  //   psi(t) = [cos(Jt) 1 - i sin(Jt) sigma_x] psi(0).
  const Lattice lat = build_lattice(1, {2});
  ModelParams p(1.3, 0.0, 0.0);
  Eigen::VectorXcd psi0(2);
  psi0 << std::polar(std::sqrt(0.7), 0.4), std::polar(std::sqrt(0.3), -1.1);
  const FieldState s0(psi0);
  const double t = 1.0;
  const Complex c(std::cos(p.J * t), 0.0);
  const Complex is(0.0, std::sin(p.J * t));
  Eigen::VectorXcd exact(2);
  exact[0] = c * psi0[0] - is * psi0[1];
  exact[1] = c * psi0[1] - is * psi0[0];

  IntegratorConfig mid;
  mid.dt = 1e-4;
  mid.t_max = t;
  const Trajectory tm = integrate(s0, p, lat, mid, {t});
  CHECK((tm.states.back() - exact).norm() < 1e-8);

  IntegratorConfig rk;
  rk.scheme = IntegratorConfig::Scheme::AdaptiveRK;
  rk.tolerance = 1e-12;
  rk.t_max = t;
  const Trajectory tr = integrate(s0, p, lat, rk, {t});
  CHECK((tr.states.back() - exact).norm() < 1e-9);
}

TEST_CASE("midpoint and adaptive schemes agree on a chaotic orbit") {
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  const FieldState s0 = random_occupied_state(6, 501ull);
  IntegratorConfig mid;
  mid.dt = 1e-4;
  mid.t_max = 2.0;
  IntegratorConfig rk;
  rk.scheme = IntegratorConfig::Scheme::AdaptiveRK;
  rk.tolerance = 1e-12;
  rk.t_max = 2.0;
  const Trajectory a = integrate(s0, p, lat, mid, {2.0});
  const Trajectory b = integrate(s0, p, lat, rk, {2.0});
  CHECK((a.states.back() - b.states.back()).norm() < 1e-6);
}

TEST_CASE("stepping forward then backward returns to the start") {
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  const FieldState s0 = random_occupied_state(6, 601ull);
  IntegratorConfig cfg;
  MidpointStepper stepper(p, lat, cfg);
  Eigen::VectorXcd psi = s0.amplitudes();
  const double dt = 1e-3;
  const int n_steps = 10000;  // horizon 10 in hopping units
  for (int i = 0; i < n_steps; ++i) stepper.step(psi, dt);
  CHECK((psi - s0.amplitudes()).norm() > 1e-2);  // actually moved
  for (int i = 0; i < n_steps; ++i) stepper.step(psi, -dt);
  CHECK((psi - s0.amplitudes()).norm() < 1e-6);
}

TEST_CASE("long-run conservation of the symplectic scheme") {
  const Lattice lat = build_lattice(1, {6});
  ModelParams p(1.0, 0.375, 0.25);
  const FieldState s0 = random_occupied_state(6, 701ull);
  IntegratorConfig cfg;
  cfg.dt = 2e-4;
  cfg.t_max = 50.0;
  const Trajectory traj = integrate(s0, p, lat, cfg, {10.0, 30.0, 50.0});
  const ConservationReport rep = check_conservation(traj);
  CHECK(rep.max_energy_drift < 1e-8);
  CHECK(rep.max_norm_drift < 1e-10);
}

TEST_CASE("conservation report of a single snapshot is zero") {
  const Lattice lat = build_lattice(1, {3});
  ModelParams p(1.0, 0.5, 0.0);
  const FieldState s0 = random_occupied_state(3, 801ull);
  IntegratorConfig cfg;
  cfg.t_max = 1e-3;
  cfg.dt = 1e-3;
  const Trajectory traj = integrate(s0, p, lat, cfg, {1e-3});
  Trajectory head;
  head.times = {traj.times[0]};
  head.states = {traj.states[0]};
  head.energy = {traj.energy[0]};
  head.norm = {traj.norm[0]};
  const ConservationReport rep = check_conservation(head);
  CHECK(rep.max_energy_drift == 0.0);
  // Norm drift is measured against exactly 1, so construction rounding of
  // order machine epsilon survives even for a single snapshot.
  CHECK(rep.max_norm_drift < 1e-15);
}

TEST_CASE("oversized steps are rejected instead of producing garbage") {
  const Lattice lat = build_lattice(1, {4});
  ModelParams p(1.0, 100.0, 0.0);
  const FieldState s0 = random_occupied_state(4, 901ull);
  IntegratorConfig cfg;
  cfg.dt = 50.0;
  cfg.t_max = 100.0;
  CHECK_THROWS_AS(integrate(s0, p, lat, cfg, {100.0}), DivergedError);
}

TEST_CASE("integration rejects malformed configuration and save times") {
  const Lattice lat = build_lattice(1, {3});
  ModelParams p(1.0, 0.5, 0.0);
  const FieldState s0 = random_occupied_state(3, 1001ull);
  IntegratorConfig cfg;

  CHECK_THROWS_AS(integrate(s0, p, lat, cfg, {}), ConfigError);
  CHECK_THROWS_AS(integrate(s0, p, lat, cfg, {0.5, 0.4}), ConfigError);
  CHECK_THROWS_AS(integrate(s0, p, lat, cfg, {2.0}), ConfigError);  // beyond t_max

  IntegratorConfig bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.t_max = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
