#include "bhc/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace bhc {

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("integrator dt must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("integrator tolerance must be positive");
  if (!(t_max > 0.0)) throw ConfigError("integration horizon must be positive");
}

void eom_rhs_raw(const Eigen::VectorXcd& psi, const ModelParams& params,
                 const Lattice& lattice, Eigen::VectorXcd& out) {
  const Eigen::Index n = psi.size();
  out.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double I = std::norm(psi[j]);
    Complex acc = (params.U * I - params.mu) * psi[j];
    auto [first, last] = lattice.neighbors(static_cast<int>(j));
    Complex hop(0.0, 0.0);
    for (const int* k = first; k != last; ++k) hop += psi[*k];
    acc -= params.J * hop;
    out[j] = Complex(-acc.imag(), acc.real());  // multiply by i
  }
}

Eigen::VectorXcd eom_rhs(const FieldState& state, const ModelParams& params,
                         const Lattice& lattice) {
  if (state.num_sites() != lattice.num_sites())
    throw ValidationError("state size does not match lattice");
  Eigen::VectorXcd out;
  eom_rhs_raw(state.amplitudes(), params, lattice, out);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> number_phase_rate(
    const Eigen::VectorXcd& psi, const Eigen::VectorXcd& dpsi) {
  const Eigen::Index n = psi.size();
  Eigen::VectorXd Idot(n), phidot(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex cross = std::conj(psi[j]) * dpsi[j];
    const double I = std::norm(psi[j]);
    Idot[j] = 2.0 * cross.real();
    phidot[j] = I < kPhaseFloor ? 0.0 : cross.imag() / I;
  }
  return {std::move(Idot), std::move(phidot)};
}

MidpointStepper::MidpointStepper(const ModelParams& params, const Lattice& lattice,
                                 const IntegratorConfig& config)
    : params_(params),
      lattice_(lattice),
      tol_(config.fixed_point_tol),
      max_iters_(config.fixed_point_max_iters) {}

void MidpointStepper::step(Eigen::VectorXcd& psi, double h) {
  // Fixed-point iteration for y = x + h f((x+y)/2), seeded with Euler.
  eom_rhs_raw(psi, params_, lattice_, f_);
  next_ = psi + h * f_;
  bool converged = false;
  for (int it = 0; it < max_iters_; ++it) {
    mid_ = 0.5 * (psi + next_);
    eom_rhs_raw(mid_, params_, lattice_, f_);
    double delta = 0.0;
    for (Eigen::Index j = 0; j < psi.size(); ++j) {
      const Complex upd = psi[j] + h * f_[j];
      const double d = std::abs(upd - next_[j]);
      if (d > delta || !std::isfinite(d)) delta = d;
      next_[j] = upd;
    }
    if (!std::isfinite(delta)) break;  // iterate overflowed: report divergence
    if (delta < tol_) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw DivergedError("implicit midpoint solve did not converge; reduce dt");
  psi.swap(next_);
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

class DormandPrinceStepper {
 public:
  DormandPrinceStepper(const ModelParams& params, const Lattice& lattice, double tol)
      : params_(params), lattice_(lattice), tol_(tol) {}

  // Advances psi to exactly t_target, adapting the step size.
  void advance(Eigen::VectorXcd& psi, double t, double t_target) {
    double h = std::min(h_, t_target - t);
    while (t < t_target) {
      h = std::min(h, t_target - t);
      eom_rhs_raw(psi, params_, lattice_, k1_);
      y_ = psi + h * kA21 * k1_;
      eom_rhs_raw(y_, params_, lattice_, k2_);
      y_ = psi + h * (kA31 * k1_ + kA32 * k2_);
      eom_rhs_raw(y_, params_, lattice_, k3_);
      y_ = psi + h * (kA41 * k1_ + kA42 * k2_ + kA43 * k3_);
      eom_rhs_raw(y_, params_, lattice_, k4_);
      y_ = psi + h * (kA51 * k1_ + kA52 * k2_ + kA53 * k3_ + kA54 * k4_);
      eom_rhs_raw(y_, params_, lattice_, k5_);
      y_ = psi + h * (kA61 * k1_ + kA62 * k2_ + kA63 * k3_ + kA64 * k4_ + kA65 * k5_);
      eom_rhs_raw(y_, params_, lattice_, k6_);
      y_ = psi + h * (kB1 * k1_ + kB3 * k3_ + kB4 * k4_ + kB5 * k5_ + kB6 * k6_);
      eom_rhs_raw(y_, params_, lattice_, k7_);

      double err = 0.0;
      for (Eigen::Index j = 0; j < psi.size(); ++j) {
        const Complex e = h * (kE1 * k1_[j] + kE3 * k3_[j] + kE4 * k4_[j] +
                               kE5 * k5_[j] + kE6 * k6_[j] + kE7 * k7_[j]);
        err = std::max(err, std::abs(e));
      }
      if (err <= tol_ || h <= 1e-14) {
        t += h;
        psi.swap(y_);
      }
      const double scale =
          err > 0.0 ? 0.9 * std::pow(tol_ / err, 0.2) : 5.0;
      h *= std::clamp(scale, 0.2, 5.0);
      h_ = h;
    }
  }

 private:
  const ModelParams& params_;
  const Lattice& lattice_;
  double tol_;
  double h_ = 1e-3;
  Eigen::VectorXcd k1_, k2_, k3_, k4_, k5_, k6_, k7_, y_;
};

}  // namespace

Trajectory integrate(const FieldState& state0, const ModelParams& params,
                     const Lattice& lattice, const IntegratorConfig& config,
                     const std::vector<double>& save_times) {
  config.validate();
  if (save_times.empty()) throw ConfigError("save_times must not be empty");
  for (std::size_t i = 0; i < save_times.size(); ++i) {
    if (save_times[i] < 0.0 || save_times[i] > config.t_max * (1.0 + 1e-12))
      throw ConfigError("save times must lie in [0, t_max]");
    if (i > 0 && save_times[i] <= save_times[i - 1])
      throw ConfigError("save times must be strictly increasing");
  }
  if (state0.num_sites() != lattice.num_sites())
    throw ValidationError("state size does not match lattice");

  Trajectory traj;
  Eigen::VectorXcd psi = state0.amplitudes();
  const double H0 = hamiltonian_energy(state0, params, lattice);

  auto snapshot = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(psi);
    const double norm2 = psi.squaredNorm();
    traj.norm.push_back(norm2);
    double onsite = 0.0;
    for (Eigen::Index j = 0; j < psi.size(); ++j) {
      const double I = std::norm(psi[j]);
      onsite += 0.5 * params.U * I * I - params.mu * I;
    }
    double hop = 0.0;
    for (const auto& [a, b] : lattice.bonds())
      hop += psi[a].real() * psi[b].real() + psi[a].imag() * psi[b].imag();
    traj.energy.push_back(onsite - 2.0 * params.J * hop);
    if (!(std::abs(norm2 - 1.0) <= config.norm_drift_limit))  // NaN-safe
      throw DivergedError("norm drift exceeded limit at t=" + std::to_string(t));
  };

  snapshot(0.0);
  (void)H0;

  double t = 0.0;
  if (config.scheme == IntegratorConfig::Scheme::AdaptiveRK) {
    DormandPrinceStepper stepper(params, lattice, config.tolerance);
    for (double ts : save_times) {
      if (ts <= 0.0) continue;
      stepper.advance(psi, t, ts);
      t = ts;
      snapshot(t);
    }
    return traj;
  }

  MidpointStepper stepper(params, lattice, config);
  for (double ts : save_times) {
    if (ts <= 0.0) continue;
    // March in dt-sized steps, shortening the last one to hit the save point.
    while (t < ts - 1e-15 * std::max(1.0, ts)) {
      const double h = std::min(config.dt, ts - t);
      stepper.step(psi, h);
      t += h;
      if (t > ts - 1e-12 * std::max(1.0, ts)) t = ts;
    }
    t = ts;
    snapshot(t);
  }
  return traj;
}

ConservationReport check_conservation(const Trajectory& trajectory) {
  if (trajectory.times.empty())
    throw ValidationError("conservation check needs a non-empty trajectory");
  ConservationReport report;
  const double H0 = trajectory.energy.front();
  const double scale = std::abs(H0) > 1e-30 ? std::abs(H0) : 1.0;
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    report.max_energy_drift =
        std::max(report.max_energy_drift, std::abs(trajectory.energy[i] - H0) / scale);
    report.max_norm_drift =
        std::max(report.max_norm_drift, std::abs(trajectory.norm[i] - 1.0));
  }
  return report;
}

}  // namespace bhc
