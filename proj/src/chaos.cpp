#include "bhc/chaos.hpp"

#include <algorithm>
#include <cmath>

#include "bhc/errors.hpp"

namespace bhc {

Eigen::VectorXd to_real_tangent(const Eigen::VectorXcd& psi) {
  Eigen::VectorXd x(2 * psi.size());
  for (Eigen::Index j = 0; j < psi.size(); ++j) {
    x[2 * j] = psi[j].real();
    x[2 * j + 1] = psi[j].imag();
  }
  return x;
}

Eigen::VectorXcd from_real_tangent(const Eigen::VectorXd& x) {
  if (x.size() % 2 != 0) throw ValidationError("real tangent vector must have even length");
  Eigen::VectorXcd psi(x.size() / 2);
  for (Eigen::Index j = 0; j < psi.size(); ++j) psi[j] = Complex(x[2 * j], x[2 * j + 1]);
  return psi;
}

void tangent_jacobian_raw(const Eigen::VectorXcd& psi, const ModelParams& params,
                          const Lattice& lattice, Eigen::MatrixXd& out) {
  const int n = lattice.num_sites();
  if (psi.size() != n) throw ValidationError("state size does not match lattice");
  out.setZero(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    const double a = psi[j].real();
    const double b = psi[j].imag();
    // Local frequency U|psi|^2 - mu; the 2x2 block is the linearization of
    //   da/dt = -G b + J sum b_k,  db/dt = G a - J sum a_k.
    const double g = params.U * (a * a + b * b) - params.mu;
    out(2 * j, 2 * j) = -2.0 * params.U * a * b;
    out(2 * j, 2 * j + 1) = -(g + 2.0 * params.U * b * b);
    out(2 * j + 1, 2 * j) = g + 2.0 * params.U * a * a;
    out(2 * j + 1, 2 * j + 1) = 2.0 * params.U * a * b;
    const auto [first, last] = lattice.neighbors(j);
    for (const int* k = first; k != last; ++k) {
      out(2 * j, 2 * *k + 1) = params.J;
      out(2 * j + 1, 2 * *k) = -params.J;
    }
  }
}

Eigen::MatrixXd tangent_jacobian(const FieldState& state, const ModelParams& params,
                                 const Lattice& lattice) {
  Eigen::MatrixXd out;
  tangent_jacobian_raw(state.amplitudes(), params, lattice, out);
  return out;
}

namespace {

/// Exact derivative of one implicit midpoint step: with A = Df at the
/// converged midpoint stage, the step map has Jacobian
///   (I - h/2 A)^{-1} (I + h/2 A),
/// applied here to the columns of M in place.
class TangentPropagator {
 public:
  explicit TangentPropagator(int dim)
      : a_(dim, dim), rhs_(), eye_(Eigen::MatrixXd::Identity(dim, dim)) {}

  void apply(const Eigen::VectorXcd& midpoint, const ModelParams& params,
             const Lattice& lattice, double h, Eigen::MatrixXd& m) {
    tangent_jacobian_raw(midpoint, params, lattice, a_);
    rhs_.noalias() = m + (0.5 * h) * (a_ * m);
    lu_.compute(eye_ - (0.5 * h) * a_);
    m = lu_.solve(rhs_);
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd rhs_;
  Eigen::MatrixXd eye_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

struct EpochPlan {
  long long steps_per_epoch = 0;
  long long n_epochs = 0;
  double dt = 0.0;
};

EpochPlan plan_epochs(const IntegratorConfig& config, double horizon, double renorm_interval) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (!(renorm_interval > 0.0) || !std::isfinite(renorm_interval))
    throw ConfigError("renorm_interval must be positive");
  if (horizon < renorm_interval) throw ConfigError("horizon shorter than one renormalization epoch");
  EpochPlan plan;
  plan.dt = config.dt;
  plan.steps_per_epoch = std::max(1LL, std::llround(renorm_interval / config.dt));
  const double epoch_time = static_cast<double>(plan.steps_per_epoch) * plan.dt;
  plan.n_epochs = std::max(1LL, std::llround(std::ceil(horizon / epoch_time - 1e-9)));
  return plan;
}

}  // namespace

LyapunovResult lyapunov_spectrum(const FieldState& state0, const ModelParams& params,
                                 const Lattice& lattice, const IntegratorConfig& config,
                                 double horizon, double renorm_interval, double warmup) {
  config.validate();
  if (warmup < 0.0 || !std::isfinite(warmup)) throw ConfigError("warmup must be >= 0");
  const EpochPlan plan = plan_epochs(config, horizon, renorm_interval);
  const int dim = 2 * lattice.num_sites();

  Eigen::VectorXcd psi = state0.amplitudes();
  MidpointStepper stepper(params, lattice, config);
  const long long warmup_steps = std::llround(warmup / plan.dt);
  for (long long s = 0; s < warmup_steps; ++s) stepper.step(psi, plan.dt);
  TangentPropagator tangent(dim);
  Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(dim);

  LyapunovResult result;
  result.history.reserve(static_cast<std::size_t>(plan.n_epochs));
  result.epoch_times.reserve(static_cast<std::size_t>(plan.n_epochs));

  double t = 0.0;
  for (long long epoch = 0; epoch < plan.n_epochs; ++epoch) {
    for (long long s = 0; s < plan.steps_per_epoch; ++s) {
      stepper.step(psi, plan.dt);
      tangent.apply(stepper.midpoint(), params, lattice, plan.dt, frame);
    }
    t = static_cast<double>((epoch + 1) * plan.steps_per_epoch) * plan.dt;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(frame);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < dim; ++i) {
      const double d = r(i, i);
      if (d == 0.0 || !std::isfinite(d))
        throw DivergedError("tangent frame degenerated during QR renormalization");
      accum[i] += std::log(std::abs(d));
      if (d < 0.0) q.col(i) *= -1.0;  // keep the frame orientation deterministic
    }
    frame = q;
    result.epoch_times.push_back(t);
    result.history.push_back(accum / t);
  }

  result.horizon = t;
  result.exponents = accum / t;
  std::sort(result.exponents.data(), result.exponents.data() + dim, std::greater<double>());
  double pairing = 0.0;
  for (int i = 0; i < dim; ++i)
    pairing = std::max(pairing, std::abs(result.exponents[i] + result.exponents[dim - 1 - i]));
  result.pairing_error = pairing;
  return result;
}

double site_perturbation_growth(const FieldState& state0, int site, const ModelParams& params,
                                const Lattice& lattice, const IntegratorConfig& config,
                                double horizon, double renorm_interval) {
  config.validate();
  if (site < 0 || site >= lattice.num_sites()) throw ValidationError("site index out of range");
  const EpochPlan plan = plan_epochs(config, horizon, renorm_interval);
  const int dim = 2 * lattice.num_sites();

  Eigen::VectorXcd psi = state0.amplitudes();
  MidpointStepper stepper(params, lattice, config);
  TangentPropagator tangent(dim);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(dim, 1);
  v(2 * site, 0) = 1.0;

  double accum = 0.0;
  double t = 0.0;
  for (long long epoch = 0; epoch < plan.n_epochs; ++epoch) {
    for (long long s = 0; s < plan.steps_per_epoch; ++s) {
      stepper.step(psi, plan.dt);
      tangent.apply(stepper.midpoint(), params, lattice, plan.dt, v);
    }
    t = static_cast<double>((epoch + 1) * plan.steps_per_epoch) * plan.dt;
    const double norm = v.col(0).norm();
    if (norm == 0.0 || !std::isfinite(norm))
      throw DivergedError("tangent vector degenerated during renormalization");
    accum += std::log(norm);
    v /= norm;
  }
  return accum / t;
}

}  // namespace bhc
