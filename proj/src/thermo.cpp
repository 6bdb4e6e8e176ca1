#include "bhc/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bhc/rng.hpp"

namespace bhc {

namespace {

constexpr double kLogPi = 1.1447298858494001741;  // log(pi)
constexpr double kLog2Pi = 1.8378770664093454836; // log(2*pi)

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

/// log I_0(x), overflow-safe: switches to the large-argument asymptotic form
/// (relative error < 1e-12 for x > 50) before cyl_bessel_i overflows.
double log_bessel_i0(double x) {
  x = std::abs(x);
  if (x < 50.0) return std::log(std::cyl_bessel_i(0.0, x));
  const double inv8x = 1.0 / (8.0 * x);
  return x - 0.5 * std::log(2.0 * M_PI * x) +
         std::log1p(inv8x * (1.0 + 4.5 * inv8x));
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
/// Legendre polynomial (symmetric pairs share one solve).
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussRule gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

/// Per-bond transfer factor of the annealed hopping expansion, scaled by
/// 1/sqrt(pi) per Gamma factor so the zeroth shell is exactly 1 (the
/// pi^{L/2} thus removed is restored analytically in log space).
double transfer_factor(int k_prev, int k) {
  return std::exp(std::lgamma(0.5 * (k_prev + k + 1)) - 0.5 * kLogPi -
                  2.0 * std::lgamma(static_cast<double>(k) + 1.0));
}

/// Shell sums T~_K of the annealed expansion for K = 0..k_max: sum over all
/// bond-order assignments with total order K of the chain product of
/// transfer factors. Transfer recursion over the L-1 bond orders; state is
/// (current bond order, accumulated total order).
std::vector<double> annealed_shells(int L, int k_max) {
  const int n = k_max + 1;
  // dp[k][s]: sum over (k_1..k_j) with k_j = k and total s.
  std::vector<std::vector<double>> dp(n, std::vector<double>(n, 0.0));
  for (int k = 0; k < n; ++k) dp[k][k] = transfer_factor(0, k);
  for (int j = 2; j <= L - 1; ++j) {
    std::vector<std::vector<double>> next(n, std::vector<double>(n, 0.0));
    for (int k2 = 0; k2 < n; ++k2) {
      for (int s2 = k2; s2 < n; ++s2) {
        double acc = 0.0;
        for (int k1 = 0; k1 <= s2 - k2; ++k1) {
          acc += dp[k1][s2 - k2] * transfer_factor(k1, k2);
        }
        next[k2][s2] = acc;
      }
    }
    dp.swap(next);
  }
  std::vector<double> shells(n, 0.0);
  for (int s = 0; s < n; ++s) {
    double acc = 0.0;
    for (int k = 0; k <= s; ++k) {
      // Closing factor for the chain end (its bond partner has order 0).
      acc += dp[k][s] * std::exp(std::lgamma(0.5 * (k + 1)) - 0.5 * kLogPi);
    }
    shells[s] = acc;
  }
  return shells;
}

/// Coefficients c_K of log(sum_k x^k/(k!)^2) via the standard power-series
/// logarithm recurrence.
std::vector<double> log_bessel_series_coeffs(int k_max) {
  const int n = k_max + 1;
  std::vector<double> a(n, 0.0), c(n, 0.0);
  for (int k = 0; k < n; ++k) a[k] = std::exp(-2.0 * std::lgamma(k + 1.0));
  for (int k = 1; k < n; ++k) {
    double acc = a[k];
    for (int j = 1; j < k; ++j) acc -= (static_cast<double>(j) / k) * c[j] * a[k - j];
    c[k] = acc;
  }
  return c;
}

double log_sum_exp(const std::vector<double>& logs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logs) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

/// Quenched leading bracket: exact solid-simplex averages of the on-site
/// terms, L log 2pi + beta mu L/(L+1) - beta U L/((L+1)(L+2)), in units of
/// the bare simplex integral times L!.
double quenched_bracket(const ModelParams& p, double beta, int L) {
  return L * kLog2Pi + beta * p.mu * L / (L + 1.0) -
         beta * p.U * L / ((L + 1.0) * (L + 2.0));
}

double half_gaussian_sigma(double beta, double U) {
  return 1.0 / std::sqrt(beta * U);
}

}  // namespace

void SeriesConfig::validate() const {
  if (k_max < 1) throw ConfigError("series k_max must be >= 1");
  if (!(shell_ratio_threshold > 0.0) || !(shell_ratio_threshold < 1.0))
    throw ConfigError("series shell_ratio_threshold must lie in (0, 1)");
}

ThermoPoint annealed_logZ_series(const ModelParams& params, double beta, int L,
                                 const SeriesConfig& cfg) {
  cfg.validate();
  require(beta > 0.0, "inverse temperature must be positive");
  require(params.U > 0.0, "on-site coupling must be positive");
  require(L >= 2, "chain length must be at least 2");

  const std::vector<double> shells = annealed_shells(L, cfg.k_max);
  const double x = 2.0 * beta * params.J * params.J / params.U;
  std::vector<double> log_shell(shells.size());
  for (std::size_t K = 0; K < shells.size(); ++K) {
    log_shell[K] = (x > 0.0 ? K * std::log(x) : (K == 0 ? 0.0 : -std::numeric_limits<double>::infinity())) +
                   std::log(shells[K]);
  }
  const double log_sum = log_sum_exp(log_shell);
  const double last = log_shell.back();
  const double prev = log_shell[log_shell.size() - 2];
  if (std::isfinite(last) && last - prev > std::log(cfg.shell_ratio_threshold)) {
    throw ConvergenceError(
        "annealed hopping series: shell ratio " +
        std::to_string(std::exp(last - prev)) + " exceeds threshold " +
        std::to_string(cfg.shell_ratio_threshold) + " at order " +
        std::to_string(cfg.k_max));
  }

  ThermoPoint pt;
  pt.beta = beta;
  pt.num_sites = L;
  pt.kind = ThermoKind::LogZAnnealed;
  pt.value = L * kLog2Pi + beta * params.mu * params.mu * L / (2.0 * params.U) -
             0.5 * L * std::log(2.0 * beta * params.U) + 0.5 * L * kLogPi +
             log_sum;
  pt.truncation_order = cfg.k_max;
  pt.tail_estimate = std::isfinite(last) ? std::exp(last - log_sum) : 0.0;
  return pt;
}

AnnealedFirstOrder annealed_first_order(const ModelParams& params, double beta,
                                        int L) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(params.U > 0.0, "on-site coupling must be positive");
  require(L >= 2, "chain length must be at least 2");
  const double g = M_PI / (2.0 * beta * params.U);  // zeroth-shell on-site factor
  const double hop = (L - 1) * params.J * params.J / (params.U * params.U);
  AnnealedFirstOrder out;
  out.log_Z = L * kLog2Pi +
              beta * params.mu * params.mu * L / (2.0 * params.U) +
              (0.5 * L - 1.0) * std::log(g) + std::log(g + hop);
  out.F = -(1.0 / beta) *
          (L * kLog2Pi + beta * params.mu * params.mu * L / (2.0 * params.U) +
           0.5 * L * std::log(g) +
           2.0 * (L - 1) * params.J * params.J * beta / (M_PI * params.U));
  out.E = 0.5 * L * (1.0 / beta - params.mu * params.mu / params.U);
  out.C = 0.5 * L;
  return out;
}

ThermoPoint quenched_F_series(const ModelParams& params, double beta, int L,
                              const SeriesConfig& cfg) {
  cfg.validate();
  require(beta > 0.0, "inverse temperature must be positive");
  require(L >= 2, "chain length must be at least 2");

  const std::vector<double> c = log_bessel_series_coeffs(cfg.k_max);
  const double x = beta * beta * params.J * params.J;
  const double inv_lfact = std::exp(-std::lgamma(L + 1.0));
  double series = 0.0;
  double last_term = 0.0;
  double prev_mag = std::numeric_limits<double>::infinity();
  int growth_streak = 0;
  for (int K = 1; K <= cfg.k_max; ++K) {
    const double term =
        c[K] * std::pow(x, K) *
        std::exp(2.0 * std::lgamma(K + 1.0) - std::lgamma(2.0 * K + L + 1.0));
    series += term;
    last_term = term;
    const double mag = std::abs(term);
    if (mag > prev_mag) {
      if (++growth_streak >= 2) {
        throw ConvergenceError(
            "quenched hopping series: shell magnitudes growing at order " +
            std::to_string(K) + " (coupling beta*J outside the convergent range)");
      }
    } else {
      growth_streak = 0;
    }
    prev_mag = mag;
  }

  ThermoPoint pt;
  pt.beta = beta;
  pt.num_sites = L;
  pt.kind = ThermoKind::FreeEnergyQuenched;
  const double total =
      quenched_bracket(params, beta, L) * inv_lfact + (L - 1) * series;
  pt.value = -total / beta;
  pt.truncation_order = cfg.k_max;
  pt.tail_estimate =
      total != 0.0 ? std::abs((L - 1) * last_term / total) : 0.0;
  return pt;
}

QuenchedFirstOrder quenched_first_order(const ModelParams& params, double beta,
                                        int L) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(L >= 2, "chain length must be at least 2");
  const double inv_lfact = std::exp(-std::lgamma(L + 1.0));
  const double x = beta * beta * params.J * params.J;
  QuenchedFirstOrder out;
  out.F = -(inv_lfact / beta) *
          (quenched_bracket(params, beta, L) +
           x * (L - 1) / ((L + 1.0) * (L + 2.0)));
  out.E = (params.U - params.mu * L - 2.0 * beta * params.J * params.J) *
          inv_lfact / L;
  out.C = 2.0 * x * inv_lfact / L;
  return out;
}

ThermoPoint gaussian_path_Z(const ModelParams& params, double beta, int L) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(params.U > 0.0, "on-site coupling must be positive");
  require(L >= 2, "chain length must be at least 2");
  ThermoPoint pt;
  pt.beta = beta;
  pt.num_sites = L;
  pt.kind = ThermoKind::LogZGaussian;
  pt.value = 0.5 * L * std::log(2.0 * M_PI / (beta * params.U));
  pt.truncation_order = 0;
  pt.tail_estimate = 0.0;
  return pt;
}

double gaussian_path_log_normalization(int L) { return L * kLogPi; }

double mean_kinetic_energy(const ModelParams& params, double temperature,
                           double v_bar) {
  require(params.U > 0.0, "on-site coupling must be positive");
  require(temperature > 0.0, "temperature must be positive");
  return params.mu * params.mu / (2.0 * params.U) -
         params.mu * v_bar / (2.0 * params.U) + 0.5 * temperature;
}

McEstimate mc_annealed_oracle(const ModelParams& params, double beta, int L,
                              std::int64_t n_samples, std::uint64_t seed) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(params.U > 0.0, "on-site coupling must be positive");
  require(L >= 2 && L <= 6, "importance-sampling oracle supports 2 <= L <= 6");
  require(n_samples >= 2, "need at least 2 samples");

  const double sigma = half_gaussian_sigma(beta, params.U);
  Rng rng(seed);
  std::vector<double> I(L);
  double sum_w = 0.0, sum_w2 = 0.0;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    for (int j = 0; j < L; ++j) I[j] = sigma * std::abs(rng.gaussian());
    double log_w = 0.0;
    for (int j = 0; j < L; ++j) log_w += beta * params.mu * I[j];
    for (int j = 0; j + 1 < L; ++j)
      log_w += log_bessel_i0(2.0 * beta * params.J * std::sqrt(I[j] * I[j + 1]));
    const double w = std::exp(log_w);
    sum_w += w;
    sum_w2 += w * w;
  }
  const double n = static_cast<double>(n_samples);
  const double mean_w = sum_w / n;
  const double var_w = std::max(0.0, sum_w2 / n - mean_w * mean_w);
  const double se_w = std::sqrt(var_w / (n - 1.0));

  McEstimate out;
  out.value = L * kLog2Pi + 0.5 * L * std::log(M_PI / (2.0 * beta * params.U)) +
              std::log(mean_w);
  out.std_error = se_w / mean_w;  // delta method for log of the mean
  out.n_samples = n_samples;
  return out;
}

double quadrature_annealed_oracle(const ModelParams& params, double beta,
                                  int L, int nodes_per_dim) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(params.U > 0.0, "on-site coupling must be positive");
  require(L == 2 || L == 3, "tensor quadrature oracle supports L in {2, 3}");
  require(nodes_per_dim >= 8, "need at least 8 quadrature nodes per axis");

  const double sigma = half_gaussian_sigma(beta, params.U);
  const double i_max = std::max(0.0, params.mu / params.U) + 12.0 * sigma;
  const GaussRule rule = gauss_legendre(nodes_per_dim);
  std::vector<double> node(nodes_per_dim), weight(nodes_per_dim);
  for (int i = 0; i < nodes_per_dim; ++i) {
    node[i] = 0.5 * i_max * (rule.nodes[i] + 1.0);
    weight[i] = 0.5 * i_max * rule.weights[i];
  }

  auto site_log = [&](double I) {
    return beta * params.mu * I - 0.5 * beta * params.U * I * I;
  };
  auto bond_log = [&](double Ia, double Ib) {
    return log_bessel_i0(2.0 * beta * params.J * std::sqrt(Ia * Ib));
  };

  double integral = 0.0;
  if (L == 2) {
    for (int a = 0; a < nodes_per_dim; ++a)
      for (int b = 0; b < nodes_per_dim; ++b)
        integral += weight[a] * weight[b] *
                    std::exp(site_log(node[a]) + site_log(node[b]) +
                             bond_log(node[a], node[b]));
  } else {
    for (int a = 0; a < nodes_per_dim; ++a)
      for (int b = 0; b < nodes_per_dim; ++b)
        for (int cidx = 0; cidx < nodes_per_dim; ++cidx)
          integral += weight[a] * weight[b] * weight[cidx] *
                      std::exp(site_log(node[a]) + site_log(node[b]) +
                               site_log(node[cidx]) +
                               bond_log(node[a], node[b]) +
                               bond_log(node[b], node[cidx]));
  }
  return L * kLog2Pi + std::log(integral);
}

namespace {

/// Integrand of the quenched average: log of the phase-integrated weight at
/// fixed occupations.
double log_phase_partition(const ModelParams& p, double beta,
                           const std::vector<double>& I) {
  const int L = static_cast<int>(I.size());
  double g = L * kLog2Pi;
  for (int j = 0; j < L; ++j)
    g += beta * p.mu * I[j] - 0.5 * beta * p.U * I[j] * I[j];
  for (int j = 0; j + 1 < L; ++j)
    g += log_bessel_i0(2.0 * beta * p.J * std::sqrt(I[j] * I[j + 1]));
  return g;
}

double simplex_integral(const ModelParams& p, double beta, int L, int n) {
  const GaussRule rule = gauss_legendre(n);
  auto mapped = [&](double lo, double hi, int i, double* w) {
    *w = 0.5 * (hi - lo) * rule.weights[i];
    return lo + 0.5 * (hi - lo) * (rule.nodes[i] + 1.0);
  };
  double acc = 0.0;
  std::vector<double> I(L);
  if (L == 2) {
    for (int a = 0; a < n; ++a) {
      double wa;
      I[0] = mapped(0.0, 1.0, a, &wa);
      for (int b = 0; b < n; ++b) {
        double wb;
        I[1] = mapped(0.0, 1.0 - I[0], b, &wb);
        acc += wa * wb * log_phase_partition(p, beta, I);
      }
    }
  } else {
    for (int a = 0; a < n; ++a) {
      double wa;
      I[0] = mapped(0.0, 1.0, a, &wa);
      for (int b = 0; b < n; ++b) {
        double wb;
        I[1] = mapped(0.0, 1.0 - I[0], b, &wb);
        for (int cidx = 0; cidx < n; ++cidx) {
          double wc;
          I[2] = mapped(0.0, 1.0 - I[0] - I[1], cidx, &wc);
          acc += wa * wb * wc * log_phase_partition(p, beta, I);
        }
      }
    }
  }
  return acc;
}

}  // namespace

double simplex_quenched_oracle(const ModelParams& params, double beta, int L,
                               const SimplexMesh& mesh) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(L == 2 || L == 3, "simplex quadrature oracle supports L in {2, 3}");
  if (mesh.nodes_per_dim < 8)
    throw ConfigError("simplex mesh needs at least 8 nodes per axis");
  if (!(mesh.tolerance > 0.0))
    throw ConfigError("simplex mesh tolerance must be positive");

  const double coarse = -simplex_integral(params, beta, L, mesh.nodes_per_dim) / beta;
  const double fine = -simplex_integral(params, beta, L, 2 * mesh.nodes_per_dim) / beta;
  if (std::abs(fine - coarse) > 10.0 * mesh.tolerance) {
    throw MeshError("simplex quadrature not converged: refinement moved the "
                    "result by " +
                    std::to_string(std::abs(fine - coarse)));
  }
  return fine;
}

McEstimate mc_phase_velocity_oracle(const ModelParams& params, double beta,
                                    int L, int site, std::int64_t n_samples,
                                    std::uint64_t seed) {
  require(beta > 0.0, "inverse temperature must be positive");
  require(params.U > 0.0, "on-site coupling must be positive");
  require(L >= 2, "chain length must be at least 2");
  require(site >= 0 && site < L, "site index out of range");
  require(n_samples >= 2, "need at least 2 samples");

  const double sigma = half_gaussian_sigma(beta, params.U);
  Rng rng(seed);
  std::vector<double> I(L), phi(L);
  double sum_w = 0.0, sum_wf = 0.0;
  std::vector<double> w_all(static_cast<std::size_t>(n_samples));
  std::vector<double> f_all(static_cast<std::size_t>(n_samples));
  for (std::int64_t s = 0; s < n_samples; ++s) {
    for (int j = 0; j < L; ++j) {
      I[j] = sigma * std::abs(rng.gaussian());
      phi[j] = 2.0 * M_PI * rng.uniform();
    }
    double log_w = 0.0;
    for (int j = 0; j < L; ++j) log_w += beta * params.mu * I[j];
    for (int j = 0; j + 1 < L; ++j)
      log_w += 2.0 * beta * params.J * std::sqrt(I[j] * I[j + 1]) *
               std::cos(phi[j] - phi[j + 1]);
    const double w = std::exp(log_w);

    double phidot = params.U * I[site] - params.mu;
    for (int k : {site - 1, site + 1}) {
      if (k < 0 || k >= L) continue;
      phidot -= params.J * std::sqrt(I[k] / I[site]) *
                std::cos(phi[site] - phi[k]);
    }
    const double f = phidot * phidot / (2.0 * params.U);
    sum_w += w;
    sum_wf += w * f;
    w_all[static_cast<std::size_t>(s)] = w;
    f_all[static_cast<std::size_t>(s)] = f;
  }
  const double ratio = sum_wf / sum_w;
  double se2 = 0.0;
  for (std::size_t s = 0; s < w_all.size(); ++s) {
    const double d = w_all[s] * (f_all[s] - ratio);
    se2 += d * d;
  }
  McEstimate out;
  out.value = ratio;
  out.std_error = std::sqrt(se2) / sum_w;
  out.n_samples = n_samples;
  return out;
}

ThermoDerivatives annealed_series_EC(const ModelParams& params, double beta,
                                     int L, const SeriesConfig& cfg,
                                     double rel_step) {
  require(rel_step > 0.0 && rel_step < 0.5, "relative step must lie in (0, 0.5)");
  const double h = rel_step * beta;
  const double zm = annealed_logZ_series(params, beta - h, L, cfg).value;
  const double z0 = annealed_logZ_series(params, beta, L, cfg).value;
  const double zp = annealed_logZ_series(params, beta + h, L, cfg).value;
  ThermoDerivatives out;
  out.energy = -(zp - zm) / (2.0 * h);
  out.heat_capacity = beta * beta * (zp - 2.0 * z0 + zm) / (h * h);
  return out;
}

}  // namespace bhc
