#include "bhc/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "bhc/chaos.hpp"
#include "bhc/dynamics.hpp"
#include "bhc/transport.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bhc {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw ConfigError("cannot open output file " + path.string());
    out_ << header << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::string fmt_int(long long v) { return std::to_string(v); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  out << j.dump(2) << '\n';
}

const char* error_kind(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const DivergedError*>(&e)) return "DivergedError";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const WindowError*>(&e)) return "WindowError";
  if (dynamic_cast<const MeshError*>(&e)) return "MeshError";
  return "Error";
}

constexpr const char* kVersion = "1.0.0";

EnsembleSpec resolved_ensemble(const RunConfig& cfg) {
  EnsembleSpec spec = cfg.ensemble;
  spec.seed = cfg.seed;
  spec.save_times = log_spaced_times(cfg.t_min, cfg.t_max, cfg.points_per_decade);
  return spec;
}

void require_filled(const RunConfig& cfg) {
  if (cfg.ensemble.filled.empty())
    throw ValidationError(
        "this command integrates sampled orbits; set 'filled' (initially "
        "occupied sites) in the config");
}

std::string ladder_name(LadderKind k) {
  switch (k) {
    case LadderKind::Variance4m: return "variance_4m";
    case LadderKind::Variance2m: return "variance_2m";
    case LadderKind::MeanLadder: return "mean_2m_minus_2";
  }
  return "?";
}

// --- command implementations ---------------------------------------------

void cmd_simulate(const RunConfig& cfg, const Lattice& lattice,
                  const fs::path& dir, std::vector<std::string>& files) {
  require_filled(cfg);
  EnsembleSpec spec = resolved_ensemble(cfg);
  spec.validate(lattice);
  const FieldState state0 = sample_orbit(spec, lattice, cfg.orbit);
  IntegratorConfig ic = cfg.integrator;
  ic.t_max = spec.save_times.back();
  const Trajectory traj = integrate(state0, cfg.params, lattice, ic, spec.save_times);

  CsvWriter csv(dir / "trajectory.csv", "t,site,I,phi,energy_drift,norm_drift");
  const double e0 = traj.energy.front();
  const double e_scale = std::max(std::abs(e0), 1e-300);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Eigen::VectorXcd& psi = traj.states[k];
    const std::string t = format_double(traj.times[k]);
    const std::string e_drift = format_double(std::abs(traj.energy[k] - e0) / e_scale);
    const std::string n_drift = format_double(std::abs(traj.norm[k] - 1.0));
    for (int j = 0; j < psi.size(); ++j) {
      csv.row({t, fmt_int(j + 1), format_double(std::norm(psi[j])),
               format_double(std::arg(psi[j])), e_drift, n_drift});
    }
  }
  files.push_back("trajectory.csv");
}

void cmd_lyapunov(const RunConfig& cfg, const Lattice& lattice,
                  const fs::path& dir, std::vector<std::string>& files) {
  require_filled(cfg);
  EnsembleSpec spec = cfg.ensemble;
  spec.seed = cfg.seed;
  spec.save_times = {1.0};  // orbit sampling only; the horizon drives the run
  spec.validate(lattice);
  const FieldState state0 = sample_orbit(spec, lattice, cfg.orbit);
  const LyapunovResult res =
      lyapunov_spectrum(state0, cfg.params, lattice, cfg.integrator, cfg.horizon,
                        cfg.renorm_interval, cfg.warmup);

  const int n = static_cast<int>(res.exponents.size());
  std::string header = "epoch";
  for (int i = 1; i <= n; ++i) header += ",lambda_" + std::to_string(i);
  CsvWriter csv(dir / "lyapunov.csv", header);
  for (std::size_t k = 0; k < res.history.size(); ++k) {
    Eigen::VectorXd sorted = res.history[k];
    std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<double>());
    std::vector<std::string> cells;
    cells.reserve(n + 1);
    cells.push_back(fmt_int(static_cast<long long>(k) + 1));
    for (int i = 0; i < n; ++i) cells.push_back(format_double(sorted[i]));
    csv.row(cells);
  }
  files.push_back("lyapunov.csv");

  json summary;
  summary["lambda_max"] = res.exponents[0];
  summary["pairing_error"] = res.pairing_error;
  summary["horizon"] = res.horizon;
  summary["warmup"] = cfg.warmup;
  summary["renorm_interval"] = cfg.renorm_interval;
  summary["exponents"] = std::vector<double>(res.exponents.data(),
                                             res.exponents.data() + n);
  write_json(dir / "lyapunov_summary.json", summary);
  files.push_back("lyapunov_summary.json");
}

void cmd_diffuse(const RunConfig& cfg, const Lattice& lattice,
                 const fs::path& dir, std::vector<std::string>& files,
                 int n_threads) {
  require_filled(cfg);
  EnsembleSpec spec = resolved_ensemble(cfg);
  spec.validate(lattice);
  IntegratorConfig ic = cfg.integrator;
  EnsembleDiagnostics diag;
  const MomentSeries series =
      run_ensemble(spec, cfg.params, lattice, ic, n_threads, &diag);
  const int L = lattice.num_sites();

  {
    CsvWriter csv(dir / "moments.csv", "t,site,mean,var,se_mean,se_var");
    for (std::size_t k = 0; k < series.times.size(); ++k) {
      const std::string t = format_double(series.times[k]);
      for (int j = 0; j < L; ++j) {
        csv.row({t, fmt_int(j + 1), format_double(series.mean(k, j)),
                 format_double(series.variance(k, j)),
                 format_double(series.se_mean(k, j)),
                 format_double(series.se_var(k, j))});
      }
    }
    files.push_back("moments.csv");
  }

  const FilledSiteMap dist = distance_map(lattice, spec.filled);
  json fits = json::array();
  for (int j = 0; j < L; ++j) {
    const int m = dist.distance[j];
    for (const auto& [moment, ladder] :
         {std::pair{MomentKind::Variance, LadderKind::Variance4m},
          std::pair{MomentKind::Mean, LadderKind::MeanLadder}}) {
      json entry;
      entry["site"] = j + 1;
      entry["ladder_type"] = ladder_name(ladder);
      entry["m"] = m;
      try {
        const FitWindow window = default_fit_window(series, j, ic.dt);
        ExponentFit fit = fit_exponent(series, j, moment, window, ladder);
        fit = classify_ladder(fit, m);
        entry["slope"] = fit.slope;
        entry["r2"] = fit.r2;
        entry["window"] = {fit.window.t_min, fit.window.t_max};
        if (fit.classified)
          entry["classified"] = *fit.classified;
        else
          entry["classified"] = nullptr;
      } catch (const Error& e) {
        entry["error"] = std::string(error_kind(e)) + ": " + e.what();
      }
      fits.push_back(entry);
    }
  }
  write_json(dir / "fits.json", fits);
  files.push_back("fits.json");

  {
    // Per-site moment columns plus pure power-law reference columns with the
    // ladder slopes (arbitrary normalization, for dashed guide lines).
    std::string header = "t";
    for (int j = 0; j < L; ++j) header += ",mean_" + std::to_string(j + 1);
    for (int j = 0; j < L; ++j) header += ",var_" + std::to_string(j + 1);
    for (int j = 0; j < L; ++j) header += ",ref_mean_" + std::to_string(j + 1);
    for (int j = 0; j < L; ++j) header += ",ref_var_" + std::to_string(j + 1);
    CsvWriter csv(dir / "plot_data.csv", header);
    for (std::size_t k = 0; k < series.times.size(); ++k) {
      const double t = series.times[k];
      std::vector<std::string> cells;
      cells.reserve(1 + 4 * L);
      cells.push_back(format_double(t));
      for (int j = 0; j < L; ++j) cells.push_back(format_double(series.mean(k, j)));
      for (int j = 0; j < L; ++j) cells.push_back(format_double(series.variance(k, j)));
      for (int j = 0; j < L; ++j)
        cells.push_back(format_double(
            std::pow(t, ladder_rung(LadderKind::MeanLadder, dist.distance[j]))));
      for (int j = 0; j < L; ++j)
        cells.push_back(format_double(
            std::pow(t, ladder_rung(LadderKind::Variance4m, dist.distance[j]))));
      csv.row(cells);
    }
    files.push_back("plot_data.csv");
  }

  json diagnostics;
  diagnostics["n_orbits"] = series.n_orbits;
  diagnostics["max_energy_drift"] = diag.max_energy_drift;
  diagnostics["max_norm_drift"] = diag.max_norm_drift;
  write_json(dir / "diagnostics.json", diagnostics);
  files.push_back("diagnostics.json");
}

void cmd_thermo(const RunConfig& cfg, const fs::path& dir,
                std::vector<std::string>& files) {
  const int L = cfg.thermo_sites;
  std::vector<double> betas;
  if (cfg.beta_points == 1) {
    betas.push_back(cfg.beta_min);
  } else {
    for (int i = 0; i < cfg.beta_points; ++i)
      betas.push_back(cfg.beta_min + (cfg.beta_max - cfg.beta_min) * i /
                                         (cfg.beta_points - 1));
  }

  CsvWriter csv(dir / "thermo.csv", "beta,L,kind,value,E,C,truncation_order,tail_estimate");
  struct OracleRow {
    double beta;
    const char* kind;
    double value, oracle, diff, tol;
    bool ok;
  };
  std::vector<OracleRow> oracle_rows;
  for (double beta : betas) {
    const std::string b = format_double(beta);
    const ThermoPoint ann = annealed_logZ_series(cfg.params, beta, L, cfg.series);
    const ThermoDerivatives ec = annealed_series_EC(cfg.params, beta, L, cfg.series);
    csv.row({b, fmt_int(L), "log_Z_annealed", format_double(ann.value),
             format_double(ec.energy), format_double(ec.heat_capacity),
             fmt_int(ann.truncation_order), format_double(ann.tail_estimate)});

    const ThermoPoint que = quenched_F_series(cfg.params, beta, L, cfg.series);
    const QuenchedFirstOrder qfo = quenched_first_order(cfg.params, beta, L);
    csv.row({b, fmt_int(L), "F_quenched", format_double(que.value),
             format_double(qfo.E), format_double(qfo.C),
             fmt_int(que.truncation_order), format_double(que.tail_estimate)});

    const ThermoPoint gauss = gaussian_path_Z(cfg.params, beta, L);
    csv.row({b, fmt_int(L), "log_Z_gauss", format_double(gauss.value),
             format_double(0.5 * L / beta), format_double(0.5 * L), "0", "0"});

    if (cfg.thermo_oracles && (L == 2 || L == 3)) {
      const double quad = quadrature_annealed_oracle(cfg.params, beta, L, 64);
      const double ann_tol = std::max(1e-3 * std::abs(quad), 1e-12);
      oracle_rows.push_back({beta, "log_Z_annealed", ann.value, quad,
                             std::abs(ann.value - quad), ann_tol,
                             std::abs(ann.value - quad) <= ann_tol});
      const double simplex = simplex_quenched_oracle(cfg.params, beta, L, SimplexMesh{});
      oracle_rows.push_back({beta, "F_quenched", que.value, simplex,
                             std::abs(que.value - simplex), 1e-3,
                             std::abs(que.value - simplex) <= 1e-3});
    }
  }
  files.push_back("thermo.csv");

  if (cfg.thermo_oracles && (L == 2 || L == 3)) {
    CsvWriter ocsv(dir / "thermo_oracle.csv", "beta,L,kind,value,oracle,abs_diff,tolerance,ok");
    for (const OracleRow& r : oracle_rows) {
      ocsv.row({format_double(r.beta), fmt_int(L), r.kind, format_double(r.value),
                format_double(r.oracle), format_double(r.diff),
                format_double(r.tol), r.ok ? "1" : "0"});
    }
    files.push_back("thermo_oracle.csv");
  }
}

}  // namespace

int run(const RunConfig& cfg, int n_threads) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    // No place to put error.json; report on stderr via exception text.
    std::fprintf(stderr, "{\"error\":\"ConfigError\",\"message\":\"cannot create output directory %s\"}\n",
                 cfg.out_dir.c_str());
    return 1;
  }
  std::vector<std::string> files;
  try {
    if (!cfg.command)
      throw ValidationError("no command selected; set 'command' in the config or pass --command");
    if (n_threads < 1) throw ConfigError("thread count must be >= 1");

    switch (*cfg.command) {
      case Command::Simulate:
        cmd_simulate(cfg, cfg.make_lattice(), dir, files);
        break;
      case Command::Lyapunov:
        cmd_lyapunov(cfg, cfg.make_lattice(), dir, files);
        break;
      case Command::Diffuse:
        cmd_diffuse(cfg, cfg.make_lattice(), dir, files, n_threads);
        break;
      case Command::Thermo:
        cmd_thermo(cfg, dir, files);
        break;
    }

    std::sort(files.begin(), files.end());
    json manifest;
    manifest["command"] = command_name(*cfg.command);
    manifest["config_hash"] = cfg.config_hash;
    manifest["seed"] = cfg.seed;
    manifest["version"] = kVersion;
    manifest["files"] = files;
    write_json(dir / "manifest.json", manifest);
    return 0;
  } catch (const Error& e) {
    json err;
    err["error"] = error_kind(e);
    err["message"] = e.what();
    write_json(dir / "error.json", err);
    return 1;
  }
}

}  // namespace bhc
