#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bhc/dynamics.hpp"
#include "bhc/errors.hpp"
#include "bhc/model.hpp"
#include "bhc/thermo.hpp"
#include "bhc/transport.hpp"

namespace bhc {

/// Batch commands understood by the front-end.
enum class Command { Simulate, Lyapunov, Diffuse, Thermo };

const char* command_name(Command c);

/// Fully resolved run description. Produced by parse_config; consumed by
/// run(). Site indices are 0-based here; the text format is 1-based.
struct RunConfig {
  std::optional<Command> command;  ///< must be set (config key or CLI flag) before run()
  std::uint64_t seed = 1;

  ModelParams params;  ///< resolved couplings (J = 1 when given in ratio form)

  int dimension = 1;
  std::vector<int> extents;  ///< {length} or {rows, cols}

  EnsembleSpec ensemble;  ///< filled sites, width, orbit count, target
  double t_min = 1e-2;
  double t_max = 1.0;
  int points_per_decade = 32;
  int orbit = 0;  ///< which sampled orbit simulate/lyapunov integrate

  IntegratorConfig integrator;
  double horizon = 1000.0;  ///< total averaging time of the spectrum run
  double renorm_interval = 1.0;
  double warmup = 0.0;

  SeriesConfig series;
  double beta_min = 0.5;
  double beta_max = 2.0;
  int beta_points = 4;
  int thermo_sites = 2;       ///< chain length entering the thermodynamic series
  bool thermo_oracles = true; ///< also emit the oracle-comparison table

  std::string out_dir = "out";

  std::uint64_t config_hash = 0;  ///< FNV-1a of the source text

  Lattice make_lattice() const;
};

/// Parses the flat key=value format: one `key = value` per line, `#`
/// comments, keys namespaced by prefix (model., lattice., ensemble.,
/// integrator., series., output.) plus the shorthand aliases U_over_J,
/// mu_over_J, L and filled. Unknown or duplicate keys are rejected
/// (ParseError with 1-based line number); cross-key rules — ratio and
/// absolute couplings are mutually exclusive, filled sites must lie inside
/// the lattice — raise ValidationError naming the violated rule.
RunConfig parse_config(const std::string& text);

/// 64-bit FNV-1a of the raw configuration text.
std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace bhc
