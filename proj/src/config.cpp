#include "bhc/config.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace bhc {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(const Entry& e, const std::string& msg) {
  throw ParseError(e.line, msg);
}

double parse_double(const Entry& e, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) fail(e, key + ": trailing characters in '" + e.value + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    fail(e, key + ": expected a number, got '" + e.value + "'");
  }
}

long long parse_int(const Entry& e, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(e.value, &pos);
    if (pos != e.value.size()) fail(e, key + ": trailing characters in '" + e.value + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    fail(e, key + ": expected an integer, got '" + e.value + "'");
  }
}

std::uint64_t parse_u64(const Entry& e, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) fail(e, key + ": trailing characters in '" + e.value + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    fail(e, key + ": expected an unsigned integer, got '" + e.value + "'");
  }
}

std::vector<double> parse_double_list(const Entry& e, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    Entry sub{trim(tok), e.line};
    if (sub.value.empty()) fail(e, key + ": empty list element");
    out.push_back(parse_double(sub, key));
  }
  if (out.empty()) fail(e, key + ": empty list");
  return out;
}

/// 1-based site list: either `3,8` (flat indices) or `(2,3),(7,4)`
/// (row,col pairs). Returned as written; conversion to 0-based flat indices
/// happens after the lattice is known.
struct SiteRef {
  int a = 0;            // flat index or row (1-based)
  int b = 0;            // col (1-based), pairs only
  bool is_pair = false;
};

std::vector<SiteRef> parse_site_list(const Entry& e, const std::string& key) {
  std::string s;
  for (char c : e.value)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) fail(e, key + ": empty site list");
  std::vector<SiteRef> out;
  if (s.front() == '(') {
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] != '(') fail(e, key + ": expected '(' in coordinate list");
      const std::size_t close = s.find(')', i);
      if (close == std::string::npos) fail(e, key + ": unbalanced '('");
      const std::string body = s.substr(i + 1, close - i - 1);
      const std::size_t comma = body.find(',');
      if (comma == std::string::npos) fail(e, key + ": coordinate pair needs 'row,col'");
      SiteRef ref;
      ref.is_pair = true;
      ref.a = static_cast<int>(parse_int(Entry{body.substr(0, comma), e.line}, key));
      ref.b = static_cast<int>(parse_int(Entry{body.substr(comma + 1), e.line}, key));
      out.push_back(ref);
      i = close + 1;
      if (i < s.size()) {
        if (s[i] != ',') fail(e, key + ": expected ',' between coordinate pairs");
        ++i;
      }
    }
  } else {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) fail(e, key + ": empty list element");
      SiteRef ref;
      ref.a = static_cast<int>(parse_int(Entry{tok, e.line}, key));
      out.push_back(ref);
    }
  }
  return out;
}

const char* const kKnownKeys[] = {
    "command", "seed",
    "model.J", "model.U", "model.mu", "model.U_over_J", "model.mu_over_J",
    "lattice.dimension", "lattice.length", "lattice.rows", "lattice.cols",
    "ensemble.filled", "ensemble.weights", "ensemble.width", "ensemble.orbits",
    "ensemble.target", "ensemble.orbit", "ensemble.t_min", "ensemble.t_max",
    "ensemble.points_per_decade",
    "integrator.scheme", "integrator.dt", "integrator.tolerance",
    "integrator.horizon", "integrator.renorm_interval", "integrator.warmup",
    "series.k_max", "series.threshold", "series.beta_min", "series.beta_max",
    "series.beta_points", "series.L", "series.oracles",
    "output.dir",
};

/// Shorthand aliases map onto their namespaced forms so duplicates are
/// caught no matter which spelling is used.
std::string canonical_key(const std::string& key) {
  if (key == "U_over_J") return "model.U_over_J";
  if (key == "mu_over_J") return "model.mu_over_J";
  if (key == "L") return "lattice.length";
  if (key == "filled") return "ensemble.filled";
  return key;
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Lyapunov: return "lyapunov";
    case Command::Diffuse: return "diffuse";
    case Command::Thermo: return "thermo";
  }
  return "?";
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Lattice RunConfig::make_lattice() const { return build_lattice(dimension, extents); }

RunConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> entries;
  {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ParseError(lineno, "expected 'key = value', got '" + stripped + "'");
      const std::string raw_key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (raw_key.empty()) throw ParseError(lineno, "missing key before '='");
      if (value.empty()) throw ParseError(lineno, raw_key + ": missing value");
      const std::string key = canonical_key(raw_key);
      const bool known = std::find(std::begin(kKnownKeys), std::end(kKnownKeys),
                                   key) != std::end(kKnownKeys);
      if (!known) throw ParseError(lineno, "unknown key '" + raw_key + "'");
      const auto [it, inserted] = entries.emplace(key, Entry{value, lineno});
      if (!inserted)
        throw ParseError(lineno, "duplicate key '" + raw_key + "' (first set on line " +
                                     std::to_string(it->second.line) + ")");
    }
  }

  auto get = [&](const char* key) -> const Entry* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };

  RunConfig cfg;
  cfg.config_hash = fnv1a_hash(text);

  if (const Entry* e = get("command")) {
    if (e->value == "simulate") cfg.command = Command::Simulate;
    else if (e->value == "lyapunov") cfg.command = Command::Lyapunov;
    else if (e->value == "diffuse") cfg.command = Command::Diffuse;
    else if (e->value == "thermo") cfg.command = Command::Thermo;
    else fail(*e, "command must be simulate|lyapunov|diffuse|thermo");
  }
  if (const Entry* e = get("seed")) cfg.seed = parse_u64(*e, "seed");

  // Couplings: ratio and absolute forms are mutually exclusive.
  const bool has_ratio = get("model.U_over_J") || get("model.mu_over_J");
  const bool has_absolute = get("model.J") || get("model.U") || get("model.mu");
  if (has_ratio && has_absolute)
    throw ValidationError(
        "ratio couplings (U_over_J, mu_over_J) and absolute couplings "
        "(model.J, model.U, model.mu) are mutually exclusive");
  double J = 1.0, U = 0.0, mu = 0.0;
  if (has_ratio) {
    if (const Entry* e = get("model.U_over_J")) U = parse_double(*e, "U_over_J");
    if (const Entry* e = get("model.mu_over_J")) mu = parse_double(*e, "mu_over_J");
  } else {
    if (const Entry* e = get("model.J")) J = parse_double(*e, "model.J");
    if (const Entry* e = get("model.U")) U = parse_double(*e, "model.U");
    if (const Entry* e = get("model.mu")) mu = parse_double(*e, "model.mu");
  }
  cfg.params = ModelParams(J, U, mu);

  // Lattice geometry.
  if (const Entry* e = get("lattice.dimension"))
    cfg.dimension = static_cast<int>(parse_int(*e, "lattice.dimension"));
  const Entry* len = get("lattice.length");
  const Entry* rows = get("lattice.rows");
  const Entry* cols = get("lattice.cols");
  if (len && (rows || cols))
    throw ValidationError("lattice.length (1D) and lattice.rows/cols (2D) are mutually exclusive");
  if (rows || cols) {
    if (!rows || !cols) throw ValidationError("2D lattice needs both lattice.rows and lattice.cols");
    if (!get("lattice.dimension")) cfg.dimension = 2;
    cfg.extents = {static_cast<int>(parse_int(*rows, "lattice.rows")),
                   static_cast<int>(parse_int(*cols, "lattice.cols"))};
  } else if (len) {
    cfg.extents = {static_cast<int>(parse_int(*len, "lattice.length"))};
  } else {
    cfg.extents = {10};
  }
  if (cfg.dimension == 1 && cfg.extents.size() != 1)
    throw ValidationError("1D lattice takes lattice.length, not rows/cols");
  if (cfg.dimension == 2 && cfg.extents.size() != 2)
    throw ValidationError("2D lattice needs lattice.rows and lattice.cols");
  const Lattice lattice = build_lattice(cfg.dimension, cfg.extents);

  // Ensemble block; site lists in the file are 1-based.
  cfg.ensemble.seed = cfg.seed;
  if (const Entry* e = get("ensemble.filled")) {
    const std::vector<SiteRef> refs = parse_site_list(*e, "filled");
    for (const SiteRef& ref : refs) {
      if (ref.is_pair) {
        if (cfg.dimension != 2)
          throw ValidationError("coordinate pairs in 'filled' require a 2D lattice");
        if (ref.a < 1 || ref.a > cfg.extents[0] || ref.b < 1 || ref.b > cfg.extents[1])
          throw ValidationError("filled site (" + std::to_string(ref.a) + "," +
                                std::to_string(ref.b) + ") lies outside the " +
                                std::to_string(cfg.extents[0]) + "x" +
                                std::to_string(cfg.extents[1]) + " lattice");
        cfg.ensemble.filled.push_back(lattice.site_index(ref.a - 1, ref.b - 1));
      } else {
        if (cfg.dimension != 1)
          throw ValidationError("flat indices in 'filled' require a 1D lattice; use (row,col) pairs");
        if (ref.a < 1 || ref.a > lattice.num_sites())
          throw ValidationError("filled site " + std::to_string(ref.a) +
                                " lies outside the 1.." +
                                std::to_string(lattice.num_sites()) + " chain");
        cfg.ensemble.filled.push_back(ref.a - 1);
      }
    }
  }
  if (const Entry* e = get("ensemble.weights"))
    cfg.ensemble.weights = parse_double_list(*e, "ensemble.weights");
  if (const Entry* e = get("ensemble.width"))
    cfg.ensemble.width = parse_double(*e, "ensemble.width");
  if (const Entry* e = get("ensemble.orbits"))
    cfg.ensemble.n_orbits = static_cast<int>(parse_int(*e, "ensemble.orbits"));
  if (const Entry* e = get("ensemble.target")) {
    if (e->value == "all") cfg.ensemble.target = PerturbationTarget::AllSites;
    else if (e->value == "filled") cfg.ensemble.target = PerturbationTarget::FilledSites;
    else fail(*e, "ensemble.target must be all|filled");
  }
  if (const Entry* e = get("ensemble.orbit"))
    cfg.orbit = static_cast<int>(parse_int(*e, "ensemble.orbit"));
  if (const Entry* e = get("ensemble.t_min")) cfg.t_min = parse_double(*e, "ensemble.t_min");
  if (const Entry* e = get("ensemble.t_max")) cfg.t_max = parse_double(*e, "ensemble.t_max");
  if (const Entry* e = get("ensemble.points_per_decade"))
    cfg.points_per_decade = static_cast<int>(parse_int(*e, "ensemble.points_per_decade"));

  // Integrator block.
  if (const Entry* e = get("integrator.scheme")) {
    if (e->value == "midpoint") cfg.integrator.scheme = IntegratorConfig::Scheme::ImplicitMidpoint;
    else if (e->value == "rk") cfg.integrator.scheme = IntegratorConfig::Scheme::AdaptiveRK;
    else fail(*e, "integrator.scheme must be midpoint|rk");
  }
  if (const Entry* e = get("integrator.dt")) cfg.integrator.dt = parse_double(*e, "integrator.dt");
  if (const Entry* e = get("integrator.tolerance"))
    cfg.integrator.tolerance = parse_double(*e, "integrator.tolerance");
  if (const Entry* e = get("integrator.horizon")) cfg.horizon = parse_double(*e, "integrator.horizon");
  if (const Entry* e = get("integrator.renorm_interval"))
    cfg.renorm_interval = parse_double(*e, "integrator.renorm_interval");
  if (const Entry* e = get("integrator.warmup")) cfg.warmup = parse_double(*e, "integrator.warmup");

  // Series block (thermodynamic sweeps).
  if (const Entry* e = get("series.k_max"))
    cfg.series.k_max = static_cast<int>(parse_int(*e, "series.k_max"));
  if (const Entry* e = get("series.threshold"))
    cfg.series.shell_ratio_threshold = parse_double(*e, "series.threshold");
  if (const Entry* e = get("series.beta_min")) cfg.beta_min = parse_double(*e, "series.beta_min");
  if (const Entry* e = get("series.beta_max")) cfg.beta_max = parse_double(*e, "series.beta_max");
  if (const Entry* e = get("series.beta_points"))
    cfg.beta_points = static_cast<int>(parse_int(*e, "series.beta_points"));
  if (const Entry* e = get("series.L"))
    cfg.thermo_sites = static_cast<int>(parse_int(*e, "series.L"));
  if (const Entry* e = get("series.oracles")) {
    if (e->value == "on") cfg.thermo_oracles = true;
    else if (e->value == "off") cfg.thermo_oracles = false;
    else fail(*e, "series.oracles must be on|off");
  }

  if (const Entry* e = get("output.dir")) cfg.out_dir = e->value;

  // Cross-checks that need the assembled pieces.
  if (cfg.orbit < 0) throw ValidationError("ensemble.orbit must be >= 0");
  if (!(cfg.t_min > 0.0) || !(cfg.t_max > cfg.t_min))
    throw ValidationError("save schedule needs 0 < t_min < t_max");
  if (cfg.points_per_decade < 1)
    throw ValidationError("ensemble.points_per_decade must be >= 1");
  if (cfg.beta_points < 1) throw ValidationError("series.beta_points must be >= 1");
  if (!(cfg.beta_min > 0.0) || cfg.beta_max < cfg.beta_min)
    throw ValidationError("series sweep needs 0 < beta_min <= beta_max");
  if (!cfg.ensemble.filled.empty()) {
    EnsembleSpec probe = cfg.ensemble;
    probe.save_times = {1.0};  // schedule is attached later by the runner
    probe.validate(lattice);
  }
  return cfg;
}

}  // namespace bhc
