#include "ionsim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ionsim/io.hpp"
#include "ionsim/spin.hpp"

namespace ionsim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  double v = 0;
  const std::string t = trim(text);
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(key + ": expected a finite number, got '" + text + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  int v = 0;
  const std::string t = trim(text);
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

bool is_unset(const std::string& text) {
  const std::string t = trim(text);
  return t.empty() || t == "none";
}

std::optional<double> parse_optional(const std::string& key, const std::string& text) {
  if (is_unset(text)) return std::nullopt;
  return parse_number(key, text);
}

std::string show(std::optional<double> v) { return v ? format_double(*v) : "none"; }
std::string show(bool v) { return v ? "true" : "false"; }

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::map<std::string, std::string> default_config_values() {
  return {
      {"system.n_ions", "10"},
      {"system.sign", "fm"},
      {"system.alpha_target", "1"},
      {"system.omega_axial_hz", "none"},
      {"trap.rabi_hz", "600000"},
      {"trap.recoil_hz", "18500"},
      {"trap.omega_transverse_hz", "4797000"},
      {"trap.wavelength_m", "3.55e-07"},
      {"ramp.b0_over_j0", "5"},
      {"ramp.j0_tau", "0.5"},
      {"ramp.t_f_over_tau", "6"},
      {"ramp.t_f_ms", "none"},
      {"evolve.steps_per_tau", "2000"},
      {"evolve.check_convergence", "true"},
      {"evolve.max_halvings", "4"},
      {"evolve.convergence_tol", "1e-06"},
      {"evolve.phase_convention", "hbar1"},
      {"evolve.solver_tol", "1e-14"},
      {"evolve.samples", "12"},
      {"thermo.ensemble", "all-states"},
      {"thermo.fits", "average,fluctuation,ratio"},
      {"obs.fit", "average"},
      {"obs.k_points", "201"},
      {"output.dir", "out"},
  };
}

RunConfig make_config(const std::map<std::string, std::string>& values) {
  auto merged = default_config_values();
  for (const auto& [key, value] : values) {
    if (!merged.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    merged[key] = trim(value);
  }
  auto get = [&](const char* key) -> const std::string& { return merged.at(key); };

  RunConfig c;
  c.n_ions = parse_int("system.n_ions", get("system.n_ions"));
  require(c.n_ions >= 3 && c.n_ions <= 12, "system.n_ions must lie in [3, 12]");
  c.sign = parse_coupling_sign(get("system.sign"));
  c.alpha_target = parse_optional("system.alpha_target", get("system.alpha_target"));
  c.omega_axial_hz = parse_optional("system.omega_axial_hz", get("system.omega_axial_hz"));
  require(c.alpha_target || c.omega_axial_hz,
          "one of system.alpha_target or system.omega_axial_hz must be set");
  if (c.omega_axial_hz) {
    require(*c.omega_axial_hz > 0, "system.omega_axial_hz must be positive");
    c.alpha_target.reset();
  } else {
    require(*c.alpha_target >= 0.5 && *c.alpha_target <= 2.0,
            "system.alpha_target must lie in [0.5, 2]");
  }

  c.rabi_hz = parse_number("trap.rabi_hz", get("trap.rabi_hz"));
  c.recoil_hz = parse_number("trap.recoil_hz", get("trap.recoil_hz"));
  c.omega_transverse_hz = parse_number("trap.omega_transverse_hz", get("trap.omega_transverse_hz"));
  c.wavelength_m = parse_number("trap.wavelength_m", get("trap.wavelength_m"));

  c.b0_over_j0 = parse_number("ramp.b0_over_j0", get("ramp.b0_over_j0"));
  c.j0_tau = parse_number("ramp.j0_tau", get("ramp.j0_tau"));
  c.t_f_over_tau = parse_number("ramp.t_f_over_tau", get("ramp.t_f_over_tau"));
  c.t_f_ms = parse_optional("ramp.t_f_ms", get("ramp.t_f_ms"));
  require(c.b0_over_j0 > 0, "ramp.b0_over_j0 must be positive");
  require(c.j0_tau > 0, "ramp.j0_tau must be positive");
  require(c.t_f_over_tau >= 0, "ramp.t_f_over_tau must be >= 0");
  require(!c.t_f_ms || *c.t_f_ms >= 0, "ramp.t_f_ms must be >= 0");
  require(!(c.t_f_ms && *c.t_f_ms > 0 && c.t_f_over_tau == 0),
          "ramp.t_f_ms > 0 needs ramp.t_f_over_tau > 0");

  c.steps_per_tau = parse_int("evolve.steps_per_tau", get("evolve.steps_per_tau"));
  require(c.steps_per_tau >= 1, "evolve.steps_per_tau must be >= 1");
  c.check_convergence = parse_bool("evolve.check_convergence", get("evolve.check_convergence"));
  c.max_halvings = parse_int("evolve.max_halvings", get("evolve.max_halvings"));
  require(c.max_halvings >= 1 && c.max_halvings <= 10, "evolve.max_halvings must lie in [1, 10]");
  c.convergence_tol = parse_number("evolve.convergence_tol", get("evolve.convergence_tol"));
  require(c.convergence_tol > 0, "evolve.convergence_tol must be positive");
  const std::string phase = get("evolve.phase_convention");
  if (phase == "hbar1")
    c.phase_rate = kPhaseRate;
  else if (phase == "two_pi")
    c.phase_rate = kTwoPiPhaseRate;
  else
    throw ConfigError("evolve.phase_convention must be hbar1 or two_pi");
  c.solver_tol = parse_number("evolve.solver_tol", get("evolve.solver_tol"));
  require(c.solver_tol > 0 && c.solver_tol <= 1e-12, "evolve.solver_tol must lie in (0, 1e-12]");
  c.samples = parse_int("evolve.samples", get("evolve.samples"));
  require(c.samples >= 1, "evolve.samples must be >= 1");

  c.ensemble = parse_ensemble(get("thermo.ensemble"));
  c.fits.clear();
  std::stringstream list(get("thermo.fits"));
  for (std::string item; std::getline(list, item, ',');) {
    const FitMethod m = parse_fit_method(trim(item));
    for (FitMethod seen : c.fits)
      require(seen != m, "thermo.fits lists '" + trim(item) + "' twice");
    c.fits.push_back(m);
  }
  require(!c.fits.empty(), "thermo.fits must name at least one method");
  c.observable_fit = parse_fit_method(get("obs.fit"));
  bool listed = false;
  for (FitMethod m : c.fits) listed = listed || m == c.observable_fit;
  require(listed, "obs.fit must be one of thermo.fits");
  c.k_points = parse_int("obs.k_points", get("obs.k_points"));
  require(c.k_points >= 3 && c.k_points <= 100001, "obs.k_points must lie in [3, 100001]");

  c.output_dir = get("output.dir");

  c.trap_spec().validate(kMaxSpins);

  // Canonical string forms.
  auto& v = c.values;
  v = merged;
  v["system.n_ions"] = std::to_string(c.n_ions);
  v["system.sign"] = to_string(c.sign);
  v["system.alpha_target"] = show(c.alpha_target);
  v["system.omega_axial_hz"] = show(c.omega_axial_hz);
  v["trap.rabi_hz"] = format_double(c.rabi_hz);
  v["trap.recoil_hz"] = format_double(c.recoil_hz);
  v["trap.omega_transverse_hz"] = format_double(c.omega_transverse_hz);
  v["trap.wavelength_m"] = format_double(c.wavelength_m);
  v["ramp.b0_over_j0"] = format_double(c.b0_over_j0);
  v["ramp.j0_tau"] = format_double(c.j0_tau);
  v["ramp.t_f_over_tau"] = format_double(c.t_f_over_tau);
  v["ramp.t_f_ms"] = show(c.t_f_ms);
  v["evolve.steps_per_tau"] = std::to_string(c.steps_per_tau);
  v["evolve.check_convergence"] = show(c.check_convergence);
  v["evolve.max_halvings"] = std::to_string(c.max_halvings);
  v["evolve.convergence_tol"] = format_double(c.convergence_tol);
  v["evolve.solver_tol"] = format_double(c.solver_tol);
  v["evolve.samples"] = std::to_string(c.samples);
  v["thermo.ensemble"] = to_string(c.ensemble);
  std::string fits;
  for (FitMethod m : c.fits) fits += (fits.empty() ? "" : ",") + to_string(m);
  v["thermo.fits"] = fits;
  v["obs.fit"] = to_string(c.observable_fit);
  v["obs.k_points"] = std::to_string(c.k_points);
  return c;
}

TrapSpec RunConfig::trap_spec() const {
  TrapSpec s;
  s.n_ions = n_ions;
  s.omega_transverse = omega_transverse_hz;
  if (omega_axial_hz) s.omega_axial = *omega_axial_hz;
  s.recoil = recoil_hz;
  s.rabi = rabi_hz;
  s.wavelength = wavelength_m;
  return s;
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : values) {
    if (key.starts_with("output.")) continue;
    out += key + " = " + value + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical_text()); }

std::uint64_t RunConfig::hash_value() const { return std::stoull(hash(), nullptr, 16); }

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not key=value");
  const std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + text + "' has an empty key");
  return {key, trim(text.substr(eq + 1))};
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> values;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    values = parse_key_values(in, path.string());
  }
  for (const auto& o : overrides) {
    auto [k, v] = parse_override(o);
    values[k] = v;
  }
  return make_config(values);
}

RunConfig with_values(const RunConfig& base, const std::map<std::string, std::string>& changes) {
  auto values = base.values;
  for (const auto& [k, v] : changes) {
    if (!values.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    values[k] = v;
  }
  return make_config(values);
}

}  // namespace ionsim
