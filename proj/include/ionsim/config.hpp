#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ionsim/couplings.hpp"
#include "ionsim/thermo.hpp"
#include "ionsim/trap.hpp"

namespace ionsim {

inline constexpr const char* kCodeVersion = "ionsim 0.1.0";

/// Flat dotted-key configuration of one experiment. Every key has a default;
/// see default_config_values() for the full list.
struct RunConfig {
  int n_ions = 10;
  CouplingSign sign = CouplingSign::Ferro;
  std::optional<double> alpha_target = 1.0;
  std::optional<double> omega_axial_hz;  // when set, alpha_target is ignored

  double rabi_hz = 600e3;
  double recoil_hz = 18.5e3;
  double omega_transverse_hz = 4.797e6;
  double wavelength_m = 355e-9;

  double b0_over_j0 = 5.0;
  double j0_tau = 0.5;
  double t_f_over_tau = 6.0;
  std::optional<double> t_f_ms;  // when set, tau = t_f / t_f_over_tau

  int steps_per_tau = 2000;
  bool check_convergence = true;
  int max_halvings = 4;
  double convergence_tol = 1e-6;
  double phase_rate = kPhaseRate;
  double solver_tol = 1e-14;
  int samples = 12;

  Ensemble ensemble = Ensemble::AllStates;
  std::vector<FitMethod> fits{FitMethod::Average, FitMethod::Fluctuation, FitMethod::Ratio};
  FitMethod observable_fit = FitMethod::Average;
  int k_points = 201;

  std::string output_dir = "out";

  /// Every key (defaults filled in), canonical string values.
  std::map<std::string, std::string> values;

  TrapSpec trap_spec() const;
  /// Sorted "key = value" lines excluding output.* keys.
  std::string canonical_text() const;
  /// FNV-1a of canonical_text(), 16 hex digits.
  std::string hash() const;
  std::uint64_t hash_value() const;
};

std::map<std::string, std::string> default_config_values();

/// Merges values over the defaults and validates. Unknown keys and malformed
/// or out-of-range values throw ConfigError.
RunConfig make_config(const std::map<std::string, std::string>& values);

/// "key=value" override; throws ConfigError when '=' is missing.
std::pair<std::string, std::string> parse_override(const std::string& text);

/// Reads a config file (may be empty path for defaults) and applies overrides.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Copy with some keys replaced (re-validated).
RunConfig with_values(const RunConfig& base, const std::map<std::string, std::string>& changes);

}  // namespace ionsim
