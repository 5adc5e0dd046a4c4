#pragma once

#include <span>
#include <string>
#include <vector>

#include "ionsim/evolve.hpp"
#include "ionsim/spin.hpp"

namespace ionsim {

enum class FitMethod { Average, Fluctuation, Ratio };

std::string to_string(FitMethod method);
FitMethod parse_fit_method(const std::string& text);

/// Effective inverse temperature (1/Hz, k_B = 1).
struct ThermalFit {
  FitMethod method = FitMethod::Average;
  double beta = 0.0;
  double temperature = 0.0;  // 1 / beta (Hz); +-inf when beta == 0
  bool converged = false;
  double residual = 0.0;  // |model - target|
  bool sector_restricted = false;
  bool non_thermal = false;  // beta <= 0 where the method needs beta > 0
  bool at_cap = false;       // beta pinned at the solver cap (T -> 0+)
  std::vector<double> crossings;  // fluctuation fit: every beta solving the equation

  /// Converged with a positive, finite temperature.
  bool usable() const { return converged && !non_thermal && beta > 0; }
};

struct EnergyMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Which eigenstates enter the partition function.
enum class Ensemble { AllStates, GroundSector };

std::string to_string(Ensemble ensemble);
Ensemble parse_ensemble(const std::string& text);

/// Indices of the spectrum belonging to an ensemble (ascending).
std::vector<int> ensemble_indices(const SpectralDecomposition& spectrum, Ensemble ensemble);
std::vector<double> ensemble_energies(const SpectralDecomposition& spectrum, Ensemble ensemble);

/// Boltzmann mean and variance with the extreme-energy shift for stability.
EnergyMoments thermal_moments(std::span<const double> energies, double beta);

/// <psi|H|psi> and <psi|H^2|psi> - <psi|H|psi>^2 via two matrix-vector products.
EnergyMoments diabatic_moments(const QuantumState& state, const IsingHamiltonian& h);

/// beta_cap = 50 / gap, gap = first level spacing above E_0 that exceeds
/// 1e-6 of the spectral span.
double beta_cap(std::span<const double> energies);

/// Solves <E>_therm(beta) = target_energy. Targets above the spectral mean
/// give a negative beta flagged non_thermal; targets at E_0 give beta at the
/// cap flagged at_cap. Throws NumericalError for targets below E_0.
ThermalFit fit_beta_average(std::span<const double> energies, double target_energy,
                            bool sector_restricted = false);

/// Solves <(dE)^2>_therm(beta) = target_variance for beta >= 0 and returns the
/// largest (coldest) crossing. Throws NumericalError when the target exceeds
/// the attainable maximum.
ThermalFit fit_beta_fluctuation(std::span<const double> energies, double target_variance,
                                bool sector_restricted = false);

/// beta = (ln p_gs - ln p_1) / gap.
ThermalFit fit_beta_ratio(double p_gs, double p_1, double gap);

struct ThermalDistribution {
  std::vector<double> probabilities;
  double partition_value = 0.0;  // sum_n exp(-beta (E_n - E_shift))
  double energy_shift = 0.0;     // E_0 (beta >= 0) or E_max (beta < 0)
};

ThermalDistribution thermal_distribution(std::span<const double> energies, double beta);

/// Boltzmann weights over the whole spectrum; states outside the selected
/// ensemble get weight 0.
std::vector<double> thermal_weights(const SpectralDecomposition& spectrum, double beta,
                                    Ensemble ensemble);

/// Eigenstates of the ground sector grouped by the orbit size (2 or 4) of
/// their dominant basis state under reflection and spin flip, each group
/// fitted separately with the average method over its own levels.
struct TwoTemperatureFit {
  ThermalFit pair_orbit;
  ThermalFit quad_orbit;
  int pair_states = 0;
  int quad_states = 0;
  bool pair_defined = false;
  bool quad_defined = false;
};

TwoTemperatureFit two_temperature_fit(const SpectralDecomposition& spectrum,
                                      std::span<const double> probabilities);

/// Structured text report: one "key = value" per line.
std::string fit_report(const ThermalFit& fit, const std::string& prefix);

}  // namespace ionsim
