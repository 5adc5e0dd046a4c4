#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ionsim/evolve.hpp"
#include "ionsim/spin.hpp"
#include "ionsim/thermo.hpp"

namespace ionsim {

/// P_n = |<n|psi>|^2 over the full spectrum. Throws ConfigError on a
/// dimension mismatch or an unnormalized state.
std::vector<double> eigenstate_probabilities(const QuantumState& state,
                                             const SpectralDecomposition& spectrum);

/// Probability distribution over computational basis states, which is all the
/// z-diagonal observables below need. Built either from a pure state or from
/// eigenstate weights (thermal ensemble).
class EnsembleView {
 public:
  static EnsembleView pure(const QuantumState& state);
  static EnsembleView pure(const Eigen::VectorXcd& amplitudes);
  /// sum_n w_n |<b|n>|^2; weights need not cover every eigenstate.
  static EnsembleView thermal(const SpectralDecomposition& spectrum,
                              std::span<const double> weights);

  int n_spins() const { return n_; }
  const Eigen::VectorXd& distribution() const { return p_; }

  /// sum_b p_b f(b) for a diagonal operator given by its basis values.
  double expectation(std::span<const double> diagonal) const;

 private:
  EnsembleView(int n, Eigen::VectorXd p) : n_(n), p_(std::move(p)) {}

  int n_ = 0;
  Eigen::VectorXd p_;
};

/// m = (1/N) sum_i s_i sz_i with s_i = 1, or (-1)^(i+1) for the staggered form.
std::vector<double> magnetization_values(int n_spins, bool staggered);

struct MagnetizationMoments {
  double mean = 0.0;
  double second = 0.0;  // <m^2>
  double fourth = 0.0;  // <m^4>
  double central2 = 0.0;
  double central4 = 0.0;
};

MagnetizationMoments magnetization_moments(const EnsembleView& view, bool staggered);

struct BinderResult {
  double g_s = 0.0;
  double g_bar = 0.0;
  bool defined = false;  // false when the central variance vanishes
};

/// g_s = <(m-<m>)^4> / <(m-<m>)^2>^2, g_bar = (g0 - g_s) / (g0 - 1), g0 = 3 - 2/N.
BinderResult binder_cumulant(const EnsembleView& view, bool staggered);

struct StructureFactorResult {
  std::vector<double> k;
  std::vector<double> s;
  std::vector<double> correlation;  // C(r) for r = 1..N-1 (index r-1)
  Eigen::MatrixXd connected;        // C_ij

  /// Index of the grid point closest to the wavenumber.
  std::size_t index_of(double wavenumber) const;
  std::size_t argmax() const;
};

/// points evenly spaced over [-pi, pi]; k = 0 is always present exactly.
std::vector<double> wavenumber_grid(int points = 201);

StructureFactorResult structure_factor(const EnsembleView& view,
                                       const std::vector<double>& k = wavenumber_grid());

/// Trapezoidal integral of |S_a(k) - S_b(k)| over the shared grid.
double integrated_difference(const StructureFactorResult& a, const StructureFactorResult& b);

/// C_v = variance * beta^2 with beta from the fit; empty when the fit is not
/// usable (unconverged or non-positive temperature).
std::optional<double> specific_heat(const EnergyMoments& moments, const ThermalFit& fit);
/// Thermal branch: Boltzmann variance at the fitted beta.
std::optional<double> thermal_specific_heat(std::span<const double> energies,
                                            const ThermalFit& fit);

}  // namespace ionsim
