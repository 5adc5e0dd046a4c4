#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ionsim/common.hpp"

namespace ionsim {

inline constexpr int kMaxIons = 14;

/// Linear Paul trap and laser parameters. Frequencies in Hz.
struct TrapSpec {
  int n_ions = 10;
  double omega_transverse = 4.797e6;  // transverse COM mode, held fixed
  double omega_axial = 775e3;         // axial COM mode, tunable
  double recoil = 18.5e3;             // nu_R = h / (M lambda^2)
  double rabi = 600e3;
  double wavelength = 355e-9;  // only used to recover the ion mass

  /// Throws ConfigError when the spec is outside the supported regime.
  void validate(int max_ions = kMaxIons) const;

  /// Ion mass implied by recoil and wavelength (kg).
  double ion_mass() const;
};

/// Equilibrium configuration of the chain along the trap axis.
struct IonChain {
  std::vector<double> positions;           // dimensionless u_i, ascending
  double length_scale = 0.0;               // ell (m), R_i = ell * u_i
  std::vector<double> positions_physical;  // R_i (m)
  double mean_spacing = 0.0;               // a (m)
  double residual = 0.0;                   // max |force balance| (dimensionless)

  int size() const { return static_cast<int>(positions.size()); }
  double mean_spacing_dimensionless() const;
};

/// Transverse normal modes. Column m of mode_matrix is mode m; modes are
/// sorted by descending frequency so column 0 is the COM mode.
struct TransverseModes {
  Eigen::MatrixXd mode_matrix;
  Eigen::VectorXd frequencies;  // Hz
};

struct EquilibriumOptions {
  int max_iterations = 200;
  double tolerance = 1e-13;
  int max_ions = kMaxIons;
};

IonChain solve_equilibrium_positions(const TrapSpec& spec,
                                     const EquilibriumOptions& options = {});

/// Dimensionless transverse stiffness matrix in units of omega_axial^2.
Eigen::MatrixXd transverse_stiffness(const TrapSpec& spec, const IonChain& chain);

/// Throws NumericalError("transverse zigzag instability") if any mode is soft.
TransverseModes transverse_normal_modes(const TrapSpec& spec, const IonChain& chain);

/// eta = sqrt(nu_R / omega_COM).
double lamb_dicke(const TrapSpec& spec);

}  // namespace ionsim
