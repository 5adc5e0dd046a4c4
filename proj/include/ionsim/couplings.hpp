#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "ionsim/trap.hpp"

namespace ionsim {

enum class CouplingSign { Ferro, Antiferro };

std::string to_string(CouplingSign sign);
CouplingSign parse_coupling_sign(const std::string& text);

/// Least-squares fit of log|J_ij| = log J0 - alpha * log(d_ij).
struct PowerLawFit {
  double j0 = 0.0;
  double alpha = 0.0;
  double residual = 0.0;  // RMS of the log-log fit
  int pairs_used = 0;
  int pairs_excluded = 0;  // exactly-zero couplings
};

/// Ising exchange matrix J_ij in Hz: symmetric, zero diagonal.
struct CouplingMatrix {
  Eigen::MatrixXd values;
  CouplingSign sign = CouplingSign::Ferro;
  double j0_nn = 0.0;      // mean |J_{i,i+1}|
  PowerLawFit fit;         // against physical separations |R_i - R_j| / a
  PowerLawFit index_fit;   // against index distance |i - j|

  int size() const { return static_cast<int>(values.rows()); }
};

/// mu = omega_COM + 3 eta Omega.
double detuning_from_com(const TrapSpec& spec);

/// Static spin-exchange matrix from the transverse modes with the
/// ferromagnetic (positive) sign. Throws NumericalError on a detuning
/// resonance |mu^2 - w_m^2| < 1e-6 mu^2.
CouplingMatrix compute_couplings(const TransverseModes& modes, const TrapSpec& spec, double mu);

/// Global sign choice: AFM is the negated FM matrix.
CouplingMatrix with_sign(CouplingMatrix couplings, CouplingSign sign);

double mean_nearest_neighbor(const Eigen::MatrixXd& values);

/// Power-law fit against physical distance. Requires N >= 3.
PowerLawFit fit_power_law(const CouplingMatrix& couplings, const IonChain& chain);

/// Same fit against integer index distance |i - j|.
PowerLawFit fit_power_law_index(const CouplingMatrix& couplings);

/// Full trap pipeline: positions, modes, detuning, couplings with both fits.
struct TrapCouplings {
  IonChain chain;
  TransverseModes modes;
  double mu = 0.0;
  CouplingMatrix couplings;
};

TrapCouplings couplings_for_trap(const TrapSpec& spec, CouplingSign sign = CouplingSign::Ferro);

struct AxialTuning {
  double omega_axial = 0.0;
  double alpha = 0.0;
  double j0 = 0.0;
  int iterations = 0;
};

struct TuningOptions {
  double alpha_min = 0.5;
  double alpha_max = 2.0;
  double alpha_tolerance = 1e-3;
  double axial_floor_ratio = 0.02;  // lowest omega_axial / omega_transverse probed
  int max_iterations = 200;
};

/// Largest omega_axial (Hz) for which the linear chain is transversely stable.
double max_stable_axial(TrapSpec spec);

/// Bisection on omega_axial (transverse trap fixed) until the physical-distance
/// fit reproduces target_alpha. Throws ConfigError when the target lies
/// outside the bracket or the achievable range (the message reports it).
AxialTuning tune_axial_for_alpha(TrapSpec spec, double target_alpha,
                                 const TuningOptions& options = {});

/// CSV with header "i,j,J_hz"; 1-based indices, every (i, j) pair listed.
void write_couplings_csv(std::ostream& out, const CouplingMatrix& couplings,
                         const std::string& config_hash = "");
Eigen::MatrixXd read_couplings_csv(std::istream& in);

}  // namespace ionsim
