#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "ionsim/common.hpp"
#include "ionsim/spin.hpp"

namespace ionsim {

/// B_x(t) = b0 exp(-t / tau) for 0 <= t <= t_final.
struct RampSchedule {
  double b0 = 0.0;       // Hz
  double tau = 0.0;      // s
  double t_final = 0.0;  // s

  double field(double t) const;
  void validate() const;

  /// b0 = b0_over_j0 * j0, tau = j0_tau / j0, t_final = tf_over_tau * tau.
  static RampSchedule protocol(double j0, double b0_over_j0 = 5.0, double j0_tau = 0.5,
                               double tf_over_tau = 6.0);
};

struct QuantumState {
  Eigen::VectorXcd amplitudes;
  double time = 0.0;

  double norm() const { return amplitudes.norm(); }
};

/// All spins along +x: every amplitude equals 2^{-N/2}.
QuantumState initial_state(const SpinBasis& basis);

struct SolverOptions {
  double tolerance = 1e-14;  // relative residual of the linear solve
  int max_iterations = 400;
  double phase_rate = kPhaseRate;
};

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
};

/// One Cayley step (1 + i a (H - s)) psi' = (1 - i a (H - s)) psi with
/// a = phase_rate * dt / 2, solved by Jacobi iteration preconditioned with
/// the diagonal of H. The scalar shift s only changes the global phase of
/// the exact propagator; evolve() sets it to the current mean energy.
/// Buffers are reused between steps.
class CrankNicolsonStepper {
 public:
  explicit CrankNicolsonStepper(SolverOptions options = {}) : options_(options) {}

  StepStats step(QuantumState& state, const IsingHamiltonian& h_mid, double dt,
                 double energy_offset);
  StepStats step_centered(QuantumState& state, const IsingHamiltonian& h_mid, double dt);

  const SolverOptions& options() const { return options_; }

 private:
  StepStats solve(QuantumState& state, const IsingHamiltonian& h_mid, double dt, bool centered,
                  double energy_offset);

  SolverOptions options_;
  Eigen::VectorXcd hpsi_, rhs_, x_, ox_;
};

QuantumState crank_nicolson_step(const QuantumState& state, const IsingHamiltonian& h_mid,
                                 double dt, const SolverOptions& options = {},
                                 double energy_offset = 0.0);

struct EvolveOptions {
  double dt = 0.0;
  std::vector<double> sample_times;  // snapped to the nearest step
  SolverOptions solver;
  bool center_energy = true;
  bool keep_samples = false;
};

using Observer = std::function<void(double time, const QuantumState& state)>;

struct Trajectory {
  QuantumState final_state;
  std::vector<QuantumState> samples;
  std::size_t steps = 0;
  double dt = 0.0;  // step actually used (t_final / steps)
  double max_residual = 0.0;
  int max_iterations = 0;
  double max_norm_drift = 0.0;
};

/// Integrates from state0 (at t = 0) to schedule.t_final, evaluating the field
/// at each step midpoint. h supplies the Ising part; its field is replaced.
Trajectory evolve(QuantumState state0, const IsingHamiltonian& h, const RampSchedule& schedule,
                  const EvolveOptions& options, const Observer& observer = {});

/// Binary snapshot: "IONSTATE" magic, u32 version, u32 N, u64 config hash,
/// f64 time, then 2^N little-endian f64 (re, im) pairs.
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct Snapshot {
  QuantumState state;
  int n_spins = 0;
  std::uint64_t config_hash = 0;
  std::uint32_t version = kSnapshotVersion;
};

void write_state_snapshot(std::ostream& out, const QuantumState& state, int n_spins,
                          std::uint64_t config_hash = 0);
Snapshot read_state_snapshot(std::istream& in);

}  // namespace ionsim
