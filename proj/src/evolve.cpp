#include "ionsim/evolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ionsim {

double RampSchedule::field(double t) const { return b0 * std::exp(-t / tau); }

void RampSchedule::validate() const {
  if (!(b0 > 0) || !(tau > 0) || !(t_final >= 0) || !std::isfinite(b0) || !std::isfinite(tau) ||
      !std::isfinite(t_final))
    throw ConfigError("ramp needs b0 > 0, tau > 0 and t_final >= 0");
}

RampSchedule RampSchedule::protocol(double j0, double b0_over_j0, double j0_tau,
                                    double tf_over_tau) {
  if (!(j0 > 0)) throw ConfigError("ramp protocol needs J0 > 0");
  RampSchedule r;
  r.b0 = b0_over_j0 * j0;
  r.tau = j0_tau / j0;
  r.t_final = tf_over_tau * r.tau;
  r.validate();
  return r;
}

QuantumState initial_state(const SpinBasis& basis) {
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  QuantumState s;
  s.amplitudes = Eigen::VectorXcd::Constant(dim, cplx(std::pow(2.0, -0.5 * basis.n_spins), 0.0));
  return s;
}

StepStats CrankNicolsonStepper::step(QuantumState& state, const IsingHamiltonian& h_mid,
                                     double dt, double energy_offset) {
  return solve(state, h_mid, dt, false, energy_offset);
}

StepStats CrankNicolsonStepper::step_centered(QuantumState& state, const IsingHamiltonian& h_mid,
                                              double dt) {
  return solve(state, h_mid, dt, true, 0.0);
}

StepStats CrankNicolsonStepper::solve(QuantumState& state, const IsingHamiltonian& h_mid,
                                      double dt, bool centered, double energy_offset) {
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  const auto dim = state.amplitudes.size();
  if (static_cast<std::size_t>(dim) != h_mid.dimension())
    throw ConfigError("state and hamiltonian dimensions differ");
  hpsi_.resize(dim);
  rhs_.resize(dim);
  x_.resize(dim);
  ox_.resize(dim);

  const cplx* psi = state.amplitudes.data();
  h_mid.apply(std::span<const cplx>(psi, dim), std::span<cplx>(hpsi_.data(), dim));
  const double shift = centered ? state.amplitudes.dot(hpsi_).real() /
                                      std::max(state.amplitudes.squaredNorm(), 1e-300)
                                : energy_offset;

  const cplx ia(0.0, 0.5 * options_.phase_rate * dt);
  const Eigen::VectorXd& diag = h_mid.diagonal();
  const double b = h_mid.b_field();
  const int n = h_mid.n_spins();

  for (Eigen::Index s = 0; s < dim; ++s) {
    const cplx hs = hpsi_[s] - shift * psi[s];
    rhs_[s] = psi[s] - ia * hs;
    x_[s] = rhs_[s] - ia * hs;  // explicit predictor
  }
  const double rhs_norm = std::max(rhs_.norm(), 1e-300);

  StepStats stats;
  double prev = std::numeric_limits<double>::infinity();
  int growth = 0;
  for (;;) {
    // ox = -b * sum_i x[s ^ bit_i]  (off-diagonal part of H)
    for (Eigen::Index s = 0; s < dim; ++s) {
      cplx acc{};
      for (int i = 0; i < n; ++i) acc += x_[s ^ (Eigen::Index{1} << i)];
      ox_[s] = -b * acc;
    }
    double r2 = 0;
    for (Eigen::Index s = 0; s < dim; ++s) {
      const cplx d = 1.0 + ia * (diag[s] - shift);
      const cplx r = rhs_[s] - d * x_[s] - ia * ox_[s];
      r2 += std::norm(r);
      x_[s] += r / d;
    }
    ++stats.iterations;
    stats.residual = std::sqrt(r2) / rhs_norm;
    if (stats.residual < options_.tolerance) break;
    // Accept roundoff stagnation once well inside the 1e-12 contract.
    if (stats.residual < 1e-12 && stats.residual > 0.5 * prev) break;
    growth = stats.residual > prev ? growth + 1 : 0;
    if (growth >= 3 || stats.iterations >= options_.max_iterations) {
      std::ostringstream msg;
      msg << "Crank-Nicolson linear solve did not converge: residual " << stats.residual
          << " after " << stats.iterations << " iterations (dt = " << dt << " s)";
      throw NumericalError(msg.str());
    }
    prev = stats.residual;
  }
  state.amplitudes.swap(x_);
  state.time += dt;
  return stats;
}

QuantumState crank_nicolson_step(const QuantumState& state, const IsingHamiltonian& h_mid,
                                 double dt, const SolverOptions& options, double energy_offset) {
  QuantumState out = state;
  CrankNicolsonStepper(options).step(out, h_mid, dt, energy_offset);
  return out;
}

Trajectory evolve(QuantumState state, const IsingHamiltonian& h, const RampSchedule& schedule,
                  const EvolveOptions& options, const Observer& observer) {
  schedule.validate();
  if (static_cast<std::size_t>(state.amplitudes.size()) != h.dimension())
    throw ConfigError("initial state and hamiltonian dimensions differ");

  Trajectory traj;
  std::size_t steps = 0;
  if (schedule.t_final > 0) {
    if (!(options.dt > 0)) throw ConfigError("time step must be positive");
    steps = static_cast<std::size_t>(std::llround(schedule.t_final / options.dt));
    if (steps == 0 || std::abs(steps * options.dt - schedule.t_final) > 1e-6 * options.dt) {
      std::ostringstream msg;
      msg << "dt = " << options.dt << " s does not divide t_final = " << schedule.t_final << " s";
      throw ConfigError(msg.str());
    }
  }
  const double dt = steps > 0 ? schedule.t_final / static_cast<double>(steps) : 0.0;
  traj.steps = steps;
  traj.dt = dt;

  std::vector<std::size_t> sample_steps;
  for (double t : options.sample_times) {
    if (t < 0 || t > schedule.t_final * (1 + 1e-12))
      throw ConfigError("sample time outside [0, t_final]");
    sample_steps.push_back(steps > 0 ? static_cast<std::size_t>(std::llround(t / dt)) : 0);
  }
  std::sort(sample_steps.begin(), sample_steps.end());
  std::size_t next_sample = 0;
  auto emit = [&](std::size_t k) {
    while (next_sample < sample_steps.size() && sample_steps[next_sample] == k) {
      if (observer) observer(state.time, state);
      if (options.keep_samples) traj.samples.push_back(state);
      ++next_sample;
    }
  };

  state.time = 0.0;
  const double norm0 = state.norm();
  emit(0);
  CrankNicolsonStepper stepper(options.solver);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * dt;
    const IsingHamiltonian h_mid = h.with_field(schedule.field(t_mid));
    const StepStats st = options.center_energy ? stepper.step_centered(state, h_mid, dt)
                                               : stepper.step(state, h_mid, dt, 0.0);
    state.time = static_cast<double>(k + 1) * dt;
    traj.max_residual = std::max(traj.max_residual, st.residual);
    traj.max_iterations = std::max(traj.max_iterations, st.iterations);
    traj.max_norm_drift = std::max(traj.max_norm_drift, std::abs(state.norm() - norm0));
    emit(k + 1);
  }
  traj.final_state = std::move(state);
  return traj;
}

namespace {

constexpr char kMagic[8] = {'I', 'O', 'N', 'S', 'T', 'A', 'T', 'E'};

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw ConfigError("state snapshot truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_state_snapshot(std::ostream& out, const QuantumState& state, int n_spins,
                          std::uint64_t config_hash) {
  if (state.amplitudes.size() != (Eigen::Index{1} << n_spins))
    throw Error("snapshot: amplitude count does not match N");
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kSnapshotVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n_spins));
  put_le<std::uint64_t>(out, config_hash);
  put_le<double>(out, state.time);
  for (Eigen::Index s = 0; s < state.amplitudes.size(); ++s) {
    put_le<double>(out, state.amplitudes[s].real());
    put_le<double>(out, state.amplitudes[s].imag());
  }
  if (!out) throw Error("snapshot: write failed");
}

Snapshot read_state_snapshot(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ConfigError("not a state snapshot (bad magic)");
  Snapshot snap;
  snap.version = get_le<std::uint32_t>(in);
  if (snap.version != kSnapshotVersion)
    throw ConfigError("unsupported snapshot version " + std::to_string(snap.version));
  const auto n = get_le<std::uint32_t>(in);
  if (n < 1 || n > static_cast<std::uint32_t>(kMaxSpins))
    throw ConfigError("snapshot spin count out of range");
  snap.n_spins = static_cast<int>(n);
  snap.config_hash = get_le<std::uint64_t>(in);
  snap.state.time = get_le<double>(in);
  const Eigen::Index dim = Eigen::Index{1} << n;
  snap.state.amplitudes.resize(dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    const double re = get_le<double>(in);
    const double im = get_le<double>(in);
    snap.state.amplitudes[s] = cplx(re, im);
  }
  return snap;
}

}  // namespace ionsim
