#include "ionsim/trap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ionsim {

namespace {

constexpr double kPlanck = 6.62607015e-34;          // J s
constexpr double kElementaryCharge = 1.602176634e-19;  // C
constexpr double kVacuumPermittivity = 8.8541878128e-12;
constexpr double kPi = 3.14159265358979323846;

// F_i(u) = u_i - sum_{j<i} (u_i-u_j)^-2 + sum_{j>i} (u_i-u_j)^-2
Eigen::VectorXd force_residual(const Eigen::VectorXd& u) {
  const auto n = u.size();
  Eigen::VectorXd f = u;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = u[i] - u[j];
      f[i] -= (d > 0 ? 1.0 : -1.0) / (d * d);
    }
  }
  return f;
}

Eigen::MatrixXd force_jacobian(const Eigen::VectorXd& u) {
  const auto n = u.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = 2.0 / std::pow(std::abs(u[i] - u[j]), 3);
      jac(i, i) += c;
      jac(i, j) -= c;
    }
  }
  return jac;
}

bool strictly_increasing(const Eigen::VectorXd& u) {
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (!(u[i] > u[i - 1])) return false;
  return true;
}

}  // namespace

void TrapSpec::validate(int max_ions) const {
  std::ostringstream why;
  if (n_ions < 1) why << "n_ions must be >= 1 (got " << n_ions << "); ";
  if (n_ions > max_ions) why << "n_ions " << n_ions << " exceeds maximum " << max_ions << "; ";
  if (!(omega_transverse > 0) || !(omega_axial > 0) || !(recoil > 0) || !(rabi > 0) ||
      !(wavelength > 0))
    why << "all frequencies and the wavelength must be positive; ";
  if (!(omega_axial < omega_transverse)) why << "omega_axial must be below omega_transverse; ";
  const auto msg = why.str();
  if (!msg.empty()) throw ConfigError("invalid trap spec: " + msg.substr(0, msg.size() - 2));
}

double TrapSpec::ion_mass() const { return kPlanck / (recoil * wavelength * wavelength); }

double IonChain::mean_spacing_dimensionless() const {
  if (positions.size() < 2) return 0.0;
  return (positions.back() - positions.front()) / static_cast<double>(positions.size() - 1);
}

IonChain solve_equilibrium_positions(const TrapSpec& spec, const EquilibriumOptions& options) {
  spec.validate(options.max_ions);
  const int n = spec.n_ions;

  Eigen::VectorXd u(n);
  const double spacing = 2.0 * std::pow(static_cast<double>(n), -0.56);
  for (int i = 0; i < n; ++i) u[i] = spacing * (i + 1 - 0.5 * (n + 1));

  Eigen::VectorXd f = force_residual(u);
  double res = f.cwiseAbs().maxCoeff();
  int iter = 0;
  while (res > options.tolerance) {
    if (++iter > options.max_iterations) {
      std::ostringstream msg;
      msg << "equilibrium solver did not converge after " << options.max_iterations
          << " iterations (last residual " << res << ")";
      throw NumericalError(msg.str());
    }
    const Eigen::VectorXd step = force_jacobian(u).partialPivLu().solve(-f);
    double damping = 1.0;
    Eigen::VectorXd trial;
    double trial_res = 0.0;
    for (int halvings = 0; halvings < 60; ++halvings, damping *= 0.5) {
      trial = u + damping * step;
      if (!strictly_increasing(trial)) continue;
      trial_res = force_residual(trial).cwiseAbs().maxCoeff();
      if (trial_res < res || halvings == 59) break;
    }
    u = trial;
    f = force_residual(u);
    res = f.cwiseAbs().maxCoeff();
  }

  // Odd symmetry about the trap center.
  for (int i = 0; i < n / 2; ++i) {
    const double s = 0.5 * (u[n - 1 - i] - u[i]);
    u[i] = -s;
    u[n - 1 - i] = s;
  }
  if (n % 2 == 1) u[n / 2] = 0.0;

  IonChain chain;
  chain.positions.assign(u.data(), u.data() + n);
  chain.residual = force_residual(u).cwiseAbs().maxCoeff();

  const double omega = 2.0 * kPi * spec.omega_axial;
  const double coulomb =
      kElementaryCharge * kElementaryCharge / (4.0 * kPi * kVacuumPermittivity);
  chain.length_scale = std::cbrt(coulomb / (spec.ion_mass() * omega * omega));
  chain.positions_physical.resize(n);
  std::transform(chain.positions.begin(), chain.positions.end(),
                 chain.positions_physical.begin(),
                 [&](double x) { return x * chain.length_scale; });
  chain.mean_spacing = chain.mean_spacing_dimensionless() * chain.length_scale;
  return chain;
}

Eigen::MatrixXd transverse_stiffness(const TrapSpec& spec, const IonChain& chain) {
  const int n = chain.size();
  if (n != spec.n_ions) throw ConfigError("ion chain does not match trap spec");
  const double aniso = std::pow(spec.omega_transverse / spec.omega_axial, 2);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = aniso;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = 1.0 / std::pow(std::abs(chain.positions[i] - chain.positions[j]), 3);
      k(i, j) = c;
      k(i, i) -= c;
    }
  }
  return k;
}

TransverseModes transverse_normal_modes(const TrapSpec& spec, const IonChain& chain) {
  const int n = chain.size();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(transverse_stiffness(spec, chain));
  if (eig.info() != Eigen::Success) throw NumericalError("transverse mode eigensolver failed");

  // Eigen returns ascending eigenvalues; modes are reported descending.
  TransverseModes modes;
  modes.mode_matrix.resize(n, n);
  modes.frequencies.resize(n);
  for (int m = 0; m < n; ++m) {
    const int src = n - 1 - m;
    const double lambda = eig.eigenvalues()[src];
    if (!(lambda > 0)) {
      std::ostringstream msg;
      msg << "transverse zigzag instability: mode " << m + 1 << " has stiffness " << lambda
          << " (trap anisotropy too weak)";
      throw NumericalError(msg.str());
    }
    modes.frequencies[m] = spec.omega_axial * std::sqrt(lambda);
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    const double scale = v.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (std::abs(v[i]) > 1e-10 * scale) {
        if (v[i] < 0) v = -v;
        break;
      }
    }
    modes.mode_matrix.col(m) = v;
  }
  return modes;
}

double lamb_dicke(const TrapSpec& spec) {
  spec.validate();
  return std::sqrt(spec.recoil / spec.omega_transverse);
}

}  // namespace ionsim
