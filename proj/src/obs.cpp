#include "ionsim/obs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ionsim {

namespace {

int spins_for_dimension(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim || n < 1 || n > kMaxSpins)
    throw ConfigError("vector length is not 2^N for a supported N");
  return n;
}

}  // namespace

std::vector<double> eigenstate_probabilities(const QuantumState& state,
                                             const SpectralDecomposition& spectrum) {
  if (state.amplitudes.size() != spectrum.eigenvectors.rows())
    throw ConfigError("state and spectrum bases differ in dimension");
  const double norm2 = state.amplitudes.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-8) {
    std::ostringstream msg;
    msg << "state is not normalized (|psi|^2 = " << norm2 << ")";
    throw ConfigError(msg.str());
  }
  const Eigen::VectorXd re = spectrum.eigenvectors.transpose() * state.amplitudes.real();
  const Eigen::VectorXd im = spectrum.eigenvectors.transpose() * state.amplitudes.imag();
  std::vector<double> p(spectrum.size());
  for (std::size_t n = 0; n < p.size(); ++n) p[n] = re[n] * re[n] + im[n] * im[n];
  return p;
}

EnsembleView EnsembleView::pure(const QuantumState& state) { return pure(state.amplitudes); }

EnsembleView EnsembleView::pure(const Eigen::VectorXcd& amplitudes) {
  const int n = spins_for_dimension(amplitudes.size());
  return EnsembleView(n, amplitudes.cwiseAbs2());
}

EnsembleView EnsembleView::thermal(const SpectralDecomposition& spectrum,
                                   std::span<const double> weights) {
  if (weights.size() != spectrum.size()) throw ConfigError("weights and spectrum sizes differ");
  const int n = spins_for_dimension(spectrum.eigenvectors.rows());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(spectrum.eigenvectors.rows());
  // Fixed summation order over eigenstates keeps the result reproducible.
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] == 0.0) continue;
    p += weights[k] * spectrum.eigenvectors.col(static_cast<Eigen::Index>(k)).cwiseAbs2();
  }
  return EnsembleView(n, std::move(p));
}

double EnsembleView::expectation(std::span<const double> diagonal) const {
  if (diagonal.size() != static_cast<std::size_t>(p_.size()))
    throw ConfigError("operator and ensemble dimensions differ");
  double acc = 0;
  for (Eigen::Index b = 0; b < p_.size(); ++b) acc += p_[b] * diagonal[b];
  return acc;
}

std::vector<double> magnetization_values(int n_spins, bool staggered) {
  const SpinBasis basis(n_spins);
  std::vector<double> m(basis.dimension());
  for (std::size_t b = 0; b < m.size(); ++b) {
    int total = 0;
    for (int i = 0; i < n_spins; ++i) {
      const int s = staggered && (i % 2 == 1) ? -1 : 1;
      total += s * SpinBasis::sigma_z(b, i);
    }
    m[b] = static_cast<double>(total) / n_spins;
  }
  return m;
}

MagnetizationMoments magnetization_moments(const EnsembleView& view, bool staggered) {
  const auto m = magnetization_values(view.n_spins(), staggered);
  const Eigen::VectorXd& p = view.distribution();
  MagnetizationMoments out;
  for (std::size_t b = 0; b < m.size(); ++b) {
    const double m2 = m[b] * m[b];
    out.mean += p[b] * m[b];
    out.second += p[b] * m2;
    out.fourth += p[b] * m2 * m2;
  }
  for (std::size_t b = 0; b < m.size(); ++b) {
    const double d2 = (m[b] - out.mean) * (m[b] - out.mean);
    out.central2 += p[b] * d2;
    out.central4 += p[b] * d2 * d2;
  }
  return out;
}

BinderResult binder_cumulant(const EnsembleView& view, bool staggered) {
  const MagnetizationMoments mm = magnetization_moments(view, staggered);
  BinderResult r;
  if (!(mm.central2 > 1e-300)) return r;
  const double g0 = 3.0 - 2.0 / view.n_spins();
  r.g_s = mm.central4 / (mm.central2 * mm.central2);
  r.g_bar = view.n_spins() > 1 ? (g0 - r.g_s) / (g0 - 1.0) : 0.0;
  r.defined = view.n_spins() > 1;
  return r;
}

std::vector<double> wavenumber_grid(int points) {
  if (points < 3) throw ConfigError("k grid needs at least 3 points");
  std::vector<double> k(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j)
    k[j] = -std::numbers::pi + 2.0 * std::numbers::pi * j / (points - 1);
  k.front() = -std::numbers::pi;
  k.back() = std::numbers::pi;
  if (points % 2 == 1) {
    k[points / 2] = 0.0;
  } else {
    k.insert(k.begin() + points / 2, 0.0);
  }
  return k;
}

std::size_t StructureFactorResult::index_of(double wavenumber) const {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k.size(); ++j)
    if (std::abs(k[j] - wavenumber) < std::abs(k[best] - wavenumber)) best = j;
  return best;
}

std::size_t StructureFactorResult::argmax() const {
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

StructureFactorResult structure_factor(const EnsembleView& view, const std::vector<double>& k) {
  const int n = view.n_spins();
  if (n < 2) throw ConfigError("structure factor needs N >= 2");
  const Eigen::VectorXd& p = view.distribution();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd pair = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> sz(n);
  for (Eigen::Index b = 0; b < p.size(); ++b) {
    if (p[b] == 0.0) continue;
    for (int i = 0; i < n; ++i) sz[i] = SpinBasis::sigma_z(static_cast<std::size_t>(b), i);
    for (int i = 0; i < n; ++i) {
      mean[i] += p[b] * sz[i];
      for (int j = i + 1; j < n; ++j) pair(i, j) += p[b] * sz[i] * sz[j];
    }
  }
  StructureFactorResult out;
  out.connected = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    out.connected(i, i) = 1.0 - mean[i] * mean[i];
    for (int j = i + 1; j < n; ++j) {
      out.connected(i, j) = pair(i, j) - mean[i] * mean[j];
      out.connected(j, i) = out.connected(i, j);
    }
  }
  out.correlation.assign(n - 1, 0.0);
  for (int r = 1; r < n; ++r) {
    double acc = 0;
    for (int m = 0; m + r < n; ++m) acc += out.connected(m, m + r);
    out.correlation[r - 1] = acc / (n - r);
  }
  out.k = k;
  out.s.resize(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) {
    cplx acc{};
    for (int r = 1; r < n; ++r) acc += out.correlation[r - 1] * std::polar(1.0, k[j] * r);
    out.s[j] = std::abs(acc) / (n - 1);
  }
  return out;
}

double integrated_difference(const StructureFactorResult& a, const StructureFactorResult& b) {
  if (a.k != b.k) throw ConfigError("structure factors on different k grids");
  double acc = 0;
  for (std::size_t j = 0; j + 1 < a.k.size(); ++j) {
    const double dk = a.k[j + 1] - a.k[j];
    acc += 0.5 * dk * (std::abs(a.s[j] - b.s[j]) + std::abs(a.s[j + 1] - b.s[j + 1]));
  }
  return acc;
}

std::optional<double> specific_heat(const EnergyMoments& moments, const ThermalFit& fit) {
  if (!fit.usable()) return std::nullopt;
  return moments.variance * fit.beta * fit.beta;
}

std::optional<double> thermal_specific_heat(std::span<const double> energies,
                                            const ThermalFit& fit) {
  if (!fit.usable()) return std::nullopt;
  return specific_heat(thermal_moments(energies, fit.beta), fit);
}

}  // namespace ionsim
