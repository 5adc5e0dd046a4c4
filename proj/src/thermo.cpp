#include "ionsim/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ionsim/io.hpp"

namespace ionsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Extremes {
  double min = kInf;
  double max = -kInf;
  double mean = 0.0;
};

Extremes extremes(std::span<const double> e) {
  if (e.empty()) throw ConfigError("empty spectrum");
  Extremes x;
  for (double v : e) {
    x.min = std::min(x.min, v);
    x.max = std::max(x.max, v);
    x.mean += v;
  }
  x.mean /= static_cast<double>(e.size());
  return x;
}

// Weights exp(-beta (E - shift)) with shift at the dominant end of the
// spectrum; infinite beta keeps only the extreme level.
std::vector<double> boltzmann(std::span<const double> e, double beta, double& shift) {
  const Extremes x = extremes(e);
  shift = beta >= 0 ? x.min : x.max;
  std::vector<double> w(e.size());
  for (std::size_t n = 0; n < e.size(); ++n) {
    if (std::isinf(beta))
      w[n] = e[n] == shift ? 1.0 : 0.0;
    else
      w[n] = std::exp(-beta * (e[n] - shift));
  }
  return w;
}

ThermalFit finish(ThermalFit fit) {
  fit.temperature = fit.beta == 0.0 ? kInf : 1.0 / fit.beta;
  return fit;
}

double top_gap(std::span<const double> energies) {
  std::vector<double> neg(energies.begin(), energies.end());
  for (double& v : neg) v = -v;
  return 50.0 / beta_cap(neg);
}

}  // namespace

std::string to_string(FitMethod method) {
  switch (method) {
    case FitMethod::Average: return "average";
    case FitMethod::Fluctuation: return "fluctuation";
    case FitMethod::Ratio: return "ratio";
  }
  return "?";
}

FitMethod parse_fit_method(const std::string& text) {
  if (text == "average") return FitMethod::Average;
  if (text == "fluctuation") return FitMethod::Fluctuation;
  if (text == "ratio") return FitMethod::Ratio;
  throw ConfigError("unknown fit method '" + text + "'");
}

std::string to_string(Ensemble ensemble) {
  return ensemble == Ensemble::AllStates ? "all-states" : "ground-sector";
}

Ensemble parse_ensemble(const std::string& text) {
  if (text == "all-states" || text == "all") return Ensemble::AllStates;
  if (text == "ground-sector" || text == "sector") return Ensemble::GroundSector;
  throw ConfigError("unknown ensemble '" + text + "' (expected all-states or ground-sector)");
}

std::vector<int> ensemble_indices(const SpectralDecomposition& spectrum, Ensemble ensemble) {
  if (ensemble == Ensemble::GroundSector) return spectrum.ground_sector_indices();
  std::vector<int> all(spectrum.size());
  for (std::size_t n = 0; n < all.size(); ++n) all[n] = static_cast<int>(n);
  return all;
}

std::vector<double> ensemble_energies(const SpectralDecomposition& spectrum, Ensemble ensemble) {
  std::vector<double> out;
  for (int n : ensemble_indices(spectrum, ensemble)) out.push_back(spectrum.energies[n]);
  return out;
}

EnergyMoments thermal_moments(std::span<const double> energies, double beta) {
  if (std::isnan(beta)) throw ConfigError("beta must not be NaN");
  double shift = 0;
  const auto w = boltzmann(energies, beta, shift);
  double z = 0, s1 = 0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    z += w[n];
    s1 += w[n] * (energies[n] - shift);
  }
  EnergyMoments m;
  m.mean = shift + s1 / z;
  double s2 = 0;
  for (std::size_t n = 0; n < w.size(); ++n) s2 += w[n] * (energies[n] - m.mean) * (energies[n] - m.mean);
  m.variance = s2 / z;
  return m;
}

EnergyMoments diabatic_moments(const QuantumState& state, const IsingHamiltonian& h) {
  const Eigen::VectorXcd hpsi = h * state.amplitudes;
  const double norm2 = state.amplitudes.squaredNorm();
  EnergyMoments m;
  m.mean = state.amplitudes.dot(hpsi).real() / norm2;
  // <H^2> - <H>^2 = || (H - <H>) psi ||^2, which stays non-negative.
  m.variance = (hpsi - m.mean * state.amplitudes).squaredNorm() / norm2;
  return m;
}

double beta_cap(std::span<const double> energies) {
  const Extremes x = extremes(energies);
  const double span = x.max - x.min;
  if (!(span > 0)) return 50.0;
  double gap = span;
  for (double v : energies) {
    const double d = v - x.min;
    if (d > 1e-6 * span) gap = std::min(gap, d);
  }
  return 50.0 / gap;
}

ThermalFit fit_beta_average(std::span<const double> energies, double target_energy,
                            bool sector_restricted) {
  const Extremes x = extremes(energies);
  const double span = x.max - x.min;
  const double scale = span > 0 ? span : std::max(std::abs(x.min), 1.0);
  ThermalFit fit;
  fit.method = FitMethod::Average;
  fit.sector_restricted = sector_restricted;

  if (target_energy < x.min - 1e-12 * scale) {
    std::ostringstream msg;
    msg << "sub-ground-state energy: target " << target_energy << " below E_0 = " << x.min;
    throw NumericalError(msg.str());
  }
  if (target_energy > x.max + 1e-12 * scale) {
    std::ostringstream msg;
    msg << "target energy " << target_energy << " above the highest level " << x.max;
    throw NumericalError(msg.str());
  }
  auto f = [&](double b) { return thermal_moments(energies, b).mean - target_energy; };

  if (std::abs(target_energy - x.mean) <= 1e-14 * scale) {
    fit.beta = 0.0;
    fit.converged = true;
    fit.residual = std::abs(f(0.0));
    return finish(fit);
  }
  const bool positive = target_energy < x.mean;
  if (positive && target_energy - x.min <= 1e-12 * scale) {
    fit.beta = beta_cap(energies);
    fit.at_cap = true;
    fit.residual = std::abs(f(fit.beta));
    return finish(fit);
  }
  if (!positive && x.max - target_energy <= 1e-12 * scale) {
    fit.beta = -top_gap(energies);
    fit.at_cap = true;
    fit.non_thermal = true;
    fit.residual = std::abs(f(fit.beta));
    return finish(fit);
  }

  // f is decreasing in beta; bracket [lo, hi] with f(lo) > 0 > f(hi).
  double lo = positive ? 0.0 : -top_gap(energies);
  double hi = positive ? beta_cap(energies) : 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) > 0 ? lo : hi) = mid;
  }
  double beta = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const EnergyMoments m = thermal_moments(energies, beta);
    if (!(m.variance > 0)) break;
    const double next = beta + (m.mean - target_energy) / m.variance;
    if (!(next >= lo && next <= hi)) break;
    if (std::abs(f(next)) > std::abs(f(beta))) break;
    beta = next;
  }
  fit.beta = beta;
  fit.residual = std::abs(f(beta));
  fit.converged = fit.residual <= 1e-10 * scale;
  fit.non_thermal = !positive;
  return finish(fit);
}

ThermalFit fit_beta_fluctuation(std::span<const double> energies, double target_variance,
                                bool sector_restricted) {
  if (!(target_variance >= 0)) throw NumericalError("energy variance target must be >= 0");
  ThermalFit fit;
  fit.method = FitMethod::Fluctuation;
  fit.sector_restricted = sector_restricted;
  const double cap = beta_cap(energies);
  auto g = [&](double b) { return thermal_moments(energies, b).variance - target_variance; };

  if (g(cap) >= 0) {
    fit.beta = cap;
    fit.at_cap = true;
    fit.converged = true;
    fit.residual = std::abs(g(cap));
    fit.crossings = {cap};
    return finish(fit);
  }

  constexpr int kGrid = 400;
  std::vector<double> grid{0.0};
  for (int k = 0; k < kGrid; ++k) grid.push_back(cap * std::pow(10.0, -8.0 + 8.0 * k / (kGrid - 1)));
  std::vector<double> vals(grid.size());
  double max_var = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    vals[k] = g(grid[k]);
    max_var = std::max(max_var, vals[k] + target_variance);
  }
  const double tol = 1e-14 * std::max(target_variance, 1e-300);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(vals[k]) <= tol) {
      fit.crossings.push_back(grid[k]);
      continue;
    }
    if (k + 1 < grid.size() && std::abs(vals[k + 1]) > tol && (vals[k] > 0) != (vals[k + 1] > 0)) {
      double lo = grid[k], hi = grid[k + 1];
      const bool lo_positive = vals[k] > 0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        ((g(mid) > 0) == lo_positive ? lo : hi) = mid;
      }
      fit.crossings.push_back(0.5 * (lo + hi));
    }
  }
  if (fit.crossings.empty()) {
    std::ostringstream msg;
    msg << "energy variance " << target_variance << " exceeds the attainable thermal maximum "
        << max_var;
    throw NumericalError(msg.str());
  }
  fit.beta = fit.crossings.back();
  fit.residual = std::abs(g(fit.beta));
  fit.converged = fit.residual <= 1e-10 * std::max(target_variance, 1e-300);
  return finish(fit);
}

ThermalFit fit_beta_ratio(double p_gs, double p_1, double gap) {
  if (!(p_gs > 0) || !(p_1 > 0))
    throw NumericalError("undefined ratio: ground or first-excited probability is zero");
  if (!(gap > 0)) throw NumericalError("degenerate gap: E_1 must lie strictly above E_gs");
  ThermalFit fit;
  fit.method = FitMethod::Ratio;
  fit.beta = (std::log(p_gs) - std::log(p_1)) / gap;
  fit.converged = true;
  fit.sector_restricted = true;
  fit.non_thermal = !(fit.beta > 0);
  return finish(fit);
}

ThermalDistribution thermal_distribution(std::span<const double> energies, double beta) {
  ThermalDistribution d;
  d.probabilities = boltzmann(energies, beta, d.energy_shift);
  for (double w : d.probabilities) d.partition_value += w;
  for (double& p : d.probabilities) p /= d.partition_value;
  return d;
}

std::vector<double> thermal_weights(const SpectralDecomposition& spectrum, double beta,
                                    Ensemble ensemble) {
  const auto idx = ensemble_indices(spectrum, ensemble);
  std::vector<double> e;
  e.reserve(idx.size());
  for (int n : idx) e.push_back(spectrum.energies[n]);
  const auto d = thermal_distribution(e, beta);
  std::vector<double> w(spectrum.size(), 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) w[idx[k]] = d.probabilities[k];
  return w;
}

TwoTemperatureFit two_temperature_fit(const SpectralDecomposition& spectrum,
                                      std::span<const double> probabilities) {
  if (probabilities.size() != spectrum.size())
    throw ConfigError("probabilities and spectrum sizes differ");
  const SpinBasis basis(spectrum.n_spins);
  std::vector<double> e2, e4;
  double p2 = 0, p4 = 0, pe2 = 0, pe4 = 0;
  for (int n : spectrum.ground_sector_indices()) {
    Eigen::Index dominant = 0;
    spectrum.eigenvectors.col(n).cwiseAbs().maxCoeff(&dominant);
    const double e = spectrum.energies[n];
    const double p = probabilities[n];
    if (basis.orbit_size(static_cast<std::size_t>(dominant)) == 4) {
      e4.push_back(e);
      p4 += p;
      pe4 += p * e;
    } else {
      e2.push_back(e);
      p2 += p;
      pe2 += p * e;
    }
  }
  TwoTemperatureFit out;
  out.pair_states = static_cast<int>(e2.size());
  out.quad_states = static_cast<int>(e4.size());
  auto fit_group = [](const std::vector<double>& e, double p, double pe, ThermalFit& fit) {
    if (e.size() < 2 || !(p > 0)) return false;
    try {
      fit = fit_beta_average(e, pe / p, true);
    } catch (const NumericalError&) {
      return false;
    }
    return fit.converged || fit.at_cap;
  };
  out.pair_defined = fit_group(e2, p2, pe2, out.pair_orbit);
  out.quad_defined = fit_group(e4, p4, pe4, out.quad_orbit);
  return out;
}

std::string fit_report(const ThermalFit& fit, const std::string& prefix) {
  std::ostringstream out;
  const std::string p = prefix.empty() ? "" : prefix + ".";
  out << p << "method = " << to_string(fit.method) << '\n'
      << p << "beta_per_khz = " << format_double(fit.beta * kHzPerKhz) << '\n'
      << p << "temperature_khz = " << format_double(fit.temperature / kHzPerKhz) << '\n'
      << p << "converged = " << (fit.converged ? "true" : "false") << '\n'
      << p << "residual = " << format_double(fit.residual) << '\n'
      << p << "sector_restricted = " << (fit.sector_restricted ? "true" : "false") << '\n'
      << p << "non_thermal = " << (fit.non_thermal ? "true" : "false") << '\n'
      << p << "at_cap = " << (fit.at_cap ? "true" : "false") << '\n';
  if (!fit.crossings.empty()) {
    out << p << "crossings_per_khz = ";
    for (std::size_t k = 0; k < fit.crossings.size(); ++k)
      out << (k ? "," : "") << format_double(fit.crossings[k] * kHzPerKhz);
    out << '\n';
  }
  return out.str();
}

}  // namespace ionsim
