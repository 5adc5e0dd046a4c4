#include "ionsim/couplings.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "ionsim/io.hpp"

namespace ionsim {

namespace {

PowerLawFit fit_log_log(const Eigen::MatrixXd& values,
                        const std::function<double(int, int)>& distance) {
  const int n = static_cast<int>(values.rows());
  if (n < 3) throw ConfigError("power-law fit needs at least 3 ions");
  std::vector<double> xs, ys;
  PowerLawFit fit;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = std::abs(values(i, j));
      if (v == 0.0) {
        ++fit.pairs_excluded;
        continue;
      }
      xs.push_back(std::log(distance(i, j)));
      ys.push_back(std::log(v));
    }
  }
  if (fit.pairs_excluded > 0)
    std::clog << "warning: " << fit.pairs_excluded
              << " zero couplings excluded from the power-law fit\n";
  const auto m = static_cast<double>(xs.size());
  if (xs.size() < 2) throw NumericalError("power-law fit: fewer than two usable pairs");

  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (!(sxx > 0)) throw NumericalError("power-law fit: all separations identical");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (intercept + slope * xs[k]);
    ss += r * r;
  }
  fit.alpha = -slope;
  fit.j0 = std::exp(intercept);
  fit.residual = std::sqrt(ss / m);
  fit.pairs_used = static_cast<int>(xs.size());
  return fit;
}

}  // namespace

std::string to_string(CouplingSign sign) { return sign == CouplingSign::Ferro ? "fm" : "afm"; }

CouplingSign parse_coupling_sign(const std::string& text) {
  if (text == "fm" || text == "FM" || text == "ferro") return CouplingSign::Ferro;
  if (text == "afm" || text == "AFM" || text == "antiferro") return CouplingSign::Antiferro;
  throw ConfigError("unknown coupling sign '" + text + "' (expected fm or afm)");
}

double detuning_from_com(const TrapSpec& spec) {
  return spec.omega_transverse + 3.0 * lamb_dicke(spec) * spec.rabi;
}

double mean_nearest_neighbor(const Eigen::MatrixXd& values) {
  const auto n = values.rows();
  if (n < 2) return 0.0;
  double sum = 0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) sum += std::abs(values(i, i + 1));
  return sum / static_cast<double>(n - 1);
}

CouplingMatrix compute_couplings(const TransverseModes& modes, const TrapSpec& spec, double mu) {
  const auto n = modes.mode_matrix.rows();
  Eigen::VectorXd weight(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double denom = mu * mu - modes.frequencies[m] * modes.frequencies[m];
    if (std::abs(denom) < 1e-6 * mu * mu) {
      std::ostringstream msg;
      msg << "detuning resonance with transverse mode " << m + 1 << " (omega = "
          << modes.frequencies[m] << " Hz, mu = " << mu << " Hz)";
      throw NumericalError(msg.str());
    }
    weight[m] = 1.0 / denom;
  }
  const double scale = spec.rabi * spec.rabi * spec.recoil;

  CouplingMatrix out;
  out.values = scale * modes.mode_matrix * weight.asDiagonal() * modes.mode_matrix.transpose();
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  out.values.diagonal().setZero();
  out.sign = CouplingSign::Ferro;
  out.j0_nn = mean_nearest_neighbor(out.values);
  return out;
}

CouplingMatrix with_sign(CouplingMatrix couplings, CouplingSign sign) {
  if (couplings.sign != sign) {
    couplings.values = -couplings.values;
    couplings.sign = sign;
  }
  return couplings;
}

PowerLawFit fit_power_law(const CouplingMatrix& couplings, const IonChain& chain) {
  if (chain.size() != couplings.size()) throw ConfigError("chain and couplings differ in size");
  const double a = chain.mean_spacing_dimensionless();
  return fit_log_log(couplings.values, [&](int i, int j) {
    return std::abs(chain.positions[i] - chain.positions[j]) / a;
  });
}

PowerLawFit fit_power_law_index(const CouplingMatrix& couplings) {
  return fit_log_log(couplings.values, [](int i, int j) { return static_cast<double>(j - i); });
}

TrapCouplings couplings_for_trap(const TrapSpec& spec, CouplingSign sign) {
  TrapCouplings tc;
  tc.chain = solve_equilibrium_positions(spec);
  tc.modes = transverse_normal_modes(spec, tc.chain);
  tc.mu = detuning_from_com(spec);
  tc.couplings = compute_couplings(tc.modes, spec, tc.mu);
  if (spec.n_ions >= 3) {
    tc.couplings.fit = fit_power_law(tc.couplings, tc.chain);
    tc.couplings.index_fit = fit_power_law_index(tc.couplings);
  }
  tc.couplings = with_sign(std::move(tc.couplings), sign);
  return tc;
}

double max_stable_axial(TrapSpec spec) {
  spec.omega_axial = 0.5 * spec.omega_transverse;
  const IonChain chain = solve_equilibrium_positions(spec);
  // K = (w_t / w_z)^2 I + C with C independent of w_z.
  Eigen::MatrixXd coulomb = transverse_stiffness(spec, chain);
  coulomb.diagonal().array() -= std::pow(spec.omega_transverse / spec.omega_axial, 2);
  const double c_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(coulomb,
                                                                      Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .minCoeff();
  if (c_min >= 0) return spec.omega_transverse;
  return std::min(spec.omega_transverse, spec.omega_transverse / std::sqrt(-c_min));
}

AxialTuning tune_axial_for_alpha(TrapSpec spec, double target_alpha, const TuningOptions& options) {
  if (!(target_alpha >= options.alpha_min && target_alpha <= options.alpha_max)) {
    std::ostringstream msg;
    msg << "target alpha " << target_alpha << " outside bracket [" << options.alpha_min << ", "
        << options.alpha_max << "]";
    throw ConfigError(msg.str());
  }
  if (spec.n_ions < 3) throw ConfigError("alpha tuning needs at least 3 ions");

  auto alpha_at = [&](double wz) {
    TrapSpec s = spec;
    s.omega_axial = wz;
    return couplings_for_trap(s).couplings.fit.alpha;
  };

  double lo = options.axial_floor_ratio * spec.omega_transverse;
  double hi = max_stable_axial(spec) * (1.0 - 1e-6);
  double a_lo = alpha_at(lo);
  double a_hi = alpha_at(hi);
  const double a_min = std::min(a_lo, a_hi);
  const double a_max = std::max(a_lo, a_hi);
  if (target_alpha < a_min || target_alpha > a_max) {
    std::ostringstream msg;
    msg << "target alpha " << target_alpha << " unreachable for N=" << spec.n_ions
        << "; achievable range [" << a_min << ", " << a_max << "] for omega_axial in [" << lo
        << ", " << hi << "] Hz";
    throw ConfigError(msg.str());
  }

  AxialTuning out;
  double mid = 0.5 * (lo + hi);
  double a_mid = alpha_at(mid);
  for (out.iterations = 1; out.iterations <= options.max_iterations; ++out.iterations) {
    mid = 0.5 * (lo + hi);
    a_mid = alpha_at(mid);
    if (std::abs(a_mid - target_alpha) < 1e-10 || hi - lo < 1e-9 * hi) break;
    // Keep the target between the bracket values whatever the orientation.
    if ((a_mid - target_alpha) * (a_lo - target_alpha) > 0) {
      lo = mid;
      a_lo = a_mid;
    } else {
      hi = mid;
      a_hi = a_mid;
    }
  }
  if (std::abs(a_mid - target_alpha) > options.alpha_tolerance) {
    std::ostringstream msg;
    msg << "alpha tuning stalled at " << a_mid << " (target " << target_alpha << ")";
    throw NumericalError(msg.str());
  }
  spec.omega_axial = mid;
  out.omega_axial = mid;
  out.alpha = a_mid;
  out.j0 = couplings_for_trap(spec).couplings.fit.j0;
  return out;
}

void write_couplings_csv(std::ostream& out, const CouplingMatrix& couplings,
                         const std::string& config_hash) {
  CsvWriter w(out, {"i", "j", "J_hz"}, config_hash);
  const int n = couplings.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      w.row({std::to_string(i + 1), std::to_string(j + 1), format_double(couplings.values(i, j))});
}

Eigen::MatrixXd read_couplings_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const auto is = t.numeric_column("i");
  const auto js = t.numeric_column("j");
  const auto vs = t.numeric_column("J_hz");
  int n = 0;
  for (std::size_t k = 0; k < is.size(); ++k)
    n = std::max(n, static_cast<int>(std::max(is[k], js[k])));
  if (n <= 0) throw ConfigError("couplings csv: empty");
  if (is.size() != static_cast<std::size_t>(n) * n)
    throw ConfigError("couplings csv: expected " + std::to_string(n * n) + " entries");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < is.size(); ++k) {
    const int i = static_cast<int>(is[k]) - 1, j = static_cast<int>(js[k]) - 1;
    if (i < 0 || j < 0) throw ConfigError("couplings csv: indices are 1-based");
    m(i, j) = vs[k];
  }
  return m;
}

}  // namespace ionsim
