// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// below; pass an output directory to also keep the bundles of every run.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ionsim/harness.hpp"

using namespace ionsim;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleInfidelity = 1e-6;
constexpr int kOracleSegments = 1000;
constexpr double kOracleSeconds = 10;
constexpr double kNormTolerance = 1e-8;
constexpr double kHalvingTolerance = 1e-6;
constexpr double kProductionSeconds = 300;
constexpr double kLeakageTolerance = 1e-6;
constexpr double kAdiabaticP0 = 0.99;
constexpr double kIdentityTolerance = 1e-12;
constexpr double kStructureTolerance = 1e-10;
constexpr double kRoundTripRelative = 1e-8;
constexpr double kClosedFormTolerance = 1e-10;
constexpr int kSyntheticSpectra = 20;
constexpr double kPopulationFloor = 1e-4;
constexpr double kLogCorrelation = 0.9;
constexpr double kFig1Seconds = 600;
constexpr double kFmBinderAt5ms = 0.8;
constexpr double kBinderGap = 0.15;
constexpr double kLowAlpha = 0.76;
constexpr double kCvPeakMs = 2.0;
constexpr double kCvPeakWindowMs = 1.0;
constexpr double kAfmFlatRatio = 2.0;
constexpr double kAlphaLow = 0.6;
constexpr double kAlphaHigh = 1.3;
constexpr double kJ0Reference = 1e3;
constexpr double kJ0Factor = 3.0;
constexpr double kTrapTolerance = 1e-10;
constexpr double kTrapSeconds = 60;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Run {
  std::optional<ResultBundle> bundle;
  std::string error;
  double seconds = 0;
};

class Runner {
 public:
  explicit Runner(std::optional<fs::path> keep) : keep_(std::move(keep)) {}

  const Run& get(const std::map<std::string, std::string>& values) {
    const RunConfig config = make_config(values);
    const std::string key = config.hash();
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    std::string label;
    for (const auto& [k, v] : values) label += (label.empty() ? "" : " ") + k + "=" + v;
    std::fprintf(stderr, "[acceptance] run %s\n", label.c_str());
    Run r;
    const auto start = Clock::now();
    try {
      r.bundle = run_experiment(config, &cache_);
      if (keep_) write_bundle(*r.bundle, *keep_ / ("run_" + key));
    } catch (const std::exception& e) {
      r.error = e.what();
      std::fprintf(stderr, "[acceptance]   failed: %s\n", e.what());
    }
    r.seconds = seconds_since(start);
    std::fprintf(stderr, "[acceptance]   %.1f s\n", r.seconds);
    return runs_.emplace(key, std::move(r)).first->second;
  }

 private:
  std::optional<fs::path> keep_;
  SpectrumCache cache_;
  std::map<std::string, Run> runs_;
};

std::map<std::string, std::string> figure_run(int n, const char* sign, double t_f_ms,
                                              double alpha = 1.0) {
  return {{"system.n_ions", std::to_string(n)},
          {"system.sign", sign},
          {"system.alpha_target", num(alpha)},
          {"ramp.t_f_ms", num(t_f_ms)}};
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "" : "!") + what);
  }
  void info(const std::string& what) { notes.push_back("(" + what + ")"); }
  void require_run(const Run& r, const std::string& what) {
    if (!r.bundle) check(false, what + " run failed: " + r.error);
  }
};

// Piecewise-constant propagation with exact exponentials at segment midpoints.
Eigen::VectorXcd exact_piecewise(const ResultBundle& b, int segments) {
  const RampSchedule& r = b.schedule;
  const double dt = r.t_final / segments;
  Eigen::VectorXcd psi = initial_state(SpinBasis(b.config.n_ions)).amplitudes;
  for (int s = 0; s < segments; ++s) {
    const double field = r.field((s + 0.5) * dt);
    const Eigen::MatrixXd h = build_hamiltonian(b.couplings, field).dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::VectorXcd phases =
        (es.eigenvalues() * (-b.config.phase_rate * dt)).unaryExpr([](double a) {
          return std::polar(1.0, a);
        });
    const Eigen::MatrixXcd v = es.eigenvectors().cast<cplx>();
    psi = v * phases.asDiagonal() * (v.adjoint() * psi);
  }
  return psi;
}

Outcome criterion_oracle(Runner& runs) {
  Outcome o;
  const auto start = Clock::now();
  const Run& r = runs.get({{"system.n_ions", "4"}});
  o.require_run(r, "N=4");
  if (!r.bundle) return o;
  const Eigen::VectorXcd exact = exact_piecewise(*r.bundle, kOracleSegments);
  const double overlap = std::norm(exact.dot(r.bundle->final_state.amplitudes));
  const double infidelity = 1 - overlap;
  const double elapsed = seconds_since(start);
  o.check(infidelity < kOracleInfidelity, "infidelity " + num(infidelity));
  o.check(elapsed < kOracleSeconds, "runtime " + num(elapsed) + " s");
  return o;
}

Outcome criterion_unitarity(Runner& runs) {
  Outcome o;
  const Run& r = runs.get(figure_run(10, "fm", 3));
  o.require_run(r, "N=10 FM 3 ms");
  if (!r.bundle) return o;
  const ResultBundle& b = *r.bundle;
  o.check(b.max_norm_drift < kNormTolerance, "norm drift " + num(b.max_norm_drift));
  const auto& c = b.convergence;
  const bool halved = c.checked && !c.changes.empty();
  o.check(halved, "dt halvings " + std::to_string(c.changes.size()));
  if (halved)
    o.check(c.changes.back() < kHalvingTolerance, "last halving change " + num(c.changes.back()));
  o.check(r.seconds < kProductionSeconds, "runtime " + num(r.seconds) + " s");
  return o;
}

Outcome criterion_symmetry(Runner& runs) {
  Outcome o;
  for (const char* sign : {"fm", "afm"}) {
    const Run& r = runs.get(figure_run(8, sign, 3));
    o.require_run(r, std::string("N=8 ") + sign);
    if (!r.bundle) continue;
    o.check(r.bundle->max_sector_leakage < kLeakageTolerance,
            std::string(sign) + " leakage " + num(r.bundle->max_sector_leakage));
  }
  return o;
}

Outcome criterion_adiabatic(Runner& runs) {
  Outcome o;
  // The slow ramp needs more halvings than the default to settle.
  const Run& r = runs.get(
      {{"system.n_ions", "6"}, {"ramp.j0_tau", "20"}, {"evolve.max_halvings", "6"}});
  o.require_run(r, "N=6 J0 tau=20");
  if (!r.bundle) return o;
  const ResultBundle& b = *r.bundle;
  const double p0 = b.analysis.probabilities[0];
  o.check(p0 > kAdiabaticP0, "P0 " + num(p0));
  // A perfectly adiabatic ramp keeps the initial overlap with the B0 ground state.
  const SpectralDecomposition start =
      diagonalize_with_symmetries(build_hamiltonian(b.couplings, b.schedule.b0));
  const double overlap =
      std::norm(start.eigenvectors.col(0).cast<cplx>().dot(initial_state(SpinBasis(6)).amplitudes));
  o.info("|<g(B0)|all-x>|^2 " + num(overlap));
  return o;
}

Eigen::VectorXcd cat(int n, std::size_t a, std::size_t b) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(std::size_t{1} << n);
  v[a] += 1 / std::sqrt(2.0);
  v[b] += 1 / std::sqrt(2.0);
  return v;
}

std::size_t neel_bits(int n) {
  std::size_t b = 0;
  for (int i = 1; i < n; i += 2) b |= std::size_t{1} << i;
  return b;
}

Outcome criterion_binder() {
  Outcome o;
  double worst_product = 0, worst_ghz = 0, worst_neel = 0;
  for (int n = 2; n <= 12; ++n) {
    const std::size_t full = (std::size_t{1} << n) - 1;
    const BinderResult p = binder_cumulant(EnsembleView::pure(initial_state(SpinBasis(n))), false);
    worst_product = std::max({worst_product, std::abs(p.g_s - (3 - 2.0 / n)), std::abs(p.g_bar)});
    const BinderResult g = binder_cumulant(EnsembleView::pure(cat(n, 0, full)), false);
    worst_ghz = std::max(worst_ghz, std::abs(g.g_bar - 1));
    const BinderResult s =
        binder_cumulant(EnsembleView::pure(cat(n, neel_bits(n), full ^ neel_bits(n))), true);
    worst_neel = std::max(worst_neel, std::abs(s.g_bar - 1));
  }
  o.check(worst_product < kIdentityTolerance, "product |dg| " + num(worst_product));
  o.check(worst_ghz < kIdentityTolerance, "GHZ |g_bar-1| " + num(worst_ghz));
  o.check(worst_neel < kIdentityTolerance, "Neel GHZ |g_bar-1| " + num(worst_neel));
  return o;
}

Outcome criterion_structure() {
  Outcome o;
  double product = 0, ghz = 0, neel = 0;
  const auto k = wavenumber_grid();
  for (int n = 2; n <= 12; ++n) {
    const std::size_t full = (std::size_t{1} << n) - 1;
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(std::size_t{1} << n);
    z[neel_bits(n)] = 1.0;
    for (const auto& view :
         {EnsembleView::pure(initial_state(SpinBasis(n))), EnsembleView::pure(z)}) {
      const StructureFactorResult s = structure_factor(view, k);
      for (double v : s.s) product = std::max(product, std::abs(v));
    }
    const StructureFactorResult g = structure_factor(EnsembleView::pure(cat(n, 0, full)), k);
    ghz = std::max(ghz, std::abs(g.s[g.index_of(0.0)] - 1));
    const StructureFactorResult a =
        structure_factor(EnsembleView::pure(cat(n, neel_bits(n), full ^ neel_bits(n))), k);
    neel = std::max(neel, std::abs(a.s[a.index_of(std::numbers::pi)] - 1));
  }
  o.check(product < kIdentityTolerance, "product max S " + num(product));
  o.check(ghz < kStructureTolerance, "GHZ |S(0)-1| " + num(ghz));
  o.check(neel < kStructureTolerance, "Neel GHZ |S(pi)-1| " + num(neel));
  return o;
}

Outcome criterion_thermometry() {
  Outcome o;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> level(-5e3, 5e3);
  std::uniform_real_distribution<double> exponent(-5.0, -2.0);
  double worst = 0;
  for (int t = 0; t < kSyntheticSpectra; ++t) {
    std::vector<double> e(256);
    for (double& v : e) v = level(rng);
    const double beta = std::pow(10.0, exponent(rng));
    const ThermalFit f = fit_beta_average(e, thermal_moments(e, beta).mean);
    worst = std::max(worst, std::abs(f.beta - beta) / beta);
  }
  o.check(worst < kRoundTripRelative, "round trip rel " + num(worst));

  const std::vector<double> two{0.0, 1.0};
  const double ln3 = std::abs(fit_beta_average(two, 0.25).beta - std::log(3.0));
  o.check(ln3 < kClosedFormTolerance, "ln3 " + num(ln3));

  double schottky = 0;
  for (double beta : {0.2, 1.0, 2.5, 6.0}) {
    ThermalFit f;
    f.beta = beta;
    f.temperature = 1 / beta;
    f.converged = true;
    const double x = std::exp(beta);
    const double exact = beta * beta * x / ((1 + x) * (1 + x));
    schottky = std::max(schottky, std::abs(*thermal_specific_heat(two, f) - exact));
  }
  o.check(schottky < kClosedFormTolerance, "Schottky " + num(schottky));
  return o;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Outcome criterion_fig1(Runner& runs) {
  Outcome o;
  const Run& fm = runs.get(figure_run(10, "fm", 3));
  const Run& afm = runs.get(figure_run(10, "afm", 3));
  o.require_run(fm, "FM");
  o.require_run(afm, "AFM");
  if (fm.bundle) {
    const ResultBundle& b = *fm.bundle;
    const auto& p = b.analysis.probabilities;
    const auto& s = *b.spectrum;
    o.check(std::max_element(p.begin(), p.end()) == p.begin(), "FM P0 " + num(p[0]) + " is max");

    const auto gs = s.ground_sector_indices();
    std::vector<double> gs_energies, log_p, minus_e;
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < gs.size(); ++k) {
      gs_energies.push_back(s.energies[gs[k]]);
      if (p[gs[k]] > kPopulationFloor) {
        kept.push_back(k);
        log_p.push_back(std::log(p[gs[k]]));
        minus_e.push_back(-s.energies[gs[k]]);
      }
    }
    const double corr = kept.size() >= 3 ? pearson(log_p, minus_e) : 0.0;
    o.check(corr > kLogCorrelation, "FM corr(ln P, -E) " + num(corr) + " over " +
                                        std::to_string(kept.size()) + " states");

    // Curves are normalized over the ground sector, so the fits compared
    // against them use the same sector; the all-states fits are reported too.
    auto rms_of = [&](const ResultBundle& run) {
      std::map<FitMethod, double> rms;
      for (FitMethod m : {FitMethod::Average, FitMethod::Fluctuation, FitMethod::Ratio}) {
        const FitOutcome* f = run.analysis.find(m);
        if (!f || !f->fit) {
          rms[m] = INFINITY;
          continue;
        }
        const auto curve = thermal_distribution(gs_energies, f->fit->beta).probabilities;
        double acc = 0;
        for (std::size_t k : kept) {
          const double d = std::log(p[gs[k]]) - std::log(curve[k]);
          acc += d * d;
        }
        rms[m] = std::sqrt(acc / static_cast<double>(kept.size()));
      }
      return rms;
    };
    auto describe = [](std::map<FitMethod, double>& rms) {
      return num(rms[FitMethod::Average]) + "/" + num(rms[FitMethod::Fluctuation]) + "/" +
             num(rms[FitMethod::Ratio]);
    };
    auto sector_values = figure_run(10, "fm", 3);
    sector_values["thermo.ensemble"] = "ground-sector";
    const Run& sector = runs.get(sector_values);
    o.require_run(sector, "FM ground-sector fits");
    if (sector.bundle) {
      auto rms = rms_of(*sector.bundle);
      const bool best = rms[FitMethod::Average] <= rms[FitMethod::Fluctuation] &&
                        rms[FitMethod::Average] <= rms[FitMethod::Ratio];
      o.check(best, "FM rms avg/fluct/ratio, ground-sector fits " + describe(rms));
    }
    auto all = rms_of(b);
    o.info("all-states fits " + describe(all));
  }
  if (afm.bundle) {
    const ResultBundle& b = *afm.bundle;
    const auto gs = b.spectrum->ground_sector_indices();
    const double p0 = b.analysis.probabilities[gs[0]];
    const double p1 = b.analysis.probabilities[gs[1]];
    o.check(p1 > p0, "AFM P1 " + num(p1) + " > P0 " + num(p0));
    const FitOutcome* ratio = b.analysis.find(FitMethod::Ratio);
    const bool negative = ratio && ratio->fit && ratio->fit->beta < 0 && ratio->fit->non_thermal;
    o.check(negative, "AFM ratio fit flagged negative");
  }
  if (fm.bundle && afm.bundle) {
    const double t = fm.seconds + afm.seconds;
    o.check(t < kFig1Seconds, "runtime " + num(t) + " s");
  }
  return o;
}

Outcome criterion_fig2(Runner& runs) {
  Outcome o;
  std::vector<double> fm_dia, fm_therm, afm_dia;
  std::vector<bool> fm_therm_ok;
  for (int t = 1; t <= 5; ++t) {
    const Run& fm = runs.get(figure_run(10, "fm", t));
    const Run& afm = runs.get(figure_run(10, "afm", t));
    o.require_run(fm, "FM " + std::to_string(t) + " ms");
    o.require_run(afm, "AFM " + std::to_string(t) + " ms");
    if (!fm.bundle || !afm.bundle) return o;
    fm_dia.push_back(fm.bundle->analysis.binder_dia.g_bar);
    const auto& therm = fm.bundle->analysis.binder_therm;
    fm_therm.push_back(therm ? therm->g_bar : NAN);
    afm_dia.push_back(afm.bundle->analysis.binder_dia.g_bar);
  }
  std::string series;
  bool monotone = true;
  for (std::size_t i = 0; i < fm_dia.size(); ++i) {
    series += (i ? "," : "") + num(fm_dia[i]);
    if (i > 0 && fm_dia[i] < fm_dia[i - 1]) monotone = false;
  }
  o.check(monotone, "FM g_bar_dia non-decreasing [" + series + "]");
  o.check(fm_dia.back() > kFmBinderAt5ms, "FM g_bar_dia(5 ms) " + num(fm_dia.back()));
  bool below = true;
  for (std::size_t i = 0; i < afm_dia.size(); ++i) below = below && afm_dia[i] < fm_dia[i];
  o.check(below, "AFM below FM at every t_f");
  double gap = 0;
  for (std::size_t i = 2; i < fm_dia.size(); ++i) {
    const double d = std::abs(fm_dia[i] - fm_therm[i]);
    gap = std::isnan(d) ? INFINITY : std::max(gap, d);
  }
  o.check(gap < kBinderGap, "FM |dia-therm| 3-5 ms " + num(gap));
  return o;
}

Outcome criterion_fig3(Runner& runs) {
  Outcome o;
  std::map<std::string, double> diff;
  for (const char* sign : {"fm", "afm"}) {
    for (double alpha : {kLowAlpha, 1.0}) {
      const std::string label = std::string(sign) + " alpha=" + num(alpha);
      const Run& r = runs.get(figure_run(10, sign, 3, alpha));
      o.require_run(r, label);
      if (!r.bundle) return o;
      const Analysis& a = r.bundle->analysis;
      diff[label] = a.structure_therm ? integrated_difference(a.structure_dia, *a.structure_therm)
                                      : INFINITY;
      if (alpha != 1.0) continue;
      const StructureFactorResult& s = a.structure_dia;
      const std::size_t peak = s.argmax();
      const bool fm = std::string(sign) == "fm";
      const bool at_target = fm ? peak == s.index_of(0.0)
                                : std::abs(std::abs(s.k[peak]) - std::numbers::pi) < 1e-12;
      o.check(at_target, label + " S_dia peak at k=" + num(s.k[peak]) + " (S(0)=" +
                             num(s.s[s.index_of(0.0)]) + ", S(pi)=" +
                             num(s.s[s.index_of(std::numbers::pi)]) + ")");
    }
  }
  const std::string low = num(kLowAlpha);
  o.check(diff["fm alpha=1"] < diff["fm alpha=" + low],
          "FM |dS| alpha=1 " + num(diff["fm alpha=1"]) + " < alpha=" + low + " " +
              num(diff["fm alpha=" + low]));
  o.check(diff["afm alpha=1"] > diff["afm alpha=" + low],
          "AFM |dS| alpha=1 " + num(diff["afm alpha=1"]) + " > alpha=" + low + " " +
              num(diff["afm alpha=" + low]));
  return o;
}

Outcome criterion_fig4(Runner& runs) {
  Outcome o;
  const std::vector<int> sizes{6, 8, 10, 12};
  std::vector<double> discrepancy;
  for (int n : sizes) {
    for (const char* sign : {"fm", "afm"}) {
      std::vector<double> cv_dia, cv_therm;
      bool complete = true;
      for (int t = 1; t <= 5; ++t) {
        const Run& r = runs.get(figure_run(n, sign, t));
        const std::string label =
            "N=" + std::to_string(n) + " " + sign + " " + std::to_string(t) + " ms";
        o.require_run(r, label);
        if (!r.bundle) {
          complete = false;
          continue;
        }
        const Analysis& a = r.bundle->analysis;
        if (!a.cv_dia || !a.cv_therm) {
          o.check(false, label + " C_v undefined");
          complete = false;
          continue;
        }
        cv_dia.push_back(*a.cv_dia);
        cv_therm.push_back(*a.cv_therm);
      }
      if (!complete) continue;
      const std::string tag = "N=" + std::to_string(n) + " " + sign;
      std::string series;
      for (std::size_t i = 0; i < cv_dia.size(); ++i) series += (i ? "," : "") + num(cv_dia[i]);
      if (std::string(sign) == "fm") {
        const auto peak = std::max_element(cv_dia.begin(), cv_dia.end()) - cv_dia.begin();
        const double t_peak = 1.0 + static_cast<double>(peak);
        const bool interior = peak > 0 && peak + 1 < static_cast<long>(cv_dia.size());
        o.check(interior && std::abs(t_peak - kCvPeakMs) <= kCvPeakWindowMs,
                tag + " C_v_dia peak at " + num(t_peak) + " ms [" + series + "]");
        discrepancy.push_back(std::abs(cv_dia.back() - cv_therm.back()));
      } else {
        for (const auto* curve : {&cv_dia, &cv_therm}) {
          const auto [lo, hi] = std::minmax_element(curve->begin(), curve->end());
          const double ratio = *lo > 0 ? *hi / *lo : INFINITY;
          o.check(ratio <= kAfmFlatRatio, tag + (curve == &cv_dia ? " dia" : " therm") +
                                              " max/min " + num(ratio) +
                                              (curve == &cv_dia ? " [" + series + "]" : ""));
        }
      }
    }
  }
  if (discrepancy.size() == sizes.size()) {
    std::string series;
    bool grows = true;
    for (std::size_t i = 0; i < discrepancy.size(); ++i) {
      series += (i ? "," : "") + num(discrepancy[i]);
      if (i > 0 && discrepancy[i] <= discrepancy[i - 1]) grows = false;
    }
    o.check(grows, "FM |C_v dia-therm| at 5 ms grows with N [" + series + "]");
  }
  return o;
}

Outcome criterion_trap() {
  Outcome o;
  const auto start = Clock::now();
  double alpha_lo = INFINITY, alpha_hi = -INFINITY, j_lo = INFINITY, j_hi = 0;
  double ortho = 0, symmetry = 0;
  for (double wz = 620e3; wz <= 950e3 + 1; wz += 10e3) {
    TrapSpec s;
    s.n_ions = 10;
    s.omega_axial = wz;
    const TrapCouplings tc = couplings_for_trap(s);
    alpha_lo = std::min(alpha_lo, tc.couplings.fit.alpha);
    alpha_hi = std::max(alpha_hi, tc.couplings.fit.alpha);
    j_lo = std::min(j_lo, tc.couplings.j0_nn);
    j_hi = std::max(j_hi, tc.couplings.j0_nn);
    const IonChain chain = solve_equilibrium_positions(s);
    const TransverseModes m = transverse_normal_modes(s, chain);
    const Eigen::MatrixXd gram = m.mode_matrix.transpose() * m.mode_matrix;
    ortho = std::max(ortho, (gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff());
    for (int i = 0; i < 10; ++i)
      symmetry = std::max(symmetry, std::abs(chain.positions[i] + chain.positions[9 - i]));
  }
  o.check(alpha_lo >= kAlphaLow && alpha_hi <= kAlphaHigh,
          "alpha in [" + num(alpha_lo) + ", " + num(alpha_hi) + "]");
  o.check(j_lo >= kJ0Reference / kJ0Factor && j_hi <= kJ0Reference * kJ0Factor,
          "J_nn in [" + num(j_lo) + ", " + num(j_hi) + "] Hz");
  o.check(ortho < kTrapTolerance, "mode orthonormality " + num(ortho));
  o.check(symmetry < kTrapTolerance, "position symmetry " + num(symmetry));
  const double elapsed = seconds_since(start);
  o.check(elapsed < kTrapSeconds, "runtime " + num(elapsed) + " s");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::optional<fs::path> keep;
  if (argc > 1) {
    keep = fs::path(argv[1]);
    fs::create_directories(*keep);
  }
  Runner runs(keep);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 evolution oracle", [&] { return criterion_oracle(runs); }},
      {"2 unitarity and dt convergence", [&] { return criterion_unitarity(runs); }},
      {"3 symmetry conservation", [&] { return criterion_symmetry(runs); }},
      {"4 adiabatic limit", [&] { return criterion_adiabatic(runs); }},
      {"5 Binder identities", criterion_binder},
      {"6 structure factor identities", criterion_structure},
      {"7 thermometry round trips", criterion_thermometry},
      {"8 populations vs thermal curves", [&] { return criterion_fig1(runs); }},
      {"9 Binder cumulant trend", [&] { return criterion_fig2(runs); }},
      {"10 structure factor shape", [&] { return criterion_fig3(runs); }},
      {"11 specific heat shape", [&] { return criterion_fig4(runs); }},
      {"12 trap and couplings", criterion_trap},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%s criterion %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                seconds_since(start), detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
