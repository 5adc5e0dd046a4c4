#include "ionsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "ionsim/io.hpp"

namespace ionsim {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
std::string flag(bool v) { return v ? "true" : "false"; }

std::string hamiltonian_key(const IsingHamiltonian& h, const CouplingMatrix& couplings) {
  std::ostringstream key;
  key << h.n_spins() << ';' << fmt(h.b_field());
  for (Eigen::Index i = 0; i < couplings.values.rows(); ++i)
    for (Eigen::Index j = i + 1; j < couplings.values.cols(); ++j)
      key << ';' << fmt(couplings.values(i, j));
  return fnv1a_hex(key.str()) + ":" + std::to_string(key.str().size());
}

// 1 - |P_sector psi|^2 with P = (1 + s1 R)(1 + s2 X) / 4.
double sector_leakage(const QuantumState& state, const BasisPermutation& reflect,
                      const BasisPermutation& flip, SymmetrySector sector) {
  const Eigen::VectorXcd& psi = state.amplitudes;
  double kept = 0;
  for (Eigen::Index b = 0; b < psi.size(); ++b) {
    const auto r = reflect.image[b];
    const auto x = flip.image[b];
    const auto rx = flip.image[r];
    const cplx proj = 0.25 * (psi[b] + double(sector.spatial) * psi[r] + double(sector.spin) * psi[x] +
                              double(sector.spatial * sector.spin) * psi[rx]);
    kept += std::norm(proj);
  }
  return std::max(0.0, 1.0 - kept / psi.squaredNorm());
}

std::string summary_text(const ResultBundle& b) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
  const Analysis& a = b.analysis;
  const SpectralDecomposition& s = *b.spectrum;
  add("schema_version", std::to_string(kSchemaVersion));
  add("status", "complete");
  add("mode", b.replayed ? "replay" : "run");
  add("config_hash", b.config_hash);
  add("code_version", kCodeVersion);
  add("n_ions", std::to_string(b.config.n_ions));
  add("sign", to_string(b.config.sign));
  add("alpha_target", b.config.values.at("system.alpha_target"));
  add("omega_axial_hz", fmt(b.trap.omega_axial));
  if (b.tuning) add("tuning_iterations", std::to_string(b.tuning->iterations));
  add("alpha_fit", fmt(b.couplings.fit.alpha));
  add("j0_fit_khz", fmt(b.couplings.fit.j0 / kHzPerKhz));
  add("alpha_index_fit", fmt(b.couplings.index_fit.alpha));
  add("j0_nn_khz", fmt(b.couplings.j0_nn / kHzPerKhz));
  add("b0_khz", fmt(b.schedule.b0 / kHzPerKhz));
  add("b_final_khz", fmt(b.b_final / kHzPerKhz));
  add("tau_ms", fmt(b.schedule.tau / kSecondsPerMs));
  add("t_f_ms", fmt(b.schedule.t_final / kSecondsPerMs));
  add("phase_convention", b.config.values.at("evolve.phase_convention"));
  add("dt_s", fmt(b.dt));
  add("steps", std::to_string(b.steps));
  add("max_solver_residual", fmt(b.max_solver_residual));
  add("max_solver_iterations", std::to_string(b.max_solver_iterations));
  add("max_norm_drift", fmt(b.max_norm_drift));
  add("max_sector_leakage", fmt(b.max_sector_leakage));
  add("convergence.checked", flag(b.convergence.checked));
  add("convergence.passed", flag(b.convergence.passed));
  std::string dts, changes;
  for (double d : b.convergence.dts) dts += (dts.empty() ? "" : ",") + fmt(d);
  for (double c : b.convergence.changes) changes += (changes.empty() ? "" : ",") + fmt(c);
  add("convergence.dts_s", dts);
  add("convergence.changes", changes);
  add("spectrum.ground_sector", s.ground_sector.label());
  add("spectrum.e0_khz", fmt(s.energies[0] / kHzPerKhz));
  add("spectrum.max_eigen_residual", fmt(s.max_eigen_residual));
  add("spectrum.max_parity_residual", fmt(s.max_parity_residual));
  add("spectrum.degeneracy_tolerance_hz", fmt(s.degeneracy_tolerance));
  add("ensemble", to_string(b.config.ensemble));
  add("sector_population", fmt(a.sector_population));
  add("p0", fmt(a.probabilities[0]));
  add("energy_dia_khz", fmt(a.diabatic.mean / kHzPerKhz));
  add("variance_dia_khz2", fmt(a.diabatic.variance / (kHzPerKhz * kHzPerKhz)));
  add("observable_fit", to_string(b.config.observable_fit));
  add("g_bar_dia", a.binder_dia.defined ? fmt(a.binder_dia.g_bar) : "");
  add("g_bar_therm", a.binder_therm && a.binder_therm->defined ? fmt(a.binder_therm->g_bar) : "");
  const auto& sd = a.structure_dia;
  add("s_zero_dia", fmt(sd.s[sd.index_of(0.0)]));
  add("s_pi_dia", fmt(sd.s[sd.index_of(std::numbers::pi)]));
  if (a.structure_therm) {
    const auto& st = *a.structure_therm;
    add("s_zero_therm", fmt(st.s[st.index_of(0.0)]));
    add("s_pi_therm", fmt(st.s[st.index_of(std::numbers::pi)]));
    add("s_integrated_difference", fmt(integrated_difference(sd, st)));
  }
  add("cv_dia", fmt(a.cv_dia));
  add("cv_therm", fmt(a.cv_therm));
  add("temperature_spread", fmt(a.temperature_spread));
  add("two_temperature.pair_states", std::to_string(a.two_temperature.pair_states));
  add("two_temperature.quad_states", std::to_string(a.two_temperature.quad_states));
  add("two_temperature.pair_temperature_khz",
      a.two_temperature.pair_defined ? fmt(a.two_temperature.pair_orbit.temperature / kHzPerKhz) : "");
  add("two_temperature.quad_temperature_khz",
      a.two_temperature.quad_defined ? fmt(a.two_temperature.quad_orbit.temperature / kHzPerKhz) : "");

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  for (const auto& f : a.fits) {
    const std::string prefix = "fit." + to_string(f.method);
    if (f.fit)
      out += fit_report(*f.fit, prefix);
    else
      out += prefix + ".error = " + f.error + "\n";
  }
  return out;
}

std::map<std::string, std::string> read_summary(const fs::path& dir) {
  std::ifstream in(dir / "summary.txt");
  if (!in) throw ConfigError("bundle has no summary.txt: " + dir.string());
  return parse_key_values(in, (dir / "summary.txt").string());
}

double summary_number(const std::map<std::string, std::string>& s, const std::string& key) {
  const auto it = s.find(key);
  if (it == s.end() || it->second.empty()) return 0.0;
  return std::stod(it->second);
}

const char* const kBundleTables[] = {"couplings.csv", "spectrum.csv", "fig1_populations.csv",
                                     "fig2_binder.csv", "fig3_structure.csv",
                                     "fig4_specific_heat.csv"};

}  // namespace

SpectrumCache::Ptr SpectrumCache::get(const IsingHamiltonian& h, const CouplingMatrix& couplings) {
  const std::string key = hamiltonian_key(h, couplings);
  std::promise<Ptr> promise;
  std::shared_future<Ptr> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      future = promise.get_future().share();
      entries_.emplace(key, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const SpectralDecomposition>(diagonalize_with_symmetries(h)));
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mutex_);
      entries_.erase(key);
    }
  }
  return future.get();
}

std::size_t SpectrumCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

const FitOutcome* Analysis::find(FitMethod method) const {
  for (const auto& f : fits)
    if (f.method == method) return &f;
  return nullptr;
}

Analysis analyze(const RunConfig& config, const SpectralDecomposition& spectrum,
                 const IsingHamiltonian& h_final, const QuantumState& state) {
  Analysis a;
  a.probabilities = eigenstate_probabilities(state, spectrum);
  a.diabatic = diabatic_moments(state, h_final);
  const auto gs = spectrum.ground_sector_indices();
  for (int n : gs) a.sector_population += a.probabilities[n];

  const auto energies = ensemble_energies(spectrum, config.ensemble);
  const bool restricted = config.ensemble == Ensemble::GroundSector;
  for (FitMethod m : config.fits) {
    FitOutcome out;
    out.method = m;
    try {
      switch (m) {
        case FitMethod::Average:
          out.fit = fit_beta_average(energies, a.diabatic.mean, restricted);
          break;
        case FitMethod::Fluctuation:
          out.fit = fit_beta_fluctuation(energies, a.diabatic.variance, restricted);
          break;
        case FitMethod::Ratio:
          if (gs.size() < 2) throw NumericalError("ground sector holds a single state");
          out.fit = fit_beta_ratio(a.probabilities[gs[0]], a.probabilities[gs[1]],
                                   spectrum.energies[gs[1]] - spectrum.energies[gs[0]]);
          break;
      }
    } catch (const NumericalError& e) {
      out.error = e.what();
    }
    a.fits.push_back(out);
  }

  const bool staggered = config.sign == CouplingSign::Antiferro;
  const auto grid = wavenumber_grid(config.k_points);
  const EnsembleView dia = EnsembleView::pure(state);
  a.binder_dia = binder_cumulant(dia, staggered);
  a.structure_dia = structure_factor(dia, grid);

  if (const FitOutcome* f = a.find(config.observable_fit); f && f->fit) {
    a.observable_fit = f->fit;
    if (f->fit->usable()) {
      const auto w = thermal_weights(spectrum, f->fit->beta, config.ensemble);
      const EnsembleView therm = EnsembleView::thermal(spectrum, w);
      a.binder_therm = binder_cumulant(therm, staggered);
      a.structure_therm = structure_factor(therm, grid);
      a.cv_dia = specific_heat(a.diabatic, *f->fit);
      a.cv_therm = thermal_specific_heat(energies, *f->fit);
    }
  }
  a.two_temperature = two_temperature_fit(spectrum, a.probabilities);

  std::vector<double> temps;
  for (const auto& f : a.fits)
    if (f.fit && f.fit->usable()) temps.push_back(f.fit->temperature);
  if (temps.size() >= 2 && temps.size() == a.fits.size()) {
    double mean = 0;
    for (double t : temps) mean += t;
    mean /= static_cast<double>(temps.size());
    double spread = 0;
    for (double ti : temps)
      for (double tj : temps) spread = std::max(spread, std::abs(ti - tj) / mean);
    a.temperature_spread = spread;
  }
  return a;
}

GateMetrics gate_metrics(const Analysis& a) {
  GateMetrics m;
  m.p0 = a.probabilities[0];
  m.g_bar = a.binder_dia.g_bar;
  const auto& s = a.structure_dia;
  m.s_zero = s.s[s.index_of(0.0)];
  m.s_pi = s.s[s.index_of(std::numbers::pi)];
  m.cv = a.cv_dia;
  return m;
}

double max_change(const GateMetrics& a, const GateMetrics& b) {
  double d = std::max({std::abs(a.p0 - b.p0), std::abs(a.g_bar - b.g_bar),
                       std::abs(a.s_zero - b.s_zero), std::abs(a.s_pi - b.s_pi)});
  if (a.cv.has_value() != b.cv.has_value()) return std::numeric_limits<double>::infinity();
  if (a.cv) d = std::max(d, std::abs(*a.cv - *b.cv));
  return d;
}

TrapStage run_trap_stage(const RunConfig& config) {
  TrapStage out;
  out.trap = config.trap_spec();
  if (config.alpha_target) {
    out.tuning = tune_axial_for_alpha(out.trap, *config.alpha_target);
    out.trap.omega_axial = out.tuning->omega_axial;
  }
  out.couplings = couplings_for_trap(out.trap, config.sign).couplings;
  return out;
}

RampSchedule make_schedule(const RunConfig& config, double j0) {
  if (!config.t_f_ms) return RampSchedule::protocol(j0, config.b0_over_j0, config.j0_tau,
                                                    config.t_f_over_tau);
  RampSchedule r;
  r.b0 = config.b0_over_j0 * j0;
  r.t_final = *config.t_f_ms * kSecondsPerMs;
  r.tau = r.t_final > 0 ? r.t_final / config.t_f_over_tau : config.j0_tau / j0;
  r.validate();
  return r;
}

ResultBundle run_experiment(const RunConfig& config, SpectrumCache* cache, const LogFn& log) {
  auto note = [&](const std::string& m) {
    if (log) log(m);
  };
  ResultBundle b;
  b.config = config;
  b.config_hash = config.hash();

  const TrapStage trap = run_trap_stage(config);
  b.trap = trap.trap;
  b.tuning = trap.tuning;
  b.couplings = trap.couplings;
  note("couplings: omega_z = " + fmt(b.trap.omega_axial) + " Hz, alpha = " +
       fmt(b.couplings.fit.alpha) + ", J0 = " + fmt(b.couplings.j0_nn) + " Hz");

  b.schedule = make_schedule(config, b.couplings.j0_nn);
  const IsingHamiltonian h = build_hamiltonian(b.couplings, b.schedule.b0);
  b.b_final = b.schedule.field(b.schedule.t_final);
  const IsingHamiltonian h_final = h.with_field(b.b_final);
  b.spectrum = cache ? cache->get(h_final, b.couplings)
                     : std::make_shared<const SpectralDecomposition>(diagonalize_with_symmetries(h_final));
  note("spectrum: " + std::to_string(b.spectrum->size()) + " states, ground sector " +
       b.spectrum->ground_sector.label());

  const SpinBasis basis(config.n_ions);
  const auto reflect = spatial_reflection_operator(basis);
  const auto flip = spin_parity_operator(basis);
  const SymmetrySector sector = b.spectrum->ground_sector;

  std::size_t steps = 0;
  if (b.schedule.t_final > 0) {
    const double target_dt = b.schedule.tau / config.steps_per_tau;
    steps = static_cast<std::size_t>(std::ceil(b.schedule.t_final / target_dt - 1e-9));
  }

  struct Stage {
    Trajectory traj;
    Analysis analysis;
    double leakage = 0.0;
  };
  auto run_stage = [&](std::size_t n_steps) {
    Stage st;
    EvolveOptions opt;
    opt.dt = n_steps > 0 ? b.schedule.t_final / static_cast<double>(n_steps) : 0.0;
    opt.solver.tolerance = config.solver_tol;
    opt.solver.phase_rate = config.phase_rate;
    for (int k = 0; k <= config.samples; ++k)
      opt.sample_times.push_back(b.schedule.t_final * k / config.samples);
    const Observer observer = [&](double, const QuantumState& s) {
      st.leakage = std::max(st.leakage, sector_leakage(s, reflect, flip, sector));
    };
    st.traj = evolve(initial_state(basis), h, b.schedule, opt, observer);
    st.analysis = analyze(config, *b.spectrum, h_final, st.traj.final_state);
    return st;
  };

  Stage current = run_stage(steps);
  b.convergence.dts.push_back(current.traj.dt);
  if (config.check_convergence && steps > 0) {
    b.convergence.checked = true;
    for (int halving = 1; halving <= config.max_halvings; ++halving) {
      Stage finer = run_stage(steps << halving);
      const double change = max_change(gate_metrics(current.analysis), gate_metrics(finer.analysis));
      b.convergence.dts.push_back(finer.traj.dt);
      b.convergence.changes.push_back(change);
      note("dt gate: dt = " + fmt(finer.traj.dt) + " s, change = " + fmt(change));
      current = std::move(finer);
      if (change < config.convergence_tol) {
        b.convergence.passed = true;
        break;
      }
    }
    if (!b.convergence.passed) {
      std::ostringstream msg;
      msg << "time step did not converge after " << config.max_halvings
          << " halvings (last change " << b.convergence.changes.back() << ")";
      throw NumericalError(msg.str());
    }
  }

  b.final_state = current.traj.final_state;
  b.dt = current.traj.dt;
  b.steps = current.traj.steps;
  b.max_solver_residual = current.traj.max_residual;
  b.max_solver_iterations = current.traj.max_iterations;
  b.max_norm_drift = current.traj.max_norm_drift;
  b.max_sector_leakage = current.leakage;
  b.analysis = std::move(current.analysis);
  return b;
}

void write_bundle(const ResultBundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  fs::remove(dir / "INCOMPLETE");
  const std::string& hash = b.config_hash;
  const Analysis& a = b.analysis;
  const SpectralDecomposition& s = *b.spectrum;
  const std::string tf_ms = fmt(b.schedule.t_final / kSecondsPerMs);
  const std::string sign = to_string(b.config.sign);

  write_text_file(dir / "config.txt", "# config_hash = " + hash + "\n" + b.config.canonical_text());
  {
    std::ofstream out(dir / "couplings.csv");
    write_couplings_csv(out, b.couplings, hash);
  }
  {
    std::ofstream out(dir / "spectrum.csv");
    write_spectrum_csv(out, s, a.probabilities, hash);
  }
  {
    std::ofstream out(dir / "fig1_populations.csv");
    CsvWriter w(out,
                {"n", "E_minus_E0_khz", "P_dia", "P_therm_average", "P_therm_fluctuation",
                 "P_therm_ratio", "sector"},
                hash);
    const auto gs = s.ground_sector_indices();
    std::vector<double> gs_energies;
    for (int n : gs) gs_energies.push_back(s.energies[n]);
    std::vector<std::optional<std::vector<double>>> curves;
    for (FitMethod m : {FitMethod::Average, FitMethod::Fluctuation, FitMethod::Ratio}) {
      const FitOutcome* f = a.find(m);
      if (f && f->fit)
        curves.emplace_back(thermal_distribution(gs_energies, f->fit->beta).probabilities);
      else
        curves.emplace_back();
    }
    for (std::size_t k = 0; k < gs.size(); ++k) {
      const int n = gs[k];
      std::vector<std::string> row{std::to_string(n), fmt((s.energies[n] - s.energies[0]) / kHzPerKhz),
                                   fmt(a.probabilities[n])};
      for (const auto& c : curves) row.push_back(c ? fmt((*c)[k]) : "");
      row.push_back(s.sectors[n].label());
      w.row(row);
    }
  }
  {
    std::ofstream out(dir / "fig2_binder.csv");
    CsvWriter w(out, {"t_f_ms", "sign", "g_bar_dia", "g_bar_therm"}, hash);
    w.row({tf_ms, sign, a.binder_dia.defined ? fmt(a.binder_dia.g_bar) : "",
           a.binder_therm && a.binder_therm->defined ? fmt(a.binder_therm->g_bar) : ""});
  }
  {
    std::ofstream out(dir / "fig3_structure.csv");
    CsvWriter w(out, {"k", "S_dia", "S_therm"}, hash);
    for (std::size_t j = 0; j < a.structure_dia.k.size(); ++j)
      w.row({fmt(a.structure_dia.k[j]), fmt(a.structure_dia.s[j]),
             a.structure_therm ? fmt(a.structure_therm->s[j]) : ""});
  }
  {
    std::ofstream out(dir / "fig4_specific_heat.csv");
    CsvWriter w(out, {"t_f_ms", "N", "sign", "Cv_dia", "Cv_therm", "T_eff_khz"}, hash);
    std::string t_eff;
    if (a.observable_fit && a.observable_fit->usable())
      t_eff = fmt(a.observable_fit->temperature / kHzPerKhz);
    w.row({tf_ms, std::to_string(b.config.n_ions), sign, fmt(a.cv_dia), fmt(a.cv_therm), t_eff});
  }
  {
    std::ofstream out(dir / "state.bin", std::ios::binary);
    write_state_snapshot(out, b.final_state, b.config.n_ions, b.config.hash_value());
  }
  // Written last: its presence with status = complete marks a finished bundle.
  write_text_file(dir / "summary.txt", summary_text(b));
}

void write_failure(const fs::path& dir, const RunConfig* config, const std::string& stage_error) {
  fs::create_directories(dir);
  std::string text = "schema_version = " + std::to_string(kSchemaVersion) + "\nstatus = failed\n";
  if (config) {
    text += "config_hash = " + config->hash() + "\n";
    write_text_file(dir / "config.txt", "# config_hash = " + config->hash() + "\n" +
                                            config->canonical_text());
  }
  std::string oneline = stage_error;
  std::replace(oneline.begin(), oneline.end(), '\n', ' ');
  text += "error = " + oneline + "\n";
  write_text_file(dir / "summary.txt", text);
  write_text_file(dir / "INCOMPLETE", oneline + "\n");
}

std::vector<std::string> validate_bundle(const fs::path& dir) {
  std::vector<std::string> problems;
  std::map<std::string, std::string> summary;
  try {
    summary = read_summary(dir);
  } catch (const Error& e) {
    return {e.what()};
  }
  if (fs::exists(dir / "INCOMPLETE")) problems.push_back("INCOMPLETE marker present");
  if (summary["status"] != "complete") problems.push_back("status is not complete");
  if (summary["schema_version"] != std::to_string(kSchemaVersion))
    problems.push_back("schema_version mismatch: '" + summary["schema_version"] + "'");
  const std::string hash = summary["config_hash"];
  if (hash.empty()) {
    problems.push_back("summary.txt lacks config_hash");
    return problems;
  }
  std::optional<RunConfig> cfg;
  try {
    cfg = load_config(dir / "config.txt");
    if (cfg->hash() != hash) problems.push_back("config.txt hash differs from summary");
  } catch (const Error& e) {
    problems.push_back(std::string("config.txt: ") + e.what());
  }
  for (const char* name : kBundleTables) {
    try {
      const CsvTable t = read_csv_file(dir / name);
      const int col = t.column("config_hash");
      if (col < 0) {
        problems.push_back(std::string(name) + " lacks a config_hash column");
        continue;
      }
      for (const auto& row : t.rows)
        if (row.at(col) != hash) {
          problems.push_back(std::string(name) + " has a foreign config_hash");
          break;
        }
    } catch (const Error& e) {
      problems.push_back(std::string(name) + ": " + e.what());
    }
  }
  try {
    std::ifstream in(dir / "state.bin", std::ios::binary);
    if (!in) throw ConfigError("missing");
    const Snapshot snap = read_state_snapshot(in);
    if (snap.config_hash != std::stoull(hash, nullptr, 16))
      problems.push_back("state.bin config hash differs from summary");
    if (cfg && snap.n_spins != cfg->n_ions) problems.push_back("state.bin spin count differs");
  } catch (const Error& e) {
    problems.push_back(std::string("state.bin: ") + e.what());
  }
  return problems;
}

ResultBundle replay(const fs::path& dir, const LogFn& log) {
  const auto summary = read_summary(dir);
  if (summary.count("status") == 0 || summary.at("status") != "complete")
    throw ConfigError("bundle is incomplete: " + dir.string());
  const RunConfig config = load_config(dir / "config.txt");
  if (config.hash() != summary.at("config_hash"))
    throw ConfigError("config.txt does not match the bundle's config hash");

  ResultBundle b;
  b.config = config;
  b.config_hash = config.hash();
  b.replayed = true;
  const TrapStage trap = run_trap_stage(config);
  b.trap = trap.trap;
  b.tuning = trap.tuning;
  b.couplings = trap.couplings;
  {
    std::ifstream in(dir / "couplings.csv");
    if (!in) throw ConfigError("bundle has no couplings.csv");
    const Eigen::MatrixXd stored = read_couplings_csv(in);
    if (stored.rows() != b.couplings.values.rows() || stored != b.couplings.values)
      throw ConfigError("stored couplings differ from the recomputed trap stage");
  }
  {
    std::ifstream in(dir / "state.bin", std::ios::binary);
    if (!in) throw ConfigError("bundle has no state.bin");
    Snapshot snap = read_state_snapshot(in);
    if (snap.config_hash != config.hash_value())
      throw ConfigError("state.bin belongs to a different config");
    if (snap.n_spins != config.n_ions) throw ConfigError("state.bin spin count differs");
    b.final_state = std::move(snap.state);
  }
  b.schedule = make_schedule(config, b.couplings.j0_nn);
  b.b_final = b.schedule.field(b.schedule.t_final);
  const IsingHamiltonian h_final = build_hamiltonian(b.couplings, b.b_final);
  b.spectrum = std::make_shared<const SpectralDecomposition>(diagonalize_with_symmetries(h_final));
  if (log) log("replay: re-diagonalized " + std::to_string(b.spectrum->size()) + " states");

  b.dt = summary_number(summary, "dt_s");
  b.steps = static_cast<std::size_t>(summary_number(summary, "steps"));
  b.max_solver_residual = summary_number(summary, "max_solver_residual");
  b.max_solver_iterations = static_cast<int>(summary_number(summary, "max_solver_iterations"));
  b.max_norm_drift = summary_number(summary, "max_norm_drift");
  b.max_sector_leakage = summary_number(summary, "max_sector_leakage");
  b.analysis = analyze(config, *b.spectrum, h_final, b.final_state);
  return b;
}

std::vector<std::map<std::string, std::string>> expand_grid(
    const std::map<std::string, std::string>& grid) {
  std::size_t max_points = 512;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [key, value] : grid) {
    if (key == "sweep.max_points") {
      max_points = static_cast<std::size_t>(std::stoul(value));
      continue;
    }
    std::vector<std::string> items;
    std::stringstream list(value);
    for (std::string item; std::getline(list, item, ',');) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b == std::string::npos) throw ConfigError("grid key '" + key + "' has an empty value");
      items.push_back(item.substr(b, e - b + 1));
    }
    if (items.empty()) throw ConfigError("grid key '" + key + "' has no values");
    axes.emplace_back(key, std::move(items));
  }
  std::size_t total = 1;
  for (const auto& ax : axes) {
    total *= ax.second.size();
    if (total > max_points)
      throw ConfigError("grid has more than sweep.max_points = " + std::to_string(max_points) +
                        " points");
  }
  std::vector<std::map<std::string, std::string>> points;
  for (std::size_t p = 0; p < total; ++p) {
    std::map<std::string, std::string> point;
    std::size_t rest = p;
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      point[it->first] = it->second[rest % it->second.size()];
      rest /= it->second.size();
    }
    points.push_back(std::move(point));
  }
  return points;
}

std::vector<std::map<std::string, std::string>> read_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path.string());
  return expand_grid(parse_key_values(in, path.string()));
}

std::size_t SweepResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const auto& p) { return !p.ok; }));
}

int default_workers() {
  if (const char* env = std::getenv("IONSIM_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("IONSIM_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult run_sweep(const RunConfig& base, const std::vector<std::map<std::string, std::string>>& grid,
                      const fs::path& out, int workers, const LogFn& log) {
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  fs::create_directories(out);
  SweepResult result;
  result.points.resize(grid.size());
  SpectrumCache cache;
  std::mutex log_mutex;
  auto note = [&](const std::string& m) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(m);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      SweepPointResult& r = result.points[i];
      r.index = i;
      r.overrides = grid[i];
      char name[32];
      std::snprintf(name, sizeof name, "point_%04zu", i);
      r.directory = name;
      const fs::path dir = out / name;
      std::optional<RunConfig> cfg;
      try {
        cfg = with_values(base, grid[i]);
        const ResultBundle b = run_experiment(*cfg, &cache);
        write_bundle(b, dir);
        r.ok = true;
        note(std::string(name) + ": done");
      } catch (const ConfigError& e) {
        r.error_kind = 2;
        r.error = e.what();
      } catch (const NumericalError& e) {
        r.error_kind = 3;
        r.error = e.what();
      } catch (const std::exception& e) {
        r.error_kind = 1;
        r.error = e.what();
      }
      if (!r.ok) {
        note(std::string(name) + ": failed: " + r.error);
        try {
          write_failure(dir, cfg ? &*cfg : nullptr, r.error);
        } catch (const std::exception&) {
        }
      }
    }
  };
  const int n_threads = std::min<int>(workers, std::max<std::size_t>(grid.size(), 1));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  {
    std::ofstream idx(out / "sweep_index.csv");
    CsvWriter w(idx, {"point", "directory", "status", "overrides", "error"});
    for (const auto& p : result.points) {
      std::string ov;
      for (const auto& [k, v] : p.overrides) ov += (ov.empty() ? "" : ";") + k + "=" + v;
      w.row({std::to_string(p.index), p.directory, p.ok ? "ok" : "failed", ov, p.error});
    }
  }
  for (const char* name : {"fig1_populations.csv", "fig2_binder.csv", "fig3_structure.csv",
                           "fig4_specific_heat.csv"})
    merge_tables(result, out, name);
  return result;
}

void merge_tables(const SweepResult& sweep, const fs::path& out, const std::string& file_name) {
  const std::vector<std::string> prefix{"point", "N", "sign", "alpha_target", "alpha_fit",
                                        "t_f_ms"};
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : sweep.points) {
    if (!p.ok) continue;
    const fs::path dir = out / p.directory;
    const auto summary = read_summary(dir);
    const auto it = summary.find("schema_version");
    if (it == summary.end() || it->second != std::to_string(kSchemaVersion))
      throw ConfigError("schema version mismatch in " + dir.string());
    const CsvTable t = read_csv_file(dir / file_name);
    std::vector<int> keep;
    std::vector<std::string> cols = prefix;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (std::find(prefix.begin(), prefix.end(), t.header[c]) != prefix.end()) continue;
      keep.push_back(static_cast<int>(c));
      cols.push_back(t.header[c]);
    }
    if (header.empty())
      header = cols;
    else if (header != cols)
      throw ConfigError("column layout of " + file_name + " differs between points");
    const std::vector<std::string> id{std::to_string(p.index), summary.at("n_ions"),
                                      summary.at("sign"), summary.at("alpha_target"),
                                      summary.at("alpha_fit"), summary.at("t_f_ms")};
    for (const auto& row : t.rows) {
      std::vector<std::string> merged = id;
      for (int c : keep) merged.push_back(row.at(c));
      rows.push_back(std::move(merged));
    }
  }
  if (header.empty()) return;
  std::ofstream f(out / file_name);
  CsvWriter w(f, header);
  for (const auto& r : rows) w.row(r);
}

}  // namespace ionsim
