#pragma once

#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ionsim/config.hpp"
#include "ionsim/couplings.hpp"
#include "ionsim/evolve.hpp"
#include "ionsim/obs.hpp"
#include "ionsim/spin.hpp"
#include "ionsim/thermo.hpp"

namespace ionsim {

inline constexpr int kSchemaVersion = 1;

/// Thread-safe memo of diagonalizations keyed by the final Hamiltonian, so
/// sweep points differing only in t_f share one spectrum.
class SpectrumCache {
 public:
  using Ptr = std::shared_ptr<const SpectralDecomposition>;
  Ptr get(const IsingHamiltonian& h, const CouplingMatrix& couplings);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<Ptr>> entries_;
};

struct FitOutcome {
  FitMethod method = FitMethod::Average;
  std::optional<ThermalFit> fit;
  std::string error;  // set when the fit threw
};

/// Everything derived from a final state and the final spectrum.
struct Analysis {
  std::vector<double> probabilities;  // P_n over the full spectrum
  double sector_population = 0.0;     // sum of P_n in the ground sector
  EnergyMoments diabatic;
  std::vector<FitOutcome> fits;
  std::optional<ThermalFit> observable_fit;
  BinderResult binder_dia;
  std::optional<BinderResult> binder_therm;
  StructureFactorResult structure_dia;
  std::optional<StructureFactorResult> structure_therm;
  std::optional<double> cv_dia;
  std::optional<double> cv_therm;
  TwoTemperatureFit two_temperature;
  std::optional<double> temperature_spread;  // max |T_i - T_j| / mean T over usable fits

  const FitOutcome* find(FitMethod method) const;
};

Analysis analyze(const RunConfig& config, const SpectralDecomposition& spectrum,
                 const IsingHamiltonian& h_final, const QuantumState& state);

/// Quantities compared by the time-step convergence gate.
struct GateMetrics {
  double p0 = 0.0;
  double g_bar = 0.0;
  double s_zero = 0.0;
  double s_pi = 0.0;
  std::optional<double> cv;
};

GateMetrics gate_metrics(const Analysis& analysis);
/// Largest absolute difference; infinite when C_v is defined in only one.
double max_change(const GateMetrics& a, const GateMetrics& b);

struct ConvergenceReport {
  bool checked = false;
  bool passed = false;
  std::vector<double> dts;
  std::vector<double> changes;  // between successive dts
};

struct ResultBundle {
  RunConfig config;
  std::string config_hash;
  TrapSpec trap;
  std::optional<AxialTuning> tuning;
  CouplingMatrix couplings;
  RampSchedule schedule;
  double b_final = 0.0;
  std::shared_ptr<const SpectralDecomposition> spectrum;
  QuantumState final_state;

  double dt = 0.0;
  std::size_t steps = 0;
  double max_solver_residual = 0.0;
  int max_solver_iterations = 0;
  double max_norm_drift = 0.0;
  double max_sector_leakage = 0.0;
  ConvergenceReport convergence;
  bool replayed = false;

  Analysis analysis;
};

/// Trap stage only: tuned spec plus couplings.
struct TrapStage {
  TrapSpec trap;
  std::optional<AxialTuning> tuning;
  CouplingMatrix couplings;
};
TrapStage run_trap_stage(const RunConfig& config);

/// b0 = b0_over_j0 J0; tau = j0_tau / J0 unless t_f is given, in which case
/// tau = t_f / t_f_over_tau.
RampSchedule make_schedule(const RunConfig& config, double j0);

using LogFn = std::function<void(const std::string&)>;

/// trap -> couplings -> diagonalize -> evolve (with the dt gate) -> fits ->
/// observables. Throws ConfigError / NumericalError from the failing stage.
ResultBundle run_experiment(const RunConfig& config, SpectrumCache* cache = nullptr,
                            const LogFn& log = {});

/// Writes config.txt, summary.txt, couplings.csv, spectrum.csv, the four
/// figure tables and state.bin into dir (created if needed).
void write_bundle(const ResultBundle& bundle, const std::filesystem::path& dir);

/// Partial-bundle marker: summary.txt with status = failed plus INCOMPLETE.
void write_failure(const std::filesystem::path& dir, const RunConfig* config,
                   const std::string& stage_error);

/// Empty when the bundle is complete and every file carries the config hash.
std::vector<std::string> validate_bundle(const std::filesystem::path& dir);

/// Recomputes the analysis from a bundle's stored config, couplings and
/// final state snapshot.
ResultBundle replay(const std::filesystem::path& bundle_dir, const LogFn& log = {});

/// Grid file: "key = v1, v2, ..." per line; the cartesian product is taken in
/// sorted key order with the last key varying fastest. sweep.max_points
/// (default 512) bounds the size.
std::vector<std::map<std::string, std::string>> expand_grid(
    const std::map<std::string, std::string>& grid);
std::vector<std::map<std::string, std::string>> read_grid(const std::filesystem::path& path);

struct SweepPointResult {
  std::size_t index = 0;
  std::map<std::string, std::string> overrides;
  std::string directory;
  bool ok = false;
  int error_kind = 0;  // 2 config, 3 numerical, 1 other
  std::string error;
};

struct SweepResult {
  std::vector<SweepPointResult> points;
  std::size_t failures() const;
};

/// Worker count from IONSIM_WORKERS, else the hardware concurrency.
int default_workers();

SweepResult run_sweep(const RunConfig& base, const std::vector<std::map<std::string, std::string>>& grid,
                      const std::filesystem::path& out, int workers, const LogFn& log = {});

/// Concatenates one bundle table across successful points, prefixing the
/// point id columns. Throws ConfigError on a schema version mismatch.
void merge_tables(const SweepResult& sweep, const std::filesystem::path& out,
                  const std::string& file_name);

}  // namespace ionsim
