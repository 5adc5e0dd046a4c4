#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ionsim/couplings.hpp"

using namespace ionsim;

namespace {

TrapSpec spec_for(int n, double omega_axial = 775e3) {
  TrapSpec s;
  s.n_ions = n;
  s.omega_axial = omega_axial;
  return s;
}

IonChain uniform_chain(int n) {
  IonChain c;
  for (int i = 0; i < n; ++i) c.positions.push_back(i - 0.5 * (n - 1));
  c.length_scale = 1.0;
  c.positions_physical = c.positions;
  c.mean_spacing = 1.0;
  return c;
}

}  // namespace

TEST_CASE("detuning from the COM mode") {
  const TrapSpec s = spec_for(10);
  CHECK(detuning_from_com(s) / s.omega_transverse == doctest::Approx(1.0233).epsilon(1e-4));

  TrapSpec weak_drive = s;
  weak_drive.rabi = 1e-3;
  CHECK(detuning_from_com(weak_drive) == doctest::Approx(s.omega_transverse).epsilon(1e-9));

  TrapSpec t;
  t.n_ions = 2;
  t.omega_transverse = 5e6;
  t.omega_axial = 1e6;
  t.recoil = 0.01 * 5e6;  // eta = 0.1
  t.rabi = 1e6;
  CHECK(detuning_from_com(t) == doctest::Approx(5.3e6).epsilon(1e-12));
}

TEST_CASE("two-ion exchange matches the analytic mode sum") {
  const TrapSpec s = spec_for(2);
  const TrapCouplings tc = couplings_for_trap(s);
  const double mu = detuning_from_com(s);
  const double wt2 = s.omega_transverse * s.omega_transverse;
  const double wz2 = s.omega_axial * s.omega_axial;
  const double expected =
      s.rabi * s.rabi * s.recoil * (0.5 / (mu * mu - wt2) - 0.5 / (mu * mu - wt2 + wz2));
  CHECK(tc.couplings.values(0, 1) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(tc.couplings.values(1, 0) == tc.couplings.values(0, 1));
}

TEST_CASE("single ion has no couplings") {
  const TrapCouplings tc = couplings_for_trap(spec_for(1));
  CHECK(tc.couplings.values.rows() == 1);
  CHECK(tc.couplings.values(0, 0) == 0.0);
}

TEST_CASE("coupling matrix invariants across the operating band") {
  for (int n : {4, 6, 8, 10, 12}) {
    for (double wz : {620e3, 775e3, 900e3}) {
      if (n == 12 && wz >= 900e3) continue;
      CAPTURE(n);
      CAPTURE(wz);
      const CouplingMatrix j = couplings_for_trap(spec_for(n, wz)).couplings;
      for (int a = 0; a < n; ++a) {
        CHECK(j.values(a, a) == 0.0);
        for (int b = 0; b < n; ++b) {
          CHECK(j.values(a, b) == j.values(b, a));
          const double mirrored = j.values(n - 1 - a, n - 1 - b);
          CHECK(std::abs(j.values(a, b) - mirrored) <= 1e-10 * std::abs(j.values(a, b)));
          if (a != b) CHECK(j.values(a, b) > 0);
        }
      }
    }
  }
}

TEST_CASE("AFM is the negated FM matrix") {
  const TrapSpec s = spec_for(8);
  const CouplingMatrix fm = couplings_for_trap(s, CouplingSign::Ferro).couplings;
  const CouplingMatrix afm = couplings_for_trap(s, CouplingSign::Antiferro).couplings;
  CHECK((fm.values + afm.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fm.j0_nn == afm.j0_nn);
  CHECK(fm.j0_nn > 0);
  CHECK(afm.sign == CouplingSign::Antiferro);
  CHECK(parse_coupling_sign("afm") == CouplingSign::Antiferro);
  CHECK(to_string(CouplingSign::Ferro) == "fm");
  CHECK_THROWS_AS(parse_coupling_sign("up"), ConfigError);
}

TEST_CASE("standard axial band gives alpha and J0 in range") {
  for (double wz = 620e3; wz <= 950e3 + 1; wz += 55e3) {
    CAPTURE(wz);
    const CouplingMatrix j = couplings_for_trap(spec_for(10, wz)).couplings;
    CHECK(j.fit.alpha >= 0.6);
    CHECK(j.fit.alpha <= 1.3);
    CHECK(j.j0_nn > 1e3 / 3);
    CHECK(j.j0_nn < 3e3);
  }
}

TEST_CASE("fits recover synthetic power laws") {
  const int n = 9;
  CouplingMatrix c;
  c.values = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) c.values(a, b) = 2.5 / std::pow(std::abs(a - b), 1.3);
  const PowerLawFit f = fit_power_law(c, uniform_chain(n));
  CHECK(f.alpha == doctest::Approx(1.3).epsilon(1e-10));
  CHECK(f.j0 == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(f.residual < 1e-10);
  CHECK(fit_power_law_index(c).alpha == doctest::Approx(1.3).epsilon(1e-10));

  c.values.setConstant(4.0);
  c.values.diagonal().setZero();
  CHECK(std::abs(fit_power_law(c, uniform_chain(n)).alpha) < 1e-12);
}

TEST_CASE("zero couplings are excluded from the fit") {
  const int n = 5;
  CouplingMatrix c;
  c.values = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) c.values(a, b) = 1.0 / std::abs(a - b);
  c.values(0, 4) = c.values(4, 0) = 0.0;
  const PowerLawFit f = fit_power_law_index(c);
  CHECK(f.pairs_excluded == 1);
  CHECK(f.pairs_used == 9);
  CHECK(f.alpha == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fits need at least three ions") {
  CouplingMatrix c;
  c.values = Eigen::MatrixXd::Ones(2, 2);
  c.values.diagonal().setZero();
  CHECK_THROWS_AS(fit_power_law_index(c), ConfigError);
}

TEST_CASE("resonant detuning is rejected") {
  const TrapSpec s = spec_for(4);
  const IonChain chain = solve_equilibrium_positions(s);
  const TransverseModes modes = transverse_normal_modes(s, chain);
  CHECK_THROWS_AS(compute_couplings(modes, s, s.omega_transverse), NumericalError);
  CHECK_THROWS_AS(compute_couplings(modes, s, modes.frequencies[2] * (1 + 1e-8)), NumericalError);
}

TEST_CASE("fitted alpha is strictly monotone in the axial frequency") {
  // alpha falls as the axial trap stiffens (longer-range couplings).
  double previous = INFINITY;
  for (double wz = 500e3; wz <= 950e3; wz += 15e3) {
    const double alpha = couplings_for_trap(spec_for(10, wz)).couplings.fit.alpha;
    CHECK(alpha < previous);
    previous = alpha;
  }
}

TEST_CASE("axial tuning round trips") {
  const TrapSpec s = spec_for(10);
  const AxialTuning t = tune_axial_for_alpha(s, 1.0);
  TrapSpec tuned = s;
  tuned.omega_axial = t.omega_axial;
  const double refit = couplings_for_trap(tuned).couplings.fit.alpha;
  CHECK(std::abs(refit - 1.0) <= 1e-3);
  CHECK(t.omega_axial > 620e3);
  CHECK(t.omega_axial < 950e3);

  const double alpha620 = couplings_for_trap(spec_for(10, 620e3)).couplings.fit.alpha;
  const AxialTuning back = tune_axial_for_alpha(s, alpha620);
  CHECK(std::abs(back.omega_axial - 620e3) < 3e3);
}

TEST_CASE("unreachable alpha targets are reported") {
  CHECK_THROWS_AS(tune_axial_for_alpha(spec_for(10), 0.3), ConfigError);
  CHECK_THROWS_AS(tune_axial_for_alpha(spec_for(10), 2.5), ConfigError);
  // Within the bracket but beyond what the stable chain can reach.
  CHECK_THROWS_AS(tune_axial_for_alpha(spec_for(12), 0.5), ConfigError);
}

TEST_CASE("max stable axial frequency separates linear and zigzag chains") {
  const double wmax = max_stable_axial(spec_for(12));
  TrapSpec below = spec_for(12, 0.99 * wmax);
  CHECK_NOTHROW(transverse_normal_modes(below, solve_equilibrium_positions(below)));
  TrapSpec above = spec_for(12, 1.01 * wmax);
  CHECK_THROWS_AS(transverse_normal_modes(above, solve_equilibrium_positions(above)),
                  NumericalError);
}

TEST_CASE("coupling CSV round trip") {
  const CouplingMatrix j = couplings_for_trap(spec_for(6)).couplings;
  std::stringstream io;
  write_couplings_csv(io, j, "abc");
  const Eigen::MatrixXd back = read_couplings_csv(io);
  CHECK(back == j.values);
  std::stringstream first;
  write_couplings_csv(first, j);
  std::string header;
  std::getline(first, header);
  CHECK(header == "i,j,J_hz");
}
