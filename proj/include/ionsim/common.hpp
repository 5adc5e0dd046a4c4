#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace ionsim {

using cplx = std::complex<double>;

// All energies, couplings and fields are carried in conventional frequency
// units (Hz) and times in seconds. With hbar = 1 a state accrues a phase of
// kPhaseRate * E * t radians. The default treats the Hz-valued energies
// directly as inverse time (so J0 = 1 kHz and tau = 0.5 ms give J0*tau = 1/2);
// kTwoPiPhaseRate is the alternative where E is a cycle frequency.
inline constexpr double kPhaseRate = 1.0;
inline constexpr double kTwoPiPhaseRate = 6.283185307179586476925286766559;

inline constexpr double kHzPerKhz = 1e3;
inline constexpr double kSecondsPerMs = 1e-3;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: trap specs, configs, grid files, malformed files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to reach its contract (non-convergence,
/// instability, resonance).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ionsim
