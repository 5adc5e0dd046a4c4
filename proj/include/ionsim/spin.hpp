#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ionsim/common.hpp"
#include "ionsim/couplings.hpp"

namespace ionsim {

inline constexpr int kMaxSpins = 14;

/// Computational basis of N spin-1/2 sites. Bit i (least significant = 0) of
/// a basis index is site i+1; bit 0 means sigma_z = +1, bit 1 means -1.
struct SpinBasis {
  int n_spins = 0;

  explicit SpinBasis(int n, int max_spins = kMaxSpins);

  std::size_t dimension() const { return std::size_t{1} << n_spins; }
  std::size_t all_ones() const { return dimension() - 1; }

  static int sigma_z(std::size_t state, int site) { return ((state >> site) & 1U) ? -1 : 1; }

  /// Site i -> N+1-i (bit-order reversal).
  std::size_t reflect(std::size_t state) const;
  /// Global spin flip (bit complement).
  std::size_t flip(std::size_t state) const { return state ^ all_ones(); }

  /// Number of distinct states in {b, Rb, Xb, RXb}: 1, 2 or 4.
  int orbit_size(std::size_t state) const;
};

/// H = -sum_{i<j} J_ij sz_i sz_j - B sum_i sx_i, applied matrix-free.
class IsingHamiltonian {
 public:
  IsingHamiltonian(const Eigen::MatrixXd& couplings, double b_field, int max_spins = kMaxSpins);

  int n_spins() const { return n_; }
  std::size_t dimension() const { return std::size_t{1} << n_; }
  double b_field() const { return b_; }
  const Eigen::VectorXd& diagonal() const { return *diag_; }

  /// Same Ising part (shared), different transverse field.
  IsingHamiltonian with_field(double b_field) const;

  /// out = H * in. in and out must not alias.
  void apply(std::span<const cplx> in, std::span<cplx> out) const;
  void apply(std::span<const double> in, std::span<double> out) const;
  Eigen::VectorXcd operator*(const Eigen::VectorXcd& v) const;
  Eigen::VectorXd operator*(const Eigen::VectorXd& v) const;

  Eigen::MatrixXd dense() const;

  /// Upper bound on the spectral radius.
  double norm_bound() const;

 private:
  IsingHamiltonian(int n, std::shared_ptr<const Eigen::VectorXd> diag, double b)
      : n_(n), diag_(std::move(diag)), b_(b) {}

  int n_ = 0;
  std::shared_ptr<const Eigen::VectorXd> diag_;
  double b_ = 0.0;
};

IsingHamiltonian build_hamiltonian(const CouplingMatrix& couplings, double b_field);

/// Permutation of computational basis states: P|b> = |image[b]>.
struct BasisPermutation {
  std::vector<std::uint32_t> image;

  template <class Vec>
  Vec apply(const Vec& v) const {
    Vec out(v.size());
    for (std::size_t b = 0; b < image.size(); ++b) out[image[b]] = v[b];
    return out;
  }
  /// <v| P |v> for a real vector.
  double expectation(std::span<const double> v) const;
  bool is_involution() const;
};

BasisPermutation spatial_reflection_operator(const SpinBasis& basis);
BasisPermutation spin_parity_operator(const SpinBasis& basis);

struct SymmetrySector {
  int spatial = +1;
  int spin = +1;

  friend bool operator==(const SymmetrySector&, const SymmetrySector&) = default;
  /// (+,+) = 0, (+,-) = 1, (-,+) = 2, (-,-) = 3.
  int rank() const { return (spatial > 0 ? 0 : 2) + (spin > 0 ? 0 : 1); }
  std::string label() const;
};

/// Dimension of a joint parity eigenspace (character formula).
std::size_t sector_dimension(const SpinBasis& basis, SymmetrySector sector);

/// Full spectrum with parity labels. Energies ascend up to the degeneracy
/// tolerance; inside a near-degenerate cluster states are ordered by sector
/// rank, so the (+,+) member of the ground cluster is n = 0.
struct SpectralDecomposition {
  Eigen::VectorXd energies;
  Eigen::MatrixXd eigenvectors;  // columns |n>, real
  std::vector<SymmetrySector> sectors;
  SymmetrySector ground_sector;
  int n_spins = 0;
  double b_field = 0.0;

  double degeneracy_tolerance = 0.0;  // absolute (Hz) actually used
  double max_parity_residual = 0.0;
  double max_eigen_residual = 0.0;
  std::size_t largest_cluster = 1;

  std::size_t size() const { return static_cast<std::size_t>(energies.size()); }
  std::vector<int> indices_in(SymmetrySector sector) const;
  std::vector<int> ground_sector_indices() const { return indices_in(ground_sector); }
};

struct DiagonalizeOptions {
  double degeneracy_relative = 1e-9;  // of the spectral span
  double parity_tolerance = 1e-8;
  int max_widenings = 4;  // each widens the cluster tolerance 100x
};

SpectralDecomposition diagonalize_with_symmetries(const IsingHamiltonian& h,
                                                  const DiagonalizeOptions& options = {});

/// CSV (n, E_hz, spatial_parity, spin_parity[, P_n]).
void write_spectrum_csv(std::ostream& out, const SpectralDecomposition& spectrum,
                        std::span<const double> probabilities = {},
                        const std::string& config_hash = "");

}  // namespace ionsim
