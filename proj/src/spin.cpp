#include "ionsim/spin.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "ionsim/io.hpp"

namespace ionsim {

SpinBasis::SpinBasis(int n, int max_spins) : n_spins(n) {
  if (n < 1 || n > max_spins)
    throw ConfigError("spin count " + std::to_string(n) + " outside [1, " +
                      std::to_string(max_spins) + "]");
}

std::size_t SpinBasis::reflect(std::size_t state) const {
  std::size_t out = 0;
  for (int i = 0; i < n_spins; ++i)
    if ((state >> i) & 1U) out |= std::size_t{1} << (n_spins - 1 - i);
  return out;
}

int SpinBasis::orbit_size(std::size_t state) const {
  const std::set<std::size_t> orbit{state, reflect(state), flip(state), flip(reflect(state))};
  return static_cast<int>(orbit.size());
}

IsingHamiltonian::IsingHamiltonian(const Eigen::MatrixXd& couplings, double b_field,
                                   int max_spins)
    : n_(static_cast<int>(couplings.rows())), b_(b_field) {
  if (couplings.rows() != couplings.cols()) throw ConfigError("coupling matrix must be square");
  const SpinBasis basis(n_, max_spins);
  if (!std::isfinite(b_field)) throw ConfigError("transverse field must be finite");
  if (!couplings.allFinite()) throw ConfigError("couplings must be finite");
  const double scale = couplings.cwiseAbs().maxCoeff();
  if ((couplings - couplings.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("coupling matrix must be symmetric");

  auto diag = std::make_shared<Eigen::VectorXd>(basis.dimension());
  for (std::size_t b = 0; b < basis.dimension(); ++b) {
    double e = 0;
    for (int i = 0; i < n_; ++i) {
      const int si = SpinBasis::sigma_z(b, i);
      for (int j = i + 1; j < n_; ++j) e -= couplings(i, j) * si * SpinBasis::sigma_z(b, j);
    }
    (*diag)[static_cast<Eigen::Index>(b)] = e;
  }
  diag_ = std::move(diag);
}

IsingHamiltonian IsingHamiltonian::with_field(double b_field) const {
  return IsingHamiltonian(n_, diag_, b_field);
}

namespace {

template <class T>
void apply_impl(int n, const Eigen::VectorXd& diag, double b, std::span<const T> in,
                std::span<T> out) {
  const std::size_t dim = std::size_t{1} << n;
  if (in.size() != dim || out.size() != dim) throw Error("hamiltonian apply: dimension mismatch");
  for (std::size_t s = 0; s < dim; ++s) out[s] = diag[static_cast<Eigen::Index>(s)] * in[s];
  if (b == 0.0) return;
  for (std::size_t s = 0; s < dim; ++s) {
    T acc{};
    for (int i = 0; i < n; ++i) acc += in[s ^ (std::size_t{1} << i)];
    out[s] -= b * acc;
  }
}

}  // namespace

void IsingHamiltonian::apply(std::span<const cplx> in, std::span<cplx> out) const {
  apply_impl<cplx>(n_, *diag_, b_, in, out);
}

void IsingHamiltonian::apply(std::span<const double> in, std::span<double> out) const {
  apply_impl<double>(n_, *diag_, b_, in, out);
}

Eigen::VectorXcd IsingHamiltonian::operator*(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  apply(std::span<const cplx>(v.data(), v.size()), std::span<cplx>(out.data(), out.size()));
  return out;
}

Eigen::VectorXd IsingHamiltonian::operator*(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  apply(std::span<const double>(v.data(), v.size()), std::span<double>(out.data(), out.size()));
  return out;
}

Eigen::MatrixXd IsingHamiltonian::dense() const {
  const auto dim = static_cast<Eigen::Index>(dimension());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  h.diagonal() = *diag_;
  for (Eigen::Index s = 0; s < dim; ++s)
    for (int i = 0; i < n_; ++i) h(s ^ (Eigen::Index{1} << i), s) -= b_;
  return h;
}

double IsingHamiltonian::norm_bound() const {
  return diag_->cwiseAbs().maxCoeff() + n_ * std::abs(b_);
}

IsingHamiltonian build_hamiltonian(const CouplingMatrix& couplings, double b_field) {
  return IsingHamiltonian(couplings.values, b_field);
}

double BasisPermutation::expectation(std::span<const double> v) const {
  if (v.size() != image.size()) throw Error("permutation: dimension mismatch");
  double acc = 0;
  for (std::size_t b = 0; b < image.size(); ++b) acc += v[image[b]] * v[b];
  return acc;
}

bool BasisPermutation::is_involution() const {
  for (std::size_t b = 0; b < image.size(); ++b)
    if (image[image[b]] != b) return false;
  return true;
}

BasisPermutation spatial_reflection_operator(const SpinBasis& basis) {
  BasisPermutation p;
  p.image.resize(basis.dimension());
  for (std::size_t b = 0; b < basis.dimension(); ++b)
    p.image[b] = static_cast<std::uint32_t>(basis.reflect(b));
  return p;
}

BasisPermutation spin_parity_operator(const SpinBasis& basis) {
  BasisPermutation p;
  p.image.resize(basis.dimension());
  for (std::size_t b = 0; b < basis.dimension(); ++b)
    p.image[b] = static_cast<std::uint32_t>(basis.flip(b));
  return p;
}

std::string SymmetrySector::label() const {
  return std::string(spatial > 0 ? "+" : "-") + (spin > 0 ? "+" : "-");
}

std::size_t sector_dimension(const SpinBasis& basis, SymmetrySector sector) {
  const int n = basis.n_spins;
  const long long dim = 1LL << n;
  const long long tr_reflect = 1LL << ((n + 1) / 2);            // palindromes
  const long long tr_flip = 0;                                  // no fixed points
  const long long tr_both = (n % 2 == 0) ? (1LL << (n / 2)) : 0;  // rev(b) == ~b
  const long long total = dim + sector.spatial * tr_reflect + sector.spin * tr_flip +
                          sector.spatial * sector.spin * tr_both;
  return static_cast<std::size_t>(total / 4);
}

std::vector<int> SpectralDecomposition::indices_in(SymmetrySector sector) const {
  std::vector<int> out;
  for (std::size_t n = 0; n < sectors.size(); ++n)
    if (sectors[n] == sector) out.push_back(static_cast<int>(n));
  return out;
}

namespace {

struct Cluster {
  Eigen::Index begin;
  Eigen::Index size;
};

std::vector<Cluster> find_clusters(const Eigen::VectorXd& w, double tol) {
  std::vector<Cluster> out;
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= w.size(); ++k) {
    if (k == w.size() || w[k] - w[k - 1] >= tol) {
      out.push_back({start, k - start});
      start = k;
    }
  }
  return out;
}

double parity_residual(const BasisPermutation& p, const Eigen::VectorXd& v, int parity) {
  double acc = 0;
  for (std::size_t b = 0; b < p.image.size(); ++b) {
    // (P v)[image[b]] = v[b]
    const double d = v[static_cast<Eigen::Index>(b)] - parity * v[p.image[b]];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Eigen::MatrixXd apply_columns(const IsingHamiltonian& h, const Eigen::MatrixXd& v) {
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    h.apply(std::span<const double>(v.col(c).data(), v.rows()),
            std::span<double>(out.col(c).data(), v.rows()));
  return out;
}

Eigen::MatrixXd permute_columns(const BasisPermutation& p, const Eigen::MatrixXd& v) {
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (std::size_t b = 0; b < p.image.size(); ++b)
      out(p.image[b], c) = v(static_cast<Eigen::Index>(b), c);
  return out;
}

// Rotates a cluster of near-degenerate eigenvectors into joint parity
// eigenvectors, then restores the energy eigenbasis inside each sector.
void rotate_cluster(const IsingHamiltonian& h, const BasisPermutation& reflect,
                    const BasisPermutation& flip, Eigen::Ref<Eigen::MatrixXd> vc) {
  const Eigen::MatrixXd combined = permute_columns(reflect, vc) + 2.0 * permute_columns(flip, vc);
  Eigen::MatrixXd s = vc.transpose() * combined;
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym(s);
  vc = (vc * sym.eigenvectors()).eval();

  // Eigenvalues of R + 2X are -3, -1, 1, 3; group by nearest.
  const auto k = vc.cols();
  Eigen::Index start = 0;
  for (Eigen::Index c = 1; c <= k; ++c) {
    if (c < k && std::lround(sym.eigenvalues()[c]) == std::lround(sym.eigenvalues()[start]))
      continue;
    const Eigen::Index len = c - start;
    if (len > 1) {
      auto block = vc.middleCols(start, len);
      Eigen::MatrixXd hb = block.transpose() * apply_columns(h, block);
      hb = 0.5 * (hb + hb.transpose()).eval();
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(hb);
      block = (block * ritz.eigenvectors()).eval();
    }
    start = c;
  }
}

}  // namespace

SpectralDecomposition diagonalize_with_symmetries(const IsingHamiltonian& h,
                                                  const DiagonalizeOptions& options) {
  const SpinBasis basis(h.n_spins());
  const auto dim = static_cast<Eigen::Index>(h.dimension());
  const BasisPermutation reflect = spatial_reflection_operator(basis);
  const BasisPermutation flip = spin_parity_operator(basis);

  Eigen::MatrixXd raw_vectors = h.dense();
  Eigen::VectorXd raw_values(dim);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(dim),
                                         raw_vectors.data(), static_cast<lapack_int>(dim),
                                         raw_values.data());
  if (info != 0)
    throw NumericalError("dense eigensolver failed (LAPACK info " + std::to_string(info) + ")");

  const double span = raw_values[dim - 1] - raw_values[0];
  const double hnorm = std::max({std::abs(raw_values[0]), std::abs(raw_values[dim - 1]), 1e-300});

  SpectralDecomposition out;
  out.n_spins = h.n_spins();
  out.b_field = h.b_field();
  double relative = options.degeneracy_relative;
  for (int attempt = 0;; ++attempt, relative *= 100.0) {
    const double tol = span > 0 ? relative * span : std::numeric_limits<double>::infinity();
    Eigen::MatrixXd vecs = raw_vectors;
    Eigen::VectorXd energies = raw_values;
    const auto clusters = find_clusters(raw_values, tol);
    std::vector<SymmetrySector> sectors(dim);
    std::size_t largest = 1;

    for (const auto& c : clusters) {
      largest = std::max(largest, static_cast<std::size_t>(c.size));
      if (c.size > 1) {
        rotate_cluster(h, reflect, flip, vecs.middleCols(c.begin, c.size));
        const Eigen::MatrixXd hv = apply_columns(h, vecs.middleCols(c.begin, c.size));
        for (Eigen::Index k = 0; k < c.size; ++k)
          energies[c.begin + k] = vecs.col(c.begin + k).dot(hv.col(k));
      }
    }

    double max_res = 0;
    for (Eigen::Index n = 0; n < dim; ++n) {
      const std::span<const double> v(vecs.col(n).data(), dim);
      SymmetrySector s{reflect.expectation(v) >= 0 ? 1 : -1, flip.expectation(v) >= 0 ? 1 : -1};
      sectors[n] = s;
      max_res = std::max({max_res, parity_residual(reflect, vecs.col(n), s.spatial),
                          parity_residual(flip, vecs.col(n), s.spin)});
    }

    if (max_res >= options.parity_tolerance) {
      if (attempt < options.max_widenings && span > 0) continue;
      std::ostringstream msg;
      msg << "simultaneous parity diagonalization failed: residual " << max_res
          << " with cluster tolerance " << tol << " Hz";
      throw NumericalError(msg.str());
    }

    // Order: clusters ascending; inside a cluster by sector rank, then energy.
    std::vector<Eigen::Index> order;
    order.reserve(dim);
    for (const auto& c : clusters) {
      std::vector<Eigen::Index> idx(c.size);
      std::iota(idx.begin(), idx.end(), c.begin);
      std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (sectors[a].rank() != sectors[b].rank()) return sectors[a].rank() < sectors[b].rank();
        return energies[a] < energies[b];
      });
      order.insert(order.end(), idx.begin(), idx.end());
    }

    out.energies.resize(dim);
    out.eigenvectors.resize(dim, dim);
    out.sectors.resize(dim);
    for (Eigen::Index n = 0; n < dim; ++n) {
      out.energies[n] = energies[order[n]];
      out.eigenvectors.col(n) = vecs.col(order[n]);
      out.sectors[n] = sectors[order[n]];
    }
    out.ground_sector = out.sectors[0];
    out.degeneracy_tolerance = tol;
    out.max_parity_residual = max_res;
    out.largest_cluster = largest;
    break;
  }

  double max_eig = 0;
  Eigen::VectorXd hv(dim);
  for (Eigen::Index n = 0; n < dim; ++n) {
    h.apply(std::span<const double>(out.eigenvectors.col(n).data(), dim),
            std::span<double>(hv.data(), dim));
    max_eig = std::max(max_eig, (hv - out.energies[n] * out.eigenvectors.col(n)).norm());
  }
  out.max_eigen_residual = max_eig;
  if (max_eig > 1e-8 * hnorm) {
    std::ostringstream msg;
    msg << "eigenpair residual " << max_eig << " exceeds 1e-8 * ||H||";
    throw NumericalError(msg.str());
  }
  return out;
}

void write_spectrum_csv(std::ostream& out, const SpectralDecomposition& spectrum,
                        std::span<const double> probabilities, const std::string& config_hash) {
  std::vector<std::string> header{"n", "E_hz", "spatial_parity", "spin_parity"};
  const bool with_p = !probabilities.empty();
  if (with_p) {
    if (probabilities.size() != spectrum.size()) throw Error("spectrum csv: P_n size mismatch");
    header.push_back("P_n");
  }
  CsvWriter w(out, header, config_hash);
  for (std::size_t n = 0; n < spectrum.size(); ++n) {
    std::vector<std::string> row{std::to_string(n), format_double(spectrum.energies[n]),
                                 std::to_string(spectrum.sectors[n].spatial),
                                 std::to_string(spectrum.sectors[n].spin)};
    if (with_p) row.push_back(format_double(probabilities[n]));
    w.row(row);
  }
}

}  // namespace ionsim
