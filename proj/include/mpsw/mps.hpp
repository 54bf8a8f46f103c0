#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mpsw/errors.hpp"

namespace mpsw {

// Rank-3 MPS site tensor with physical dimension 2, stored as one
// left_dim x right_dim matrix per physical bit.
struct SiteTensor {
  std::array<Eigen::MatrixXd, 2> m;

  long left() const { return m[0].rows(); }
  long right() const { return m[0].cols(); }
  double squared_norm() const { return m[0].squaredNorm() + m[1].squaredNorm(); }
};

struct LogAmplitude {
  double log_abs;  // -inf when the amplitude is exactly zero
  int sign;        // -1, 0, +1

  bool is_zero() const { return sign == 0; }
  double log_prob() const { return 2.0 * log_abs; }
};

// Matrix Product State over n binary sites. Bond dimensions are capped by
// bond_cap; boundary bonds have dimension 1. ortho_center() is the 0-based
// orthogonality center, or kNoCenter when the chain is not in canonical form.
class Mps {
 public:
  static constexpr int kNoCenter = -1;

  Mps(std::vector<SiteTensor> sites, int bond_cap,
      int ortho_center = kNoCenter);

  // Uniform(-1,1) entries, bond dims min(D, 2^min(i, n-i)); not canonical.
  static Mps random(int n_sites, int bond_cap, std::uint64_t seed);

  // Product state with given per-site (bit0, bit1) amplitudes; all bonds 1.
  static Mps product(const std::vector<std::array<double, 2>>& site_amps);

  int n_sites() const { return static_cast<int>(sites_.size()); }
  int bond_cap() const { return bond_cap_; }
  int ortho_center() const { return ortho_center_; }
  const SiteTensor& site(int i) const { return sites_.at(i); }

  // Right bond dimension of site i; bond_dim(n_sites()-1) == 1.
  long bond_dim(int i) const { return sites_.at(i).right(); }

  double amplitude(std::span<const std::uint8_t> bits) const;
  LogAmplitude log_amplitude(std::span<const std::uint8_t> bits) const;

  // Bring the chain into mixed canonical form with the given center.
  // Normalizes the state; throws DegenerateStateError on a zero state.
  void canonicalize(int center);

  // Shift the orthogonality center via QR/LQ steps; amplitudes unchanged.
  void move_center(int to);

  // Schmidt coefficients across the cut separating sites [0, cut) from
  // [cut, n); cut in 1..n-1. Moves the center to cut-1.
  std::vector<double> schmidt_spectrum(int cut);

  // Squared norm of the center tensor; equals <Psi|Psi> in canonical form.
  double center_squared_norm() const;

  void scale(double factor);

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static Mps load(std::istream& in);
  static Mps load_file(const std::string& path);

  // Two-site update support: replace sites i and i+1, setting the new center.
  void set_pair(int i, SiteTensor left, SiteTensor right, int new_center);

 private:
  void check_bits(std::span<const std::uint8_t> bits) const;
  // Left-orthogonalize site i, absorbing the R factor into site i+1.
  void push_right(int i);
  // Right-orthogonalize site i, absorbing the L factor into site i-1.
  void push_left(int i);

  std::vector<SiteTensor> sites_;
  int bond_cap_;
  int ortho_center_;
};

// -sum λ_i^2 ln λ_i^2, zero values contributing zero. Natural log.
double entanglement_entropy(std::span<const double> schmidt_values);

// Reshape helpers shared by canonicalization and the two-site update.
// Physical bits index blocks: stack_rows puts bit 0 in the top block row,
// stack_cols puts bit 0 in the left block column.
Eigen::MatrixXd stack_rows(const SiteTensor& t);       // (2l) x r
Eigen::MatrixXd stack_cols(const SiteTensor& t);       // l x (2r)
SiteTensor site_from_rows(const Eigen::MatrixXd& m);   // inverse of stack_rows
SiteTensor site_from_cols(const Eigen::MatrixXd& m);   // inverse of stack_cols

}  // namespace mpsw
