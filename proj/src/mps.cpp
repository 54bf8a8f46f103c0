#include "mpsw/mps.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace mpsw {

namespace {

constexpr std::uint32_t kMagic = 0x5753504d;  // "MPSW" little-endian
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ParseError("mpsw: truncated stream while reading header field");
  return v;
}

}  // namespace

Mps::Mps(std::vector<SiteTensor> sites, int bond_cap, int ortho_center)
    : sites_(std::move(sites)), bond_cap_(bond_cap), ortho_center_(ortho_center) {
  if (sites_.empty()) throw InputError("mps: empty site list");
  if (bond_cap_ < 1) throw InputError("mps: bond_cap must be positive");
  if (sites_.front().left() != 1 || sites_.back().right() != 1)
    throw InputError("mps: boundary bonds must have dimension 1");
  for (size_t i = 0; i + 1 < sites_.size(); ++i) {
    if (sites_[i].right() != sites_[i + 1].left())
      throw InputError("mps: bond mismatch between sites " + std::to_string(i) +
                       " and " + std::to_string(i + 1));
  }
  if (ortho_center_ != kNoCenter &&
      (ortho_center_ < 0 || ortho_center_ >= n_sites()))
    throw InputError("mps: ortho_center out of range");
}

Mps Mps::random(int n_sites, int bond_cap, std::uint64_t seed) {
  if (n_sites < 1) throw InputError("mps: n_sites must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto bond = [&](int i) {  // dimension of the bond right of site i (0-based)
    int dist = std::min(i + 1, n_sites - 1 - i);
    double cap = std::pow(2.0, std::min(dist, 30));
    return static_cast<long>(std::min<double>(bond_cap, cap));
  };
  std::vector<SiteTensor> sites(n_sites);
  long l = 1;
  for (int i = 0; i < n_sites; ++i) {
    long r = (i == n_sites - 1) ? 1 : bond(i);
    for (auto& m : sites[i].m) {
      m.resize(l, r);
      for (long a = 0; a < l; ++a)
        for (long b = 0; b < r; ++b) m(a, b) = u(rng);
    }
    l = r;
  }
  return Mps(std::move(sites), bond_cap);
}

Mps Mps::product(const std::vector<std::array<double, 2>>& site_amps) {
  std::vector<SiteTensor> sites(site_amps.size());
  for (size_t i = 0; i < site_amps.size(); ++i) {
    sites[i].m[0] = Eigen::MatrixXd::Constant(1, 1, site_amps[i][0]);
    sites[i].m[1] = Eigen::MatrixXd::Constant(1, 1, site_amps[i][1]);
  }
  return Mps(std::move(sites), 1);
}

void Mps::check_bits(std::span<const std::uint8_t> bits) const {
  if (static_cast<int>(bits.size()) != n_sites())
    throw InputError("mps: bit string length " + std::to_string(bits.size()) +
                     " does not match n_sites " + std::to_string(n_sites()));
  for (auto b : bits)
    if (b > 1) throw InputError("mps: bits must be 0 or 1");
}

double Mps::amplitude(std::span<const std::uint8_t> bits) const {
  check_bits(bits);
  Eigen::RowVectorXd v = sites_[0].m[bits[0]].row(0);
  for (int i = 1; i < n_sites(); ++i) v = v * sites_[i].m[bits[i]];
  return v(0);
}

LogAmplitude Mps::log_amplitude(std::span<const std::uint8_t> bits) const {
  check_bits(bits);
  double log_scale = 0.0;
  Eigen::RowVectorXd v = sites_[0].m[bits[0]].row(0);
  for (int i = 1; i <= n_sites(); ++i) {
    double nv = v.norm();
    if (nv == 0.0)
      return {-std::numeric_limits<double>::infinity(), 0};
    log_scale += std::log(nv);
    v /= nv;
    if (i < n_sites()) v = v * sites_[i].m[bits[i]];
  }
  // v is now 1x1 with unit magnitude up to fp error; its sign is the sign
  // of the amplitude.
  double s = v(0);
  if (s == 0.0) return {-std::numeric_limits<double>::infinity(), 0};
  return {log_scale, s > 0 ? 1 : -1};
}

Eigen::MatrixXd stack_rows(const SiteTensor& t) {
  Eigen::MatrixXd m(2 * t.left(), t.right());
  m.topRows(t.left()) = t.m[0];
  m.bottomRows(t.left()) = t.m[1];
  return m;
}

Eigen::MatrixXd stack_cols(const SiteTensor& t) {
  Eigen::MatrixXd m(t.left(), 2 * t.right());
  m.leftCols(t.right()) = t.m[0];
  m.rightCols(t.right()) = t.m[1];
  return m;
}

SiteTensor site_from_rows(const Eigen::MatrixXd& m) {
  SiteTensor t;
  long l = m.rows() / 2;
  t.m[0] = m.topRows(l);
  t.m[1] = m.bottomRows(l);
  return t;
}

SiteTensor site_from_cols(const Eigen::MatrixXd& m) {
  SiteTensor t;
  long r = m.cols() / 2;
  t.m[0] = m.leftCols(r);
  t.m[1] = m.rightCols(r);
  return t;
}

void Mps::push_right(int i) {
  Eigen::MatrixXd m = stack_rows(sites_[i]);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  long k = std::min(m.rows(), m.cols());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k);
  Eigen::MatrixXd r =
      qr.matrixQR().topLeftCorner(k, m.cols()).triangularView<Eigen::Upper>();
  sites_[i] = site_from_rows(q);
  for (auto& nm : sites_[i + 1].m) nm = r * nm;
}

void Mps::push_left(int i) {
  Eigen::MatrixXd m = stack_cols(sites_[i]);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.transpose());
  long k = std::min(m.rows(), m.cols());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.cols(), k);
  Eigen::MatrixXd r =
      qr.matrixQR().topLeftCorner(k, m.rows()).triangularView<Eigen::Upper>();
  sites_[i] = site_from_cols(q.transpose());
  Eigen::MatrixXd lfac = r.transpose();  // l x k
  for (auto& pm : sites_[i - 1].m) pm = pm * lfac;
}

void Mps::canonicalize(int center) {
  if (center < 0 || center >= n_sites())
    throw InputError("mps: canonicalize center out of range");
  for (int i = 0; i < center; ++i) push_right(i);
  for (int i = n_sites() - 1; i > center; --i) push_left(i);
  double nrm = std::sqrt(sites_[center].squared_norm());
  if (!(nrm > 1e-300))
    throw DegenerateStateError("mps: numerically zero state, cannot normalize");
  for (auto& m : sites_[center].m) m /= nrm;
  ortho_center_ = center;
}

void Mps::move_center(int to) {
  if (ortho_center_ == kNoCenter)
    throw InputError("mps: move_center requires a canonical state");
  if (to < 0 || to >= n_sites())
    throw InputError("mps: move_center target out of range");
  while (ortho_center_ < to) push_right(ortho_center_++);
  while (ortho_center_ > to) push_left(ortho_center_--);
  // QR steps preserve the state exactly; trim accumulated rounding in the
  // norm so long sweeps stay normalized.
  double nrm = std::sqrt(sites_[ortho_center_].squared_norm());
  if (!(nrm > 1e-300))
    throw DegenerateStateError("mps: state collapsed to zero during center move");
  for (auto& m : sites_[ortho_center_].m) m /= nrm;
}

std::vector<double> Mps::schmidt_spectrum(int cut) {
  if (cut < 1 || cut >= n_sites())
    throw InputError("mps: cut must be in 1..n-1");
  if (ortho_center_ == kNoCenter) canonicalize(cut - 1);
  else move_center(cut - 1);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack_rows(sites_[cut - 1]));
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

double Mps::center_squared_norm() const {
  if (ortho_center_ == kNoCenter)
    throw InputError("mps: no orthogonality center");
  return sites_[ortho_center_].squared_norm();
}

void Mps::scale(double factor) {
  for (auto& m : sites_[0].m) m *= factor;
  ortho_center_ = kNoCenter;
}

void Mps::set_pair(int i, SiteTensor left, SiteTensor right, int new_center) {
  if (i < 0 || i + 1 >= n_sites()) throw InputError("mps: pair index out of range");
  if (left.right() != right.left()) throw InputError("mps: pair bond mismatch");
  sites_[i] = std::move(left);
  sites_[i + 1] = std::move(right);
  ortho_center_ = new_center;
}

void Mps::save(std::ostream& out) const {
  write_u32(out, kMagic);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(n_sites()));
  write_u32(out, 2);  // phys_dim
  write_u32(out, static_cast<std::uint32_t>(bond_cap_));
  write_u32(out, ortho_center_ == kNoCenter
                     ? 0u
                     : static_cast<std::uint32_t>(ortho_center_ + 1));
  for (const auto& t : sites_) {
    write_u32(out, static_cast<std::uint32_t>(t.left()));
    write_u32(out, static_cast<std::uint32_t>(t.right()));
    // row-major (l, p, r)
    for (long a = 0; a < t.left(); ++a)
      for (int p = 0; p < 2; ++p)
        for (long b = 0; b < t.right(); ++b) {
          double v = t.m[p](a, b);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
  }
  if (!out) throw ParseError("mpsw: write failure");
}

Mps Mps::load(std::istream& in) {
  if (read_u32(in) != kMagic) throw ParseError("mpsw: bad magic at offset 0");
  if (read_u32(in) != kFormatVersion)
    throw ParseError("mpsw: unsupported format version at offset 4");
  std::uint32_t n = read_u32(in);
  std::uint32_t phys = read_u32(in);
  std::uint32_t cap = read_u32(in);
  std::uint32_t center = read_u32(in);
  if (phys != 2) throw ParseError("mpsw: unsupported phys_dim");
  if (n == 0 || n > (1u << 24)) throw ParseError("mpsw: implausible n_sites");
  if (center > n) throw ParseError("mpsw: ortho_center out of range");
  std::vector<SiteTensor> sites(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t l = read_u32(in);
    std::uint32_t r = read_u32(in);
    if (l == 0 || r == 0 || l > (1u << 20) || r > (1u << 20))
      throw ParseError("mpsw: implausible bond dimension at site " +
                       std::to_string(i));
    sites[i].m[0].resize(l, r);
    sites[i].m[1].resize(l, r);
    for (std::uint32_t a = 0; a < l; ++a)
      for (int p = 0; p < 2; ++p)
        for (std::uint32_t b = 0; b < r; ++b) {
          double v;
          in.read(reinterpret_cast<char*>(&v), sizeof(v));
          if (!in)
            throw ParseError("mpsw: truncated payload at site " +
                             std::to_string(i));
          sites[i].m[p](a, b) = v;
        }
  }
  return Mps(std::move(sites), static_cast<int>(cap),
             center == 0 ? kNoCenter : static_cast<int>(center) - 1);
}

void Mps::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("mpsw: cannot open " + path + " for writing");
  save(out);
}

Mps Mps::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("mpsw: cannot open " + path);
  return load(in);
}

double entanglement_entropy(std::span<const double> schmidt_values) {
  double s = 0.0;
  for (double lam : schmidt_values) {
    double p = lam * lam;
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

}  // namespace mpsw
