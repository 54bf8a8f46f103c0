#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mpsw/dataio.hpp"
#include "mpsw/mps.hpp"

namespace testutil {

// Dense enumeration oracle: expands the full 2^n amplitude vector by direct
// sequential contraction of the site tensors. Site 0 is the most significant
// bit of the state index. Independent of Mps::amplitude.
inline Eigen::VectorXd dense_state(const mpsw::Mps& m) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Ones(1, 1);
  for (int i = 0; i < m.n_sites(); ++i) {
    const auto& site = m.site(i);
    Eigen::MatrixXd next(t.rows() * 2, site.right());
    for (int p = 0; p < 2; ++p)
      for (long s = 0; s < t.rows(); ++s)
        next.row(s * 2 + p) = t.row(s) * site.m[p];
    t = std::move(next);
  }
  return t.col(0);
}

inline std::vector<std::uint8_t> bits_of(std::uint64_t x, int n) {
  std::vector<std::uint8_t> b(n);
  for (int i = 0; i < n; ++i) b[i] = (x >> (n - 1 - i)) & 1u;
  return b;
}

// Schmidt values of the cut after `cut` sites, from the dense state vector.
inline std::vector<double> dense_schmidt(const Eigen::VectorXd& state, int n,
                                         int cut) {
  long rows = 1L << cut;
  long cols = 1L << (n - cut);
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = state(r * cols + c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

inline mpsw::BinaryImage image_of(const std::vector<std::uint8_t>& bits,
                                  int label = mpsw::kNoLabel) {
  mpsw::BinaryImage im;
  im.bits = bits;
  im.height = 1;
  im.width = static_cast<int>(bits.size());
  im.label = label;
  return im;
}

// (|00> + |11>)/sqrt(2) as a D=2 MPS.
inline mpsw::Mps bell_pair() {
  mpsw::SiteTensor a, b;
  a.m[0] = (Eigen::MatrixXd(1, 2) << 1, 0).finished();
  a.m[1] = (Eigen::MatrixXd(1, 2) << 0, 1).finished();
  b.m[0] = (Eigen::MatrixXd(2, 1) << 1, 0).finished() / std::sqrt(2.0);
  b.m[1] = (Eigen::MatrixXd(2, 1) << 0, 1).finished() / std::sqrt(2.0);
  std::vector<mpsw::SiteTensor> sites{a, b};
  return mpsw::Mps(std::move(sites), 2, 0);
}

// Delta state concentrated on the given bit string.
inline mpsw::Mps delta_state(const std::vector<std::uint8_t>& bits) {
  std::vector<std::array<double, 2>> amps;
  for (auto b : bits)
    amps.push_back(b ? std::array<double, 2>{0.0, 1.0}
                     : std::array<double, 2>{1.0, 0.0});
  mpsw::Mps m = mpsw::Mps::product(amps);
  m.canonicalize(0);
  return m;
}

inline mpsw::Mps uniform_state(int n) {
  double a = 1.0 / std::sqrt(2.0);
  std::vector<std::array<double, 2>> amps(n, {a, a});
  mpsw::Mps m = mpsw::Mps::product(amps);
  m.canonicalize(0);
  return m;
}

// Upper critical value of chi-square at tail probability corresponding to
// normal deviate z (Wilson-Hilferty).
inline double chi2_critical(double df, double z = 3.0902) {
  double a = 2.0 / (9.0 * df);
  double t = 1.0 - a + z * std::sqrt(a);
  return df * t * t * t;
}

// Chi-square goodness-of-fit statistic; bins with expected count below
// `min_expected` are pooled. Returns {statistic, degrees of freedom}.
inline std::pair<double, double> chi2_stat(const std::vector<double>& observed,
                                           const std::vector<double>& expected,
                                           double min_expected = 10.0) {
  double pooled_obs = 0.0, pooled_exp = 0.0, stat = 0.0;
  long bins = 0;
  for (size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] < min_expected) {
      pooled_obs += observed[i];
      pooled_exp += expected[i];
    } else {
      double d = observed[i] - expected[i];
      stat += d * d / expected[i];
      ++bins;
    }
  }
  if (pooled_exp > 0.0) {
    double d = pooled_obs - pooled_exp;
    stat += d * d / pooled_exp;
    ++bins;
  }
  return {stat, static_cast<double>(bins - 1)};
}

inline std::vector<std::uint8_t> random_bits(int n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1u);
  return b;
}

// Known-dimension synthetic data: points uniform in an m-dimensional cube,
// each coordinate unary-coded ("thermometer") over bits_per_coord pixels so
// Hamming distance is proportional to L1 distance. Nearest-neighbor distances
// then shrink as K^(-1/m).
inline mpsw::Dataset subcube_dataset(int m, int bits_per_coord, long count,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mpsw::Dataset d;
  int n = m * bits_per_coord;
  for (long i = 0; i < count; ++i) {
    std::vector<std::uint8_t> bits(n, 0);
    for (int c = 0; c < m; ++c) {
      int level = static_cast<int>(u(rng) * bits_per_coord);
      for (int b = 0; b < level; ++b) bits[c * bits_per_coord + b] = 1;
    }
    d.images.push_back(image_of(bits));
  }
  return d;
}

// Rebuilds an MPS with the pair (site, site+1) replaced by an arbitrary
// merged tensor, for the finite-difference oracle. The left factor takes the
// merged blocks, the right factor is a bit selector.
inline mpsw::Mps with_merged(const mpsw::Mps& base, int site,
                             const Eigen::MatrixXd& merged) {
  long l = base.site(site).left();
  long r = base.site(site + 1).right();
  mpsw::SiteTensor a, b;
  for (int p = 0; p < 2; ++p) {
    a.m[p].resize(l, 2 * r);
    a.m[p].leftCols(r) = merged.block(p * l, 0, l, r);
    a.m[p].rightCols(r) = merged.block(p * l, r, l, r);
  }
  b.m[0] = Eigen::MatrixXd::Zero(2 * r, r);
  b.m[0].topRows(r) = Eigen::MatrixXd::Identity(r, r);
  b.m[1] = Eigen::MatrixXd::Zero(2 * r, r);
  b.m[1].bottomRows(r) = Eigen::MatrixXd::Identity(r, r);
  mpsw::Mps copy = base;
  copy.set_pair(site, std::move(a), std::move(b), mpsw::Mps::kNoCenter);
  return copy;
}

// Unnormalized objective <Psi|Psi> - (1/N) sum ln |<x|Psi>|^2, evaluated by
// dense enumeration. Environments around the pair must be orthonormal, which
// holds when `base` is canonical at the pair.
inline double dense_objective(const mpsw::Mps& base, int site,
                              const Eigen::MatrixXd& merged,
                              const mpsw::Dataset& batch) {
  mpsw::Mps m = with_merged(base, site, merged);
  Eigen::VectorXd state = dense_state(m);
  double obj = state.squaredNorm();
  for (const auto& im : batch.images) {
    std::uint64_t idx = 0;
    for (auto b : im.bits) idx = (idx << 1) | b;
    obj -= 2.0 * std::log(std::abs(state(idx))) / batch.size();
  }
  return obj;
}

inline std::string fixture_path(const std::string& name) {
  return std::string(TEST_DATA_DIR) + "/" + name;
}

}  // namespace testutil
