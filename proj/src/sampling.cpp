#include "mpsw/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace mpsw {

namespace {

constexpr double kLogUnderflow = -690.0;  // ln of the smallest sane slice mass

void check_ready(const Mps& mps) {
  if (mps.ortho_center() != 0)
    throw InputError("sampling: model must be in right canonical form "
                     "(orthogonality center at site 0)");
}

std::vector<int> build_clamp(const Mps& mps,
                             const std::vector<std::pair<int, int>>& clamped) {
  std::vector<int> clamp(mps.n_sites(), -1);
  for (auto [site, bit] : clamped) {
    if (site < 0 || site >= mps.n_sites())
      throw InputError("sampling: clamped site out of range");
    if (bit != 0 && bit != 1)
      throw InputError("sampling: clamped bit must be 0 or 1");
    if (clamp[site] != -1)
      throw InputError("sampling: duplicate clamp at site " + std::to_string(site));
    clamp[site] = bit;
  }
  return clamp;
}

DrawnSample draw(const Mps& mps, const std::vector<int>& clamp_bits,
                 std::mt19937_64& rng) {
  const int n = mps.n_sites();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DrawnSample out;
  out.bits.resize(n);
  double log_px = 0.0;        // joint probability of the drawn string
  double log_clamp_mass = 0.0;  // conditional mass of the forced bits
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd w0 = v * mps.site(i).m[0];
    Eigen::RowVectorXd w1 = v * mps.site(i).m[1];
    double q0 = w0.squaredNorm();
    double q1 = w1.squaredNorm();
    double total = q0 + q1;
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericError("sampling: conditional marginal lost all mass at site " +
                         std::to_string(i));
    double p1 = q1 / total;
    int b;
    if (clamp_bits[i] >= 0) {
      b = clamp_bits[i];
      double pb = b ? p1 : 1.0 - p1;
      if (pb <= 0.0)
        throw ImpossibleConditionError(
            "sampling: clamped bit at site " + std::to_string(i) +
            " has zero conditional probability");
      log_clamp_mass += std::log(pb);
      if (log_clamp_mass < kLogUnderflow)
        throw ImpossibleConditionError(
            "sampling: clamp slice probability underflowed at site " +
            std::to_string(i));
    } else {
      b = unif(rng) < p1 ? 1 : 0;
    }
    double pb = b ? p1 : 1.0 - p1;
    if (pb <= 0.0) {
      // An exactly zero branch can only be entered via a clamp, handled above;
      // guard anyway.
      throw NumericError("sampling: selected a zero-probability branch");
    }
    log_px += std::log(pb);
    out.bits[i] = static_cast<std::uint8_t>(b);
    Eigen::RowVectorXd& w = b ? w1 : w0;
    v = w / std::sqrt(b ? q1 : q0);
  }
  out.energy = -log_px;
  return out;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over (seed, index)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

DrawnSample sample_one(const Mps& mps, std::mt19937_64& rng) {
  check_ready(mps);
  std::vector<int> clamp(mps.n_sites(), -1);
  return draw(mps, clamp, rng);
}

DrawnSample sample_conditional(const Mps& mps,
                               const std::vector<std::pair<int, int>>& clamped,
                               std::mt19937_64& rng) {
  check_ready(mps);
  return draw(mps, build_clamp(mps, clamped), rng);
}

SampleBatch sample_batch(const Mps& mps, const SampleRequest& req) {
  check_ready(mps);
  if (req.count < 0) throw InputError("sampling: negative count");
  if (req.energy_window && req.energy_window->first > req.energy_window->second)
    throw InputError("sampling: energy window E_lo > E_hi");
  std::vector<int> clamp = build_clamp(mps, req.clamped);

  SampleBatch out;
  out.seed = req.seed;
  out.attempts = 0;
  out.set.split_tag = SplitTag::sampled;
  int h = req.height > 0 ? req.height : 1;
  int w = req.width > 0 ? req.width : mps.n_sites();
  if (h * w != mps.n_sites())
    throw InputError("sampling: image shape does not match n_sites");

  const long probe_budget = 1000000;
  long accepted = 0;
  for (std::uint64_t k = 0; accepted < req.count; ++k) {
    if (out.attempts >= probe_budget &&
        accepted < out.attempts / 1000000)
      throw InfeasibleWindowError(
          "sampling: energy-window acceptance rate below 1e-6 after " +
          std::to_string(out.attempts) + " draws");
    std::mt19937_64 rng(mix_seed(req.seed, k));
    DrawnSample s = draw(mps, clamp, rng);
    ++out.attempts;
    if (req.energy_window &&
        (s.energy < req.energy_window->first ||
         s.energy > req.energy_window->second))
      continue;
    BinaryImage im;
    im.bits = std::move(s.bits);
    im.height = h;
    im.width = w;
    out.set.images.push_back(std::move(im));
    out.energies.push_back(s.energy);
    ++accepted;
  }
  return out;
}

}  // namespace mpsw
