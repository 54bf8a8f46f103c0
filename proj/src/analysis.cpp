#include "mpsw/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mpsw/sampling.hpp"

namespace mpsw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::uint64_t> pack_bits(const BinaryImage& im) {
  size_t words = (im.bits.size() + 63) / 64;
  std::vector<std::uint64_t> out(words, 0);
  for (size_t i = 0; i < im.bits.size(); ++i)
    if (im.bits[i]) out[i / 64] |= (std::uint64_t{1} << (i % 64));
  return out;
}

int packed_distance(const std::vector<std::uint64_t>& a,
                    const std::vector<std::uint64_t>& b) {
  int d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

}  // namespace

double energy(const Mps& mps, const BinaryImage& x) {
  auto la = mps.log_amplitude(x.bits);
  return la.is_zero() ? kInf : -la.log_prob();
}

double soft_min_energy(const std::vector<double>& energies) {
  if (energies.empty()) throw InputError("e0: empty energy list");
  double e_min = *std::min_element(energies.begin(), energies.end());
  if (e_min == kInf) return kInf;
  double acc = 0.0;
  for (double e : energies) acc += std::exp(-(e - e_min));
  return e_min - std::log(acc / static_cast<double>(energies.size()));
}

EnergyStats energy_stats(const Mps& mps, const Dataset& set,
                         const std::string& tag) {
  if (set.empty()) throw InputError("energy_stats: empty dataset");
  EnergyStats out;
  out.set_tag = tag;
  out.energies.reserve(set.size());
  out.n_infinite = 0;
  for (const auto& im : set.images) {
    double e = energy(mps, im);
    if (e == kInf) ++out.n_infinite;
    out.energies.push_back(e);
  }
  out.e0 = soft_min_energy(out.energies);
  out.e_ground = *std::min_element(out.energies.begin(), out.energies.end());
  out.mean_e = std::accumulate(out.energies.begin(), out.energies.end(), 0.0) /
               static_cast<double>(out.energies.size());
  return out;
}

FullSetSize full_set_size(double e0, double rho_at_e0, double delta_e,
                          double epsilon_star) {
  if (!(delta_e > 0.0)) throw InputError("full_set_size: delta_e must be positive");
  if (!(rho_at_e0 > 0.0))
    throw InputError("full_set_size: density at E0 must be positive");
  FullSetSize out;
  out.v = e0 / std::log(2.0);
  out.ln_nf = e0 + std::log(rho_at_e0 * delta_e);
  out.epsilon_star = epsilon_star;
  out.delta_e = delta_e;
  return out;
}

Kde::Kde(std::vector<double> data, std::optional<double> bandwidth)
    : data_(std::move(data)) {
  if (data_.size() < 2) throw InputError("kde: need at least 2 points");
  for (double v : data_)
    if (!std::isfinite(v)) throw InputError("kde: non-finite data point");
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw InputError("kde: bandwidth must be positive");
    bandwidth_ = *bandwidth;
    return;
  }
  double n = static_cast<double>(data_.size());
  double mean = std::accumulate(data_.begin(), data_.end(), 0.0) / n;
  double var = 0.0;
  for (double v : data_) var += (v - mean) * (v - mean);
  var /= (n - 1);
  std::vector<double> sorted = data_;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    double pos = q * (n - 1);
    size_t lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] * (1 - frac) + sorted[hi] * frac;
  };
  double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::sqrt(var);
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  // Silverman's rule of thumb.
  bandwidth_ = 0.9 * spread * std::pow(n, -0.2);
  if (!(bandwidth_ > 0.0)) {
    degenerate_ = true;
    bandwidth_ = 1e-6 * std::max(1.0, std::abs(mean));
  }
}

double Kde::operator()(double x) const {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  double acc = 0.0;
  for (double v : data_) {
    double z = (x - v) / bandwidth_;
    acc += std::exp(-0.5 * z * z);
  }
  return acc * inv_sqrt_2pi /
         (bandwidth_ * static_cast<double>(data_.size()));
}

int hamming_distance(const BinaryImage& a, const BinaryImage& b) {
  if (a.bits.size() != b.bits.size())
    throw InputError("hamming: length mismatch");
  int d = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) d += a.bits[i] != b.bits[i];
  return d;
}

HammingStats hamming_stats(const Dataset& set, long pair_budget,
                           std::uint64_t seed) {
  if (set.size() < 2) throw InputError("hamming_stats: need at least 2 images");
  std::vector<std::vector<std::uint64_t>> packed;
  packed.reserve(set.size());
  for (const auto& im : set.images) packed.push_back(pack_bits(im));

  const long n_img = static_cast<long>(set.size());
  double sum = 0.0, sum_sq = 0.0;
  long n_pairs = 0;
  long all_pairs = n_img * (n_img - 1) / 2;
  if (all_pairs <= pair_budget) {
    for (long i = 0; i < n_img; ++i)
      for (long j = i + 1; j < n_img; ++j) {
        double d = packed_distance(packed[i], packed[j]);
        sum += d;
        sum_sq += d * d;
        ++n_pairs;
      }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<long> pick(0, n_img - 1);
    while (n_pairs < pair_budget) {
      long i = pick(rng), j = pick(rng);
      if (i == j) continue;
      double d = packed_distance(packed[i], packed[j]);
      sum += d;
      sum_sq += d * d;
      ++n_pairs;
    }
  }
  HammingStats out;
  out.n_pairs = n_pairs;
  out.mean_pairwise = sum / static_cast<double>(n_pairs);
  double var = sum_sq / static_cast<double>(n_pairs) -
               out.mean_pairwise * out.mean_pairwise;
  out.std_pairwise = std::sqrt(std::max(0.0, var));
  double n_px = static_cast<double>(set.images[0].n_pixels());
  double black = 0.0;
  for (const auto& im : set.images) black += im.count_ones();
  out.mean_black_pixels = black / static_cast<double>(n_img);
  double q = out.mean_black_pixels / n_px;
  out.random_baseline = 2.0 * q * (1.0 - q) * n_px;
  return out;
}

FractalFit fractal_dimension(const Dataset& set,
                             const std::vector<long>& k_schedule,
                             std::uint64_t seed) {
  if (k_schedule.size() < 3)
    throw InputError("fractal: need at least 3 schedule points");
  for (size_t i = 1; i < k_schedule.size(); ++i)
    if (k_schedule[i] <= k_schedule[i - 1])
      throw InputError("fractal: k schedule must be strictly increasing");
  if (k_schedule.front() < 2) throw InputError("fractal: K must be >= 2");
  if (static_cast<long>(set.size()) < k_schedule.back())
    throw InputError("fractal: dataset smaller than the largest K");

  std::vector<std::vector<std::uint64_t>> packed;
  packed.reserve(set.size());
  for (const auto& im : set.images) packed.push_back(pack_bits(im));

  const int repeats = 3;
  FractalFit fit;
  fit.k_values = k_schedule;
  std::vector<size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (size_t ki = 0; ki < k_schedule.size(); ++ki) {
    long k = k_schedule[ki];
    double d_acc = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      std::mt19937_64 rng(seed + 1000003ull * ki + rep);
      std::shuffle(idx.begin(), idx.end(), rng);
      double d_sum = 0.0;
      for (long a = 0; a < k; ++a) {
        int best = std::numeric_limits<int>::max();
        for (long b = 0; b < k; ++b) {
          if (a == b) continue;
          best = std::min(best, packed_distance(packed[idx[a]], packed[idx[b]]));
        }
        d_sum += best;
      }
      d_acc += d_sum / static_cast<double>(k);
    }
    fit.d_values.push_back(d_acc / repeats);
  }
  for (double d : fit.d_values)
    if (!(d > 0.0))
      throw NumericError(
          "fractal: zero mean nearest-neighbor distance (duplicate-dominated "
          "sample), fit rejected");

  // least squares of log d on log K
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  double m = static_cast<double>(k_schedule.size());
  for (size_t i = 0; i < k_schedule.size(); ++i) {
    double x = std::log(static_cast<double>(k_schedule[i]));
    double y = std::log(fit.d_values[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
  }
  double denom = m * sxx - sx * sx;
  fit.slope = (m * sxy - sx * sy) / denom;
  double ss_tot = syy - sy * sy / m;
  double ss_res = 0.0;
  double intercept = (sy - fit.slope * sx) / m;
  for (size_t i = 0; i < k_schedule.size(); ++i) {
    double x = std::log(static_cast<double>(k_schedule[i]));
    double y = std::log(fit.d_values[i]);
    double r = y - (intercept + fit.slope * x);
    ss_res += r * r;
  }
  fit.fit_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (fit.slope >= 0.0) {
    std::ostringstream msg;
    msg << "fractal: non-negative log-log slope " << fit.slope
        << ", no shrinking trend; d values:";
    for (double d : fit.d_values) msg << " " << d;
    throw NumericError(msg.str());
  }
  fit.delta = -1.0 / fit.slope;
  return fit;
}

PageCurve page_curve(Mps& mps, int plateau_lo, int plateau_hi) {
  const int n = mps.n_sites();
  PageCurve out;
  out.plateau_lo = std::clamp(plateau_lo, 1, n - 1);
  out.plateau_hi = std::clamp(plateau_hi, out.plateau_lo, n - 1);
  out.s_k.reserve(n - 1);
  // Successive cuts move the center one site at a time; one sweep total.
  for (int cut = 1; cut <= n - 1; ++cut) {
    auto spectrum = mps.schmidt_spectrum(cut);
    out.s_k.push_back(entanglement_entropy(spectrum));
  }
  double acc = 0.0;
  for (int k = out.plateau_lo; k <= out.plateau_hi; ++k) acc += out.s_k[k - 1];
  out.s_bar = acc / static_cast<double>(out.plateau_hi - out.plateau_lo + 1);
  return out;
}

NeatThreshold neat_threshold(const Mps& mps, const QualityOracle& oracle,
                             const std::vector<double>& e_grid,
                             int samples_per_bin, std::uint64_t seed,
                             double window_half_width) {
  if (e_grid.size() < 2) throw InputError("neat_threshold: grid needs >= 2 points");
  for (size_t i = 1; i < e_grid.size(); ++i)
    if (e_grid[i] <= e_grid[i - 1])
      throw InputError("neat_threshold: grid must be strictly increasing");
  if (samples_per_bin < 2)
    throw InputError("neat_threshold: need at least 2 samples per bin");
  double w = window_half_width;
  if (!(w > 0.0)) w = 0.5 * (e_grid[1] - e_grid[0]);

  int h = 1, wid = mps.n_sites();
  QualityProfile profile;
  profile.e_grid = e_grid;
  for (size_t gi = 0; gi < e_grid.size(); ++gi) {
    SampleRequest req;
    req.count = samples_per_bin;
    req.seed = mix_seed(seed, gi);
    req.energy_window = {{e_grid[gi] - w, e_grid[gi] + w}};
    req.height = h;
    req.width = wid;
    SampleBatch batch = sample_batch(mps, req);
    double mean = 0.0;
    std::vector<double> scores;
    scores.reserve(batch.set.size());
    for (const auto& im : batch.set.images) {
      double q = oracle(im);
      scores.push_back(q);
      mean += q;
    }
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double q : scores) var += (q - mean) * (q - mean);
    var /= static_cast<double>(scores.size());
    profile.mean_quality.push_back(mean);
    profile.std_quality.push_back(std::sqrt(var));
  }

  double base_mean = profile.mean_quality[0];
  double base_std = profile.std_quality[0];
  for (size_t gi = 1; gi < e_grid.size(); ++gi) {
    if (profile.mean_quality[gi] < base_mean - base_std) {
      return {e_grid[gi], std::move(profile)};
    }
  }
  std::ostringstream msg;
  msg << "neat_threshold: no grid energy separates from the E0 bin; profile:";
  for (size_t gi = 0; gi < e_grid.size(); ++gi)
    msg << " (E=" << e_grid[gi] << ", mean=" << profile.mean_quality[gi]
        << ", std=" << profile.std_quality[gi] << ")";
  throw ThresholdNotFoundError(msg.str());
}

}  // namespace mpsw
