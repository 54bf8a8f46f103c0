#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mpsw/dataio.hpp"
#include "mpsw/mps.hpp"

namespace mpsw {

// E(x) = -ln|Psi(x)|^2 in nats; +inf when the amplitude underflows to zero.
double energy(const Mps& mps, const BinaryImage& x);

struct EnergyStats {
  std::vector<double> energies;
  double e0;        // soft minimum, -ln<e^-E>
  double e_ground;  // min E over the set
  double mean_e;
  std::string set_tag;
  long n_infinite;  // samples whose amplitude underflowed
};

EnergyStats energy_stats(const Mps& mps, const Dataset& set,
                         const std::string& tag);

// -ln(mean e^-E), evaluated with a max-shift for stability. Infinite
// energies contribute zero weight.
double soft_min_energy(const std::vector<double>& energies);

struct FullSetSize {
  double v;             // bits, E0 / ln 2
  double ln_nf;         // E0 + ln(rho(E0) * dE)
  double epsilon_star;  // nats; NaN when not calibrated
  double delta_e;
};

FullSetSize full_set_size(double e0, double rho_at_e0, double delta_e,
                          double epsilon_star = std::nan(""));

// Gaussian kernel density estimate; bandwidth by Silverman's rule unless
// given. Degenerate (zero-spread) input falls back to a tiny bandwidth.
class Kde {
 public:
  Kde(std::vector<double> data, std::optional<double> bandwidth = {});
  double operator()(double x) const;
  double bandwidth() const { return bandwidth_; }
  bool degenerate() const { return degenerate_; }

 private:
  std::vector<double> data_;
  double bandwidth_;
  bool degenerate_ = false;
};

struct HammingStats {
  double mean_pairwise;
  double std_pairwise;
  double mean_black_pixels;
  double random_baseline;  // 2 q (1-q) n at matched pixel density
  long n_pairs;
};

int hamming_distance(const BinaryImage& a, const BinaryImage& b);

HammingStats hamming_stats(const Dataset& set, long pair_budget,
                           std::uint64_t seed);

struct FractalFit {
  std::vector<long> k_values;
  std::vector<double> d_values;  // mean nearest-neighbor distance per K
  double slope;                  // log-log least squares slope
  double delta;                  // -1 / slope
  double fit_r2;
};

// Mean nearest-neighbor Hamming distance vs subsample size, fitted in
// log-log coordinates. Throws NumericError when no shrinking trend exists.
FractalFit fractal_dimension(const Dataset& set,
                             const std::vector<long>& k_schedule,
                             std::uint64_t seed);

struct PageCurve {
  std::vector<double> s_k;  // entropy at cut k = 1..n-1 (index k-1)
  int plateau_lo;
  int plateau_hi;
  double s_bar;
};

// One canonical sweep across all cuts; plateau bounds are clamped to
// [1, n-1] before averaging.
PageCurve page_curve(Mps& mps, int plateau_lo, int plateau_hi);

// Image quality in [0,1]; higher is better.
using QualityOracle = std::function<double(const BinaryImage&)>;

struct QualityProfile {
  std::vector<double> e_grid;
  std::vector<double> mean_quality;
  std::vector<double> std_quality;
};

struct NeatThreshold {
  double epsilon_star;
  QualityProfile profile;
};

// Smallest grid energy whose oracle-quality mean drops below the quality at
// the first grid point (taken near E0) by at least one standard deviation.
NeatThreshold neat_threshold(const Mps& mps, const QualityOracle& oracle,
                             const std::vector<double>& e_grid,
                             int samples_per_bin, std::uint64_t seed,
                             double window_half_width = 0.0);

}  // namespace mpsw
