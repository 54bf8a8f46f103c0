#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "mpsw/dataio.hpp"
#include "mpsw/mps.hpp"

namespace mpsw {

struct TrainConfig {
  int bond_cap = 100;
  double eta = 3.14159265358979323846 / 36.0;  // TSGO rotation angle
  int max_epochs = 10;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  bool early_stop = false;
  double svd_cutoff = 1e-12;
  int plateau_lo = 200;  // Page-curve plateau for the per-epoch trace,
  int plateau_hi = 600;  // clamped to [1, n-1]
  bool trace_entropy = true;
};

struct EpochRecord {
  int epoch;
  double mean_loss;       // <E>_tr over the full training set
  double e0_train;        // -ln<e^-E>_tr
  double quality;         // monitor value, NaN if no monitor attached
  double plateau_entropy; // S-bar, NaN if not traced
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
};

// Maps a model snapshot to a quality score in [0,1]; used for early stopping.
using QualityMonitor = std::function<double(const Mps&)>;

struct TrainResult {
  Mps model;
  TrainTrace trace;
};

// Per-sample energies E(x) = -ln|Psi(x)|^2; +inf for zero amplitudes.
std::vector<double> sample_energies(const Mps& mps, const Dataset& batch);

// Eq.-style NLL over the batch; +inf if any sample has zero amplitude.
double nll_loss(const Mps& mps, const Dataset& batch);

// Merged two-site tensor of sites (site, site+1) as a (2l) x (2r) matrix;
// row block = left-site bit, column block = right-site bit.
Eigen::MatrixXd merged_pair(const Mps& mps, int site);

// Analytic gradient of  <Psi|Psi> - (1/N) sum ln |<x|Psi>|^2  with respect to
// the merged tensor. Requires the orthogonality center at site or site+1.
Eigen::MatrixXd two_site_gradient(const Mps& mps, int site, const Dataset& batch);

// Norm-preserving rotation towards the negative tangent gradient.
Eigen::MatrixXd tsgo_step(const Eigen::MatrixXd& merged,
                          const Eigen::MatrixXd& gradient, double eta);

enum class SplitDirection { left, right };

struct SplitResult {
  SiteTensor left;
  SiteTensor right;
  std::vector<double> kept_spectrum;   // renormalized to unit 2-norm
  double truncation_error_sq;          // sum of squares of dropped values
};

// SVD split of a merged (2l) x (2r) tensor; keeps at most bond_cap singular
// values, drops those below cutoff * largest, renormalizes the kept spectrum,
// and absorbs it on the side named by direction (the new center side).
SplitResult split_truncate(const Eigen::MatrixXd& merged,
                           SplitDirection direction, int bond_cap,
                           double cutoff);

// Uniform(-1,1) init at capped bond dimension, canonicalized to site 0.
Mps initial_model(int n_sites, const TrainConfig& config);

// Two-site DMRG-style sweeps; one epoch = one left-to-right plus one
// right-to-left sweep. With early_stop and a monitor, returns the snapshot
// of maximal monitored quality.
TrainResult train(Mps model, const Dataset& train_set, const TrainConfig& config,
                  QualityMonitor monitor = nullptr);

}  // namespace mpsw
