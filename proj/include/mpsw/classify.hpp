#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpsw/analysis.hpp"
#include "mpsw/dataio.hpp"
#include "mpsw/mps.hpp"

namespace mpsw {

// One trained model per label plus per-label discrimination thresholds.
// Thresholds are stored as log|Psi|^2 internally; the probability-scale
// value is exp of that.
struct ClassifierEnsemble {
  std::map<int, Mps> models;
  std::map<int, double> log_thresholds;

  int n_sites() const;
  void save_dir(const std::string& dir) const;
  static ClassifierEnsemble load_dir(const std::string& dir);
};

// argmax over labels of |Psi_i(x)|^2, ties broken by smallest label.
// Returns nullopt when every model's amplitude underflows to zero.
std::optional<int> classify(const ClassifierEnsemble& ensemble,
                            const BinaryImage& x);

double classification_accuracy(const ClassifierEnsemble& ensemble,
                               const Dataset& test);

// Eq.-(1)-style full-set membership: 1 iff |Psi(x)|^2 >= epsilon.
int indicator(const Mps& model, double log_epsilon, const BinaryImage& x);

struct DiscriminationReport {
  double log_threshold;      // log epsilon maximizing balanced accuracy
  double balanced_accuracy;  // (TPR + TNR) / 2
  long tp, fn, tn, fp;
};

// Sweeps epsilon over all observed scores; ties resolved toward the
// smallest threshold.
DiscriminationReport calibrate_threshold(const Mps& model,
                                         const Dataset& positives,
                                         const Dataset& negatives);

DiscriminationReport evaluate_threshold(const Mps& model, double log_epsilon,
                                        const Dataset& positives,
                                        const Dataset& negatives);

// Normalized ensemble probability p_i = |Psi_i(x)|^2 / sum_j |Psi_j(x)|^2
// for the given label; the built-in sampling-quality oracle.
QualityOracle ensemble_oracle(const ClassifierEnsemble& ensemble, int label);

}  // namespace mpsw
