#include "mpsw/classify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace mpsw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_score(const Mps& model, const BinaryImage& x) {
  auto la = model.log_amplitude(x.bits);
  return la.is_zero() ? kNegInf : la.log_prob();
}
}  // namespace

int ClassifierEnsemble::n_sites() const {
  if (models.empty()) throw InputError("ensemble: no models");
  return models.begin()->second.n_sites();
}

void ClassifierEnsemble::save_dir(const std::string& dir) const {
  fs::create_directories(dir);
  json thr = json::object();
  for (const auto& [label, model] : models) {
    model.save_file(dir + "/model_" + std::to_string(label) + ".mpsw");
    auto it = log_thresholds.find(label);
    if (it != log_thresholds.end())
      thr[std::to_string(label)] = {{"log_epsilon", it->second},
                                    {"epsilon", std::exp(it->second)}};
  }
  std::ofstream out(dir + "/thresholds.json");
  if (!out) throw ParseError("ensemble: cannot write thresholds.json");
  out << thr.dump(2) << "\n";
}

ClassifierEnsemble ClassifierEnsemble::load_dir(const std::string& dir) {
  ClassifierEnsemble e;
  for (int label = 0; label <= 9; ++label) {
    std::string path = dir + "/model_" + std::to_string(label) + ".mpsw";
    if (fs::exists(path)) e.models.emplace(label, Mps::load_file(path));
  }
  if (e.models.empty())
    throw ParseError("ensemble: no model_<i>.mpsw files in " + dir);
  int n = e.n_sites();
  for (const auto& [label, m] : e.models)
    if (m.n_sites() != n)
      throw ParseError("ensemble: models disagree on n_sites");
  std::string thr_path = dir + "/thresholds.json";
  if (fs::exists(thr_path)) {
    std::ifstream in(thr_path);
    json thr = json::parse(in, nullptr, true);
    for (auto& [key, val] : thr.items())
      e.log_thresholds[std::stoi(key)] = val.at("log_epsilon").get<double>();
  }
  return e;
}

std::optional<int> classify(const ClassifierEnsemble& ensemble,
                            const BinaryImage& x) {
  if (ensemble.models.empty()) throw InputError("classify: empty ensemble");
  int best_label = -1;
  double best = kNegInf;
  for (const auto& [label, model] : ensemble.models) {
    double s = log_score(model, x);
    if (s > best) {  // strict: ties keep the smallest label
      best = s;
      best_label = label;
    }
  }
  if (best == kNegInf) return std::nullopt;
  return best_label;
}

double classification_accuracy(const ClassifierEnsemble& ensemble,
                               const Dataset& test) {
  if (test.empty()) throw InputError("classify: empty test set");
  long correct = 0;
  for (const auto& im : test.images) {
    auto label = classify(ensemble, im);
    if (label && *label == im.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

int indicator(const Mps& model, double log_epsilon, const BinaryImage& x) {
  return log_score(model, x) >= log_epsilon ? 1 : 0;
}

DiscriminationReport evaluate_threshold(const Mps& model, double log_epsilon,
                                        const Dataset& positives,
                                        const Dataset& negatives) {
  DiscriminationReport r{};
  r.log_threshold = log_epsilon;
  for (const auto& im : positives.images)
    (indicator(model, log_epsilon, im) ? r.tp : r.fn)++;
  for (const auto& im : negatives.images)
    (indicator(model, log_epsilon, im) ? r.fp : r.tn)++;
  double tpr = static_cast<double>(r.tp) / positives.size();
  double tnr = static_cast<double>(r.tn) / negatives.size();
  r.balanced_accuracy = 0.5 * (tpr + tnr);
  return r;
}

DiscriminationReport calibrate_threshold(const Mps& model,
                                         const Dataset& positives,
                                         const Dataset& negatives) {
  if (positives.empty() || negatives.empty())
    throw InputError("calibrate: both score sets must be nonempty");
  std::vector<double> pos, neg;
  pos.reserve(positives.size());
  neg.reserve(negatives.size());
  for (const auto& im : positives.images) pos.push_back(log_score(model, im));
  for (const auto& im : negatives.images) neg.push_back(log_score(model, im));

  // Candidate cut points are the observed scores themselves; the indicator
  // accepts score >= threshold.
  std::vector<double> candidates;
  candidates.reserve(pos.size() + neg.size());
  candidates.insert(candidates.end(), pos.begin(), pos.end());
  candidates.insert(candidates.end(), neg.begin(), neg.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  double np = static_cast<double>(pos.size());
  double nn = static_cast<double>(neg.size());
  double best_ba = -1.0;
  double best_thr = 0.0;
  for (double thr : candidates) {
    if (thr == kNegInf) continue;  // underflowed scores are never accepted
    auto above = [&](const std::vector<double>& v) {
      return static_cast<double>(
          v.end() - std::lower_bound(v.begin(), v.end(), thr));
    };
    double tpr = above(pos) / np;
    double tnr = (nn - above(neg)) / nn;
    double ba = 0.5 * (tpr + tnr);
    if (ba > best_ba) {  // strict: ties keep the smallest threshold
      best_ba = ba;
      best_thr = thr;
    }
  }
  if (best_ba < 0.0)
    throw NumericError("calibrate: all scores underflowed");
  return evaluate_threshold(model, best_thr, positives, negatives);
}

QualityOracle ensemble_oracle(const ClassifierEnsemble& ensemble, int label) {
  if (!ensemble.models.count(label))
    throw InputError("oracle: ensemble has no model for label " +
                     std::to_string(label));
  return [&ensemble, label](const BinaryImage& x) {
    std::vector<std::pair<int, double>> scores;
    double best = kNegInf;
    for (const auto& [lab, model] : ensemble.models) {
      double s = log_score(model, x);
      scores.emplace_back(lab, s);
      best = std::max(best, s);
    }
    if (best == kNegInf) return 0.0;
    double denom = 0.0, numer = 0.0;
    for (auto [lab, s] : scores) {
      double w = std::exp(s - best);
      denom += w;
      if (lab == label) numer = w;
    }
    return numer / denom;
  };
}

}  // namespace mpsw
