#include "mpsw/training.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mpsw/analysis.hpp"

namespace mpsw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_batch(const Mps& mps, const Dataset& batch) {
  if (batch.empty()) throw InputError("training: empty batch");
  for (const auto& im : batch.images)
    if (im.n_pixels() != mps.n_sites())
      throw InputError("training: image length does not match model");
}

// Accumulates the per-sample outer-product term of the analytic gradient.
// Environment vectors may be renormalized arbitrarily: their scales cancel
// between the outer product and the local amplitude.
Eigen::MatrixXd gradient_from_envs(const Eigen::MatrixXd& merged, long l, long r,
                                   const std::vector<Eigen::RowVectorXd>& lenv,
                                   const std::vector<Eigen::RowVectorXd>& renv,
                                   const Dataset& batch, int site) {
  const size_t n = batch.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * l, 2 * r);
  for (size_t s = 0; s < n; ++s) {
    int b1 = batch.images[s].bits[site];
    int b2 = batch.images[s].bits[site + 1];
    const auto& lv = lenv[s];
    const auto& rv = renv[s];
    double psi = lv * merged.block(b1 * l, b2 * r, l, r) * rv.transpose();
    if (psi == 0.0 || !std::isfinite(psi))
      throw DivergentGradientError(
          "training: zero amplitude for sample " + std::to_string(s) +
          " at bond " + std::to_string(site),
          static_cast<long>(s));
    w.block(b1 * l, b2 * r, l, r) += (lv.transpose() * rv) / psi;
  }
  return 2.0 * merged - (2.0 / static_cast<double>(n)) * w;
}

Eigen::RowVectorXd normalized_or_zero(Eigen::RowVectorXd v) {
  double nv = v.norm();
  if (nv > 0.0) v /= nv;
  return v;
}

struct SweepState {
  // Per-sample environment row vectors; renormalized, scales irrelevant.
  std::vector<Eigen::RowVectorXd> left;
  std::vector<Eigen::RowVectorXd> right;
};

}  // namespace

std::vector<double> sample_energies(const Mps& mps, const Dataset& batch) {
  check_batch(mps, batch);
  std::vector<double> out(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    auto la = mps.log_amplitude(batch.images[i].bits);
    out[i] = la.is_zero() ? kInf : -la.log_prob();
  }
  return out;
}

double nll_loss(const Mps& mps, const Dataset& batch) {
  auto e = sample_energies(mps, batch);
  double sum = 0.0;
  for (double v : e) {
    if (v == kInf) return kInf;
    sum += v;
  }
  return sum / static_cast<double>(e.size());
}

Eigen::MatrixXd merged_pair(const Mps& mps, int site) {
  if (site < 0 || site + 1 >= mps.n_sites())
    throw InputError("training: pair site out of range");
  const auto& a = mps.site(site);
  const auto& b = mps.site(site + 1);
  long l = a.left(), r = b.right();
  Eigen::MatrixXd m(2 * l, 2 * r);
  for (int p1 = 0; p1 < 2; ++p1)
    for (int p2 = 0; p2 < 2; ++p2)
      m.block(p1 * l, p2 * r, l, r) = a.m[p1] * b.m[p2];
  return m;
}

Eigen::MatrixXd two_site_gradient(const Mps& mps, int site, const Dataset& batch) {
  check_batch(mps, batch);
  if (mps.ortho_center() != site && mps.ortho_center() != site + 1)
    throw InputError("training: gradient requires the center at the updated pair");
  long l = mps.site(site).left();
  long r = mps.site(site + 1).right();
  std::vector<Eigen::RowVectorXd> lenv(batch.size()), renv(batch.size());
  for (size_t s = 0; s < batch.size(); ++s) {
    const auto& bits = batch.images[s].bits;
    Eigen::RowVectorXd lv = Eigen::RowVectorXd::Ones(1);
    for (int i = 0; i < site; ++i)
      lv = normalized_or_zero(lv * mps.site(i).m[bits[i]]);
    Eigen::RowVectorXd rv = Eigen::RowVectorXd::Ones(1);
    for (int i = mps.n_sites() - 1; i > site + 1; --i)
      rv = normalized_or_zero(rv * mps.site(i).m[bits[i]].transpose());
    lenv[s] = lv;
    renv[s] = rv;
  }
  return gradient_from_envs(merged_pair(mps, site), l, r, lenv, renv, batch, site);
}

Eigen::MatrixXd tsgo_step(const Eigen::MatrixXd& merged,
                          const Eigen::MatrixXd& gradient, double eta) {
  double a_norm = merged.norm();
  if (!(a_norm > 0.0))
    throw InputError("tsgo: zero-norm merged tensor");
  double overlap = (gradient.array() * merged.array()).sum();
  Eigen::MatrixXd tangent =
      gradient - (overlap / (a_norm * a_norm)) * merged;
  double t_norm = tangent.norm();
  if (t_norm <= 1e-15 * std::max(1.0, gradient.norm())) return merged;
  return std::cos(eta) * merged - std::sin(eta) * a_norm * (tangent / t_norm);
}

SplitResult split_truncate(const Eigen::MatrixXd& merged,
                           SplitDirection direction, int bond_cap,
                           double cutoff) {
  if (bond_cap < 1) throw InputError("split: bond_cap must be positive");
  if (cutoff < 0.0) throw InputError("split: cutoff must be non-negative");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      merged, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0))
    throw DegenerateStateError("split: all singular values are zero");
  long keep = 0;
  while (keep < sv.size() && keep < bond_cap && sv(keep) > cutoff * sv(0))
    ++keep;
  keep = std::max<long>(keep, 1);
  double kept_sq = sv.head(keep).squaredNorm();
  double total_sq = sv.squaredNorm();
  Eigen::VectorXd spectrum = sv.head(keep) / std::sqrt(kept_sq);

  Eigen::MatrixXd u = svd.matrixU().leftCols(keep);
  Eigen::MatrixXd vt = svd.matrixV().leftCols(keep).transpose();
  SplitResult out;
  out.truncation_error_sq = total_sq - kept_sq;
  out.kept_spectrum.assign(spectrum.data(), spectrum.data() + keep);
  if (direction == SplitDirection::right) {
    out.left = site_from_rows(u);
    out.right = site_from_cols(spectrum.asDiagonal() * vt);
  } else {
    out.left = site_from_rows(u * spectrum.asDiagonal());
    out.right = site_from_cols(vt);
  }
  return out;
}

Mps initial_model(int n_sites, const TrainConfig& config) {
  Mps m = Mps::random(n_sites, config.bond_cap, config.seed);
  m.canonicalize(0);
  return m;
}

namespace {

// One full sweep updating every bond once. Direction right means bonds
// 0..n-2 with the center moving right; left is the mirror image.
void sweep(Mps& model, const Dataset& batch, const TrainConfig& cfg,
           SplitDirection dir) {
  const int n = model.n_sites();
  const size_t ns = batch.size();
  SweepState env;
  env.left.assign(ns, Eigen::RowVectorXd::Ones(1));
  env.right.assign(ns, Eigen::RowVectorXd::Ones(1));

  if (dir == SplitDirection::right) {
    // Right environments for every bond, computed before any update; sites
    // to the right of the active pair are untouched until the sweep passes.
    std::vector<std::vector<Eigen::RowVectorXd>> renv(n + 1);
    renv[n].assign(ns, Eigen::RowVectorXd::Ones(1));
    for (int i = n - 1; i >= 2; --i) {
      renv[i].resize(ns);
      for (size_t s = 0; s < ns; ++s)
        renv[i][s] = normalized_or_zero(
            renv[i + 1][s] * model.site(i).m[batch.images[s].bits[i]].transpose());
    }
    for (int bond = 0; bond <= n - 2; ++bond) {
      Eigen::MatrixXd m = merged_pair(model, bond);
      long l = model.site(bond).left();
      long r = model.site(bond + 1).right();
      Eigen::MatrixXd g =
          gradient_from_envs(m, l, r, env.left, renv[bond + 2], batch, bond);
      Eigen::MatrixXd updated = tsgo_step(m, g, cfg.eta);
      SplitResult sp = split_truncate(updated, SplitDirection::right,
                                      cfg.bond_cap, cfg.svd_cutoff);
      model.set_pair(bond, std::move(sp.left), std::move(sp.right), bond + 1);
      for (size_t s = 0; s < ns; ++s)
        env.left[s] = normalized_or_zero(
            env.left[s] * model.site(bond).m[batch.images[s].bits[bond]]);
    }
  } else {
    std::vector<std::vector<Eigen::RowVectorXd>> lenv(n + 1);
    lenv[0].assign(ns, Eigen::RowVectorXd::Ones(1));
    for (int i = 1; i <= n - 2; ++i) {
      lenv[i].resize(ns);
      for (size_t s = 0; s < ns; ++s)
        lenv[i][s] = normalized_or_zero(
            lenv[i - 1][s] * model.site(i - 1).m[batch.images[s].bits[i - 1]]);
    }
    for (int bond = n - 2; bond >= 0; --bond) {
      Eigen::MatrixXd m = merged_pair(model, bond);
      long l = model.site(bond).left();
      long r = model.site(bond + 1).right();
      Eigen::MatrixXd g =
          gradient_from_envs(m, l, r, lenv[bond], env.right, batch, bond);
      Eigen::MatrixXd updated = tsgo_step(m, g, cfg.eta);
      SplitResult sp = split_truncate(updated, SplitDirection::left,
                                      cfg.bond_cap, cfg.svd_cutoff);
      model.set_pair(bond, std::move(sp.left), std::move(sp.right), bond);
      for (size_t s = 0; s < ns; ++s)
        env.right[s] = normalized_or_zero(
            env.right[s] *
            model.site(bond + 1).m[batch.images[s].bits[bond + 1]].transpose());
    }
  }
}

}  // namespace

TrainResult train(Mps model, const Dataset& train_set, const TrainConfig& config,
                  QualityMonitor monitor) {
  check_batch(model, train_set);
  if (config.max_epochs < 1) throw InputError("train: max_epochs must be positive");
  if (!(config.eta > 0.0 && config.eta < 1.5707963267948966))
    throw InputError("train: eta must be in (0, pi/2)");
  if (model.ortho_center() != 0) model.canonicalize(0);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // force initial shuffle
  auto next_batch = [&]() -> Dataset {
    size_t bs = config.batch_size > 0
                    ? std::min<size_t>(config.batch_size, train_set.size())
                    : train_set.size();
    if (bs == train_set.size()) return train_set;
    Dataset b;
    b.split_tag = train_set.split_tag;
    for (size_t i = 0; i < bs; ++i) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      b.images.push_back(train_set.images[order[cursor++]]);
    }
    return b;
  };

  TrainTrace trace;
  double best_quality = -kInf;
  std::optional<Mps> best_model;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    sweep(model, next_batch(), config, SplitDirection::right);
    sweep(model, next_batch(), config, SplitDirection::left);

    auto energies = sample_energies(model, train_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss =
        std::accumulate(energies.begin(), energies.end(), 0.0) /
        static_cast<double>(energies.size());
    rec.e0_train = soft_min_energy(energies);
    rec.quality = std::numeric_limits<double>::quiet_NaN();
    rec.plateau_entropy = std::numeric_limits<double>::quiet_NaN();
    if (config.trace_entropy) {
      int lo = std::clamp(config.plateau_lo, 1, model.n_sites() - 1);
      int hi = std::clamp(config.plateau_hi, lo, model.n_sites() - 1);
      Mps probe = model;
      rec.plateau_entropy = page_curve(probe, lo, hi).s_bar;
    }
    if (monitor) {
      rec.quality = monitor(model);
      if (rec.quality > best_quality) {
        best_quality = rec.quality;
        if (config.early_stop) best_model = model;
      }
    }
    trace.epochs.push_back(rec);
  }
  if (config.early_stop && best_model) model = std::move(*best_model);
  return {std::move(model), std::move(trace)};
}

}  // namespace mpsw
