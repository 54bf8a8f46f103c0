#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mpsw/training.hpp"
#include "test_util.hpp"

using namespace mpsw;
using namespace testutil;

namespace {

Dataset random_batch(int n, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  for (int i = 0; i < count; ++i) d.images.push_back(image_of(random_bits(n, rng)));
  return d;
}

}  // namespace

TEST_CASE("nll_loss: delta model on its own sample") {
  auto x = std::vector<std::uint8_t>{1, 0, 1};
  Mps m = delta_state(x);
  Dataset d;
  d.images.push_back(image_of(x));
  CHECK(nll_loss(m, d) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("nll_loss: uniform state gives n ln 2") {
  Mps m = uniform_state(6);
  Dataset d = random_batch(6, 5, 1);
  CHECK(nll_loss(m, d) == doctest::Approx(6 * std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("nll_loss matches the dense enumeration oracle") {
  Mps m = Mps::random(6, 3, 5);
  m.canonicalize(0);
  Dataset d = random_batch(6, 3, 2);
  Eigen::VectorXd state = dense_state(m);
  double expect = 0.0;
  for (const auto& im : d.images) {
    std::uint64_t idx = 0;
    for (auto b : im.bits) idx = (idx << 1) | b;
    expect -= std::log(state(idx) * state(idx)) / d.size();
  }
  CHECK(nll_loss(m, d) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("nll_loss: zero-amplitude sample reports infinite loss") {
  Mps m = delta_state({0, 0, 0});
  Dataset d;
  d.images.push_back(image_of({1, 1, 1}));
  CHECK(std::isinf(nll_loss(m, d)));
}

TEST_CASE("two_site_gradient matches central finite differences") {
  for (std::uint64_t seed : {3u, 4u}) {
    Mps m = Mps::random(6, 3, seed);
    Dataset batch = random_batch(6, 4, seed + 100);
    for (int site : {0, 2, 4}) {
      m.canonicalize(site);
      Eigen::MatrixXd merged = merged_pair(m, site);
      Eigen::MatrixXd grad = two_site_gradient(m, site, batch);
      const double h = 1e-5;
      for (long i = 0; i < merged.rows(); ++i) {
        for (long j = 0; j < merged.cols(); ++j) {
          Eigen::MatrixXd up = merged, dn = merged;
          up(i, j) += h;
          dn(i, j) -= h;
          double fd = (dense_objective(m, site, up, batch) -
                       dense_objective(m, site, dn, batch)) /
                      (2 * h);
          CHECK(grad(i, j) == doctest::Approx(fd).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("gradient vanishes at the delta-state global minimum") {
  auto x = std::vector<std::uint8_t>{0, 1, 1, 0};
  Mps m = delta_state(x);
  m.move_center(1);
  Dataset d;
  d.images.push_back(image_of(x));
  CHECK(two_site_gradient(m, 1, d).norm() < 1e-8);
}

TEST_CASE("gradient vanishes for the uniform state on the full batch") {
  Mps m = uniform_state(6);
  Dataset d;
  for (std::uint64_t x = 0; x < 64; ++x) d.images.push_back(image_of(bits_of(x, 6)));
  m.move_center(2);
  CHECK(two_site_gradient(m, 2, d).norm() < 1e-8);
}

TEST_CASE("gradient flags zero-amplitude samples") {
  Mps m = delta_state({0, 0, 0});
  Dataset d;
  d.images.push_back(image_of({1, 1, 1}));
  CHECK_THROWS_AS(two_site_gradient(m, 0, d), DivergentGradientError);
}

TEST_CASE("tsgo: gradient parallel to the tensor is a no-op") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4);
  Eigen::MatrixXd g = 3.7 * a;
  CHECK((tsgo_step(a, g, 0.1) - a).norm() == doctest::Approx(0.0));
}

TEST_CASE("tsgo: quarter rotation example") {
  Eigen::MatrixXd a(1, 2), g(1, 2);
  a << 1, 0;
  g << 0, 1;
  Eigen::MatrixXd out = tsgo_step(a, g, std::numbers::pi / 2);
  CHECK(out(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("tsgo preserves the norm") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 5);
    Eigen::MatrixXd g = Eigen::MatrixXd::Random(3, 5);
    Eigen::MatrixXd out = tsgo_step(a, g, std::numbers::pi / 36);
    CHECK(std::abs(out.norm() - a.norm()) < 1e-12);
  }
  CHECK_THROWS_AS(tsgo_step(Eigen::MatrixXd::Zero(2, 2),
                            Eigen::MatrixXd::Random(2, 2), 0.1),
                  InputError);
}

TEST_CASE("tsgo: 1000-step drift stays below 1e-8") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 6);
  double norm0 = a.norm();
  std::mt19937_64 rng(15);
  std::normal_distribution<double> nd;
  for (int step = 0; step < 1000; ++step) {
    Eigen::MatrixXd g(4, 6);
    for (long i = 0; i < g.size(); ++i) g(i) = nd(rng);
    a = tsgo_step(a, g, std::numbers::pi / 36);
  }
  CHECK(std::abs(a.norm() - norm0) < 1e-8);
}

TEST_CASE("split_truncate: rank-1 merged tensor reconstructs exactly") {
  Eigen::VectorXd u = Eigen::VectorXd::Random(6);
  Eigen::VectorXd v = Eigen::VectorXd::Random(4);
  Eigen::MatrixXd merged = u * v.transpose();
  auto sp = split_truncate(merged, SplitDirection::right, 8, 1e-12);
  CHECK(sp.kept_spectrum.size() == 1);
  CHECK(sp.truncation_error_sq == doctest::Approx(0.0).epsilon(1e-20));
  Eigen::MatrixXd rebuilt(6, 4);
  for (int p1 = 0; p1 < 2; ++p1)
    for (int p2 = 0; p2 < 2; ++p2)
      rebuilt.block(p1 * 3, p2 * 2, 3, 2) = sp.left.m[p1] * sp.right.m[p2];
  // spectrum is renormalized, so compare directions
  CHECK((rebuilt * merged.norm() - merged).norm() < 1e-10);
}

TEST_CASE("split_truncate: truncation error follows Eckart-Young") {
  Eigen::MatrixXd merged = Eigen::MatrixXd::Random(8, 8);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(merged);
  const auto& sv = svd.singularValues();
  int cap = 3;
  auto sp = split_truncate(merged, SplitDirection::left, cap, 0.0);
  double expect = 0.0;
  for (long i = cap; i < sv.size(); ++i) expect += sv(i) * sv(i);
  CHECK(sp.truncation_error_sq == doctest::Approx(expect).epsilon(1e-10));
  CHECK(static_cast<int>(sp.kept_spectrum.size()) == cap);
}

TEST_CASE("split_truncate: exact split preserves amplitudes") {
  Mps m = Mps::random(8, 4, 31);
  m.canonicalize(3);
  Eigen::VectorXd before = dense_state(m);
  Eigen::MatrixXd merged = merged_pair(m, 3);
  auto sp = split_truncate(merged, SplitDirection::right, 16, 0.0);
  m.set_pair(3, std::move(sp.left), std::move(sp.right), 4);
  Eigen::VectorXd after = dense_state(m);
  CHECK((after - before).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(
      split_truncate(Eigen::MatrixXd::Zero(4, 4), SplitDirection::right, 2, 0.0),
      DegenerateStateError);
}

TEST_CASE("train: a single image collapses toward a delta state") {
  std::mt19937_64 rng(77);
  Dataset d;
  d.images.push_back(image_of(random_bits(9, rng)));
  TrainConfig cfg;
  cfg.bond_cap = 2;
  cfg.max_epochs = 5;
  cfg.seed = 7;
  cfg.trace_entropy = false;
  auto result = train(initial_model(9, cfg), d, cfg);
  CHECK(nll_loss(result.model, d) < 0.01);
  REQUIRE(result.trace.epochs.size() == 5);
}

TEST_CASE("train: model stays canonical and normalized, loss decreases") {
  std::mt19937_64 rng(5);
  Dataset d;
  for (int i = 0; i < 12; ++i) {
    auto bits = random_bits(8, rng);
    bits[0] = bits[1];  // mild structure
    d.images.push_back(image_of(bits));
  }
  TrainConfig cfg;
  cfg.bond_cap = 4;
  cfg.max_epochs = 6;
  cfg.seed = 3;
  cfg.trace_entropy = false;
  Mps m0 = initial_model(8, cfg);
  double loss0 = nll_loss(m0, d);
  auto result = train(std::move(m0), d, cfg);
  CHECK(result.model.ortho_center() == 0);
  CHECK(result.model.center_squared_norm() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(dense_state(result.model).squaredNorm() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(result.trace.epochs.back().mean_loss < loss0);
  for (const auto& rec : result.trace.epochs) {
    CHECK(std::isfinite(rec.mean_loss));
    CHECK(rec.e0_train <= rec.mean_loss + 1e-12);
  }
}

TEST_CASE("train: early stopping returns the best-quality snapshot") {
  std::mt19937_64 rng(6);
  Dataset d;
  for (int i = 0; i < 8; ++i) d.images.push_back(image_of(random_bits(6, rng)));
  TrainConfig cfg;
  cfg.bond_cap = 3;
  cfg.max_epochs = 4;
  cfg.early_stop = true;
  cfg.trace_entropy = false;
  int calls = 0;
  // Quality that peaks at epoch 2, then declines.
  auto monitor = [&](const Mps&) {
    ++calls;
    return calls == 2 ? 1.0 : 0.1 * calls;
  };
  auto result = train(initial_model(6, cfg), d, cfg, monitor);
  CHECK(calls == 4);
  double best = -1;
  for (const auto& rec : result.trace.epochs) best = std::max(best, rec.quality);
  CHECK(best == doctest::Approx(1.0));
}
