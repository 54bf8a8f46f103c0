#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "mpsw/sampling.hpp"
#include "test_util.hpp"

using namespace mpsw;
using namespace testutil;

namespace {

std::uint64_t index_of(const std::vector<std::uint8_t>& bits) {
  std::uint64_t idx = 0;
  for (auto b : bits) idx = (idx << 1) | b;
  return idx;
}

}  // namespace

TEST_CASE("sample_one: delta state always returns its string") {
  auto x = std::vector<std::uint8_t>{1, 0, 1, 1, 0};
  Mps m = delta_state(x);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    auto s = sample_one(m, rng);
    CHECK(s.bits == x);
    CHECK(s.energy == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_one requires right canonical form") {
  Mps m = Mps::random(4, 2, 1);
  m.canonicalize(2);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_one(m, rng), InputError);
}

TEST_CASE("sampler matches the uniform law (chi-square)") {
  Mps m = uniform_state(8);
  std::mt19937_64 rng(42);
  std::vector<double> counts(256, 0.0);
  const long draws = 100000;
  for (long i = 0; i < draws; ++i) counts[index_of(sample_one(m, rng).bits)] += 1;
  std::vector<double> expected(256, draws / 256.0);
  auto [stat, df] = chi2_stat(counts, expected);
  CHECK(stat < chi2_critical(df));
}

TEST_CASE("sampler joint law equals |Psi|^2 on a random MPS (chi-square)") {
  Mps m = Mps::random(8, 4, 2024);
  m.canonicalize(0);
  Eigen::VectorXd state = dense_state(m);
  const long draws = 200000;
  SampleRequest req;
  req.count = draws;
  req.seed = 7;
  auto batch = sample_batch(m, req);
  std::vector<double> counts(256, 0.0), expected(256);
  for (const auto& im : batch.set.images) counts[index_of(im.bits)] += 1;
  for (int i = 0; i < 256; ++i) expected[i] = draws * state(i) * state(i);
  auto [stat, df] = chi2_stat(counts, expected);
  CHECK(stat < chi2_critical(df));
  // recorded energies are the exact -ln|Psi|^2 of each drawn string
  for (size_t i = 0; i < 100; ++i) {
    double p = std::exp(-batch.energies[i]);
    double idx = static_cast<double>(index_of(batch.set.images[i].bits));
    double ref = state(static_cast<long>(idx));
    CHECK(p == doctest::Approx(ref * ref).epsilon(1e-9));
  }
}

TEST_CASE("sampled mean energy matches the Born-weighted average") {
  Mps m = Mps::random(7, 3, 5);
  m.canonicalize(0);
  Eigen::VectorXd state = dense_state(m);
  double mean_exact = 0.0, second = 0.0;
  for (long i = 0; i < state.size(); ++i) {
    double p = state(i) * state(i);
    if (p <= 0) continue;
    double e = -std::log(p);
    mean_exact += p * e;
    second += p * e * e;
  }
  double sd = std::sqrt(second - mean_exact * mean_exact);
  const long draws = 50000;
  SampleRequest req;
  req.count = draws;
  req.seed = 11;
  auto batch = sample_batch(m, req);
  double mean = 0.0;
  for (double e : batch.energies) mean += e;
  mean /= draws;
  CHECK(std::abs(mean - mean_exact) < 3.0 * sd / std::sqrt(double(draws)));
}

TEST_CASE("sample_conditional: fully clamped returns the clamp") {
  Mps m = uniform_state(5);
  std::vector<std::pair<int, int>> clamp{{0, 1}, {1, 0}, {2, 1}, {3, 1}, {4, 0}};
  std::mt19937_64 rng(3);
  auto s = sample_conditional(m, clamp, rng);
  CHECK(s.bits == std::vector<std::uint8_t>{1, 0, 1, 1, 0});
}

TEST_CASE("sample_conditional: Bell state clamps are perfectly correlated") {
  Mps m = bell_pair();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    auto s = sample_conditional(m, {{0, 0}}, rng);
    CHECK(s.bits == std::vector<std::uint8_t>{0, 0});
  }
}

TEST_CASE("sample_conditional matches the restricted law (chi-square)") {
  Mps m = Mps::random(8, 4, 77);
  m.canonicalize(0);
  Eigen::VectorXd state = dense_state(m);
  std::vector<std::pair<int, int>> clamp{{0, 1}, {1, 0}, {2, 0}, {3, 1}};
  // restricted distribution over the last 4 bits
  std::vector<double> probs(16, 0.0);
  double total = 0.0;
  for (int tail = 0; tail < 16; ++tail) {
    long idx = (0b1001L << 4) | tail;
    double p = state(idx) * state(idx);
    probs[tail] = p;
    total += p;
  }
  const long draws = 100000;
  std::vector<double> counts(16, 0.0), expected(16);
  std::mt19937_64 rng(5);
  for (long i = 0; i < draws; ++i) {
    auto s = sample_conditional(m, clamp, rng);
    CHECK(s.bits[0] == 1);
    CHECK(s.bits[3] == 1);
    counts[index_of(s.bits) & 0xf] += 1;
  }
  for (int i = 0; i < 16; ++i) expected[i] = draws * probs[i] / total;
  auto [stat, df] = chi2_stat(counts, expected);
  CHECK(stat < chi2_critical(df));
}

TEST_CASE("sample_conditional: impossible clamp is rejected") {
  Mps m = delta_state({0, 0, 0});
  std::mt19937_64 rng(6);
  CHECK_THROWS_AS(sample_conditional(m, {{1, 1}}, rng), ImpossibleConditionError);
  CHECK_THROWS_AS(sample_conditional(m, {{9, 0}}, rng), InputError);
  CHECK_THROWS_AS(sample_conditional(m, {{0, 0}, {0, 1}}, rng), InputError);
}

TEST_CASE("sample_batch: count zero gives an empty set") {
  Mps m = uniform_state(3);
  SampleRequest req;
  req.count = 0;
  auto batch = sample_batch(m, req);
  CHECK(batch.set.empty());
  CHECK(batch.set.split_tag == SplitTag::sampled);
}

TEST_CASE("sample_batch: determinism and stream independence") {
  Mps m = Mps::random(6, 3, 9);
  m.canonicalize(0);
  SampleRequest req;
  req.count = 200;
  req.seed = 31337;
  auto a = sample_batch(m, req);
  auto b = sample_batch(m, req);
  REQUIRE(a.set.size() == b.set.size());
  for (size_t i = 0; i < a.set.size(); ++i)
    CHECK(a.set.images[i].bits == b.set.images[i].bits);
  req.seed = 31338;
  auto c = sample_batch(m, req);
  bool any_diff = false;
  for (size_t i = 0; i < a.set.size(); ++i)
    any_diff |= a.set.images[i].bits != c.set.images[i].bits;
  CHECK(any_diff);
}

TEST_CASE("sample_batch: energy window on a two-outcome state") {
  // amplitudes sqrt(0.9), sqrt(0.1) -> energies ln(1/0.9), ln(1/0.1)
  std::vector<SiteTensor> sites(1);
  sites[0].m[0] = Eigen::MatrixXd::Constant(1, 1, std::sqrt(0.9));
  sites[0].m[1] = Eigen::MatrixXd::Constant(1, 1, std::sqrt(0.1));
  Mps m(std::move(sites), 1, 0);
  double eg = -std::log(0.9);
  SampleRequest req;
  req.count = 100;
  req.seed = 1;
  req.energy_window = {{eg - 1e-9, eg + 1e-9}};
  auto batch = sample_batch(m, req);
  for (const auto& im : batch.set.images) CHECK(im.bits[0] == 0);
}

TEST_CASE("sample_batch: infeasible window errors out") {
  Mps m = uniform_state(4);  // all energies are exactly 4 ln 2
  SampleRequest req;
  req.count = 1;
  req.seed = 2;
  req.energy_window = {{100.0, 200.0}};
  CHECK_THROWS_AS(sample_batch(m, req), InfeasibleWindowError);
  req.energy_window = {{5.0, 1.0}};
  CHECK_THROWS_AS(sample_batch(m, req), InputError);
}
