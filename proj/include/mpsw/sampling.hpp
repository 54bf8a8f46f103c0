#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "mpsw/dataio.hpp"
#include "mpsw/mps.hpp"

namespace mpsw {

struct SampleRequest {
  long count = 1;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> clamped;  // (site, bit), sites distinct
  std::optional<std::pair<double, double>> energy_window;  // [E_lo, E_hi]
  int height = 0;  // image shape metadata for the returned dataset
  int width = 0;
};

struct DrawnSample {
  std::vector<std::uint8_t> bits;
  double energy;  // -ln|Psi(x)|^2, accumulated from the sampled conditionals
};

struct SampleBatch {
  Dataset set;  // split_tag = sampled
  std::vector<double> energies;
  std::uint64_t seed;
  long attempts;  // draws including window rejections
};

// Sequential Born-rule draw; requires the orthogonality center at site 0
// (right canonical form). The joint law equals |Psi(x)|^2 exactly.
DrawnSample sample_one(const Mps& mps, std::mt19937_64& rng);

// Same, with pixels clamped to fixed bits; the law is |Psi|^2 restricted to
// the clamp-consistent slice and renormalized.
DrawnSample sample_conditional(const Mps& mps,
                               const std::vector<std::pair<int, int>>& clamped,
                               std::mt19937_64& rng);

// Seeded batch with optional energy-window rejection filtering. Independent
// samples use split PRNG streams, so the batch is reproducible and
// insensitive to draw order.
SampleBatch sample_batch(const Mps& mps, const SampleRequest& req);

// Stream seeding for the k-th sample of a batch.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace mpsw
