#pragma once

#include <cstdint>
#include <random>

namespace msna {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (master, stream tag, replication,
// config). Every random consumer in a run gets its own derived stream so
// that runs are reproducible and replications are independent.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t replication = 0,
                                 std::uint64_t config = 0) {
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  s ^= (stream + 1) * 0xd1b54a32d192ed03ULL;
  out ^= splitmix64(s);
  s ^= (replication + 1) * 0x8cb92ba72f3d8dd7ULL;
  out ^= splitmix64(s);
  s ^= (config + 1) * 0x2545f4914f6cdd1dULL;
  out ^= splitmix64(s);
  return out;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Stream tags for derive_seed; keeps the harness and tests in agreement.
enum class Stream : std::uint64_t {
  model = 1,       // synthetic model (orthogonal basis, theta*)
  data = 2,        // sample stream
  init = 3,        // initial iterate
  mask = 4,        // coordinate masks
  monte_carlo = 5, // reference Hessian estimation
  shuffle = 6,     // dataset split shuffling
  test_data = 7,   // held-out evaluation batch
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t replication = 0,
                                 std::uint64_t config = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(stream), replication, config);
}

}  // namespace msna
