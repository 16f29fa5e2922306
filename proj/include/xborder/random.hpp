#pragma once
// Reproducible random streams: every replication / purpose gets its own
// generator derived from (master seed, stream tag, replication index), so
// results do not depend on execution order.

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace xborder {

using Rng = std::mt19937_64;

// Stream tags keep the different consumers of randomness independent.
enum class Stream : std::uint64_t {
  Orders = 1,
  Reinit = 2,
  InitialQueues = 3,
  Brownian = 4,
  MonteCarlo = 5,
};

inline Rng make_rng(std::uint64_t master, Stream tag, std::uint64_t replication = 0) {
  const auto t = static_cast<std::uint64_t>(tag);
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(replication),
                    static_cast<std::uint32_t>(replication >> 32)};
  return Rng(seq);
}

// Uniform double in [0,1) from 53 random bits (platform independent).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Fast standard normal sampler (ziggurat).
class NormalSampler {
 public:
  double operator()(Rng& rng) { return dist_(rng); }

 private:
  boost::random::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace xborder
