#ifndef CK_RNG_HPP
#define CK_RNG_HPP

#include <cstdint>
#include <span>
#include <string_view>

namespace ck {

// splitmix64 finalizer; used to turn arbitrary key tuples into stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Combine a seed with stream identifiers (individual index, dimension, ...).
// Associative-looking but order-sensitive on purpose: mix_key(s,a,b) != mix_key(s,b,a).
std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a);
std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b);
std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

// FNV-1a hash of a string id. Stable across platforms.
std::uint64_t fnv1a(std::string_view s);

// Small deterministic generator (xoshiro256**), seeded via splitmix64.
// All library randomness flows through keyed instances of this class so that
// results depend only on (seed, stream key), never on call order.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1): never returns 0 or 1.
  double uniform01();

  double uniform(double lo, double hi);

  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p);

  // Index sampled according to probs (assumed nonnegative, summing to ~1).
  int categorical(std::span<const double> probs);

private:
  std::uint64_t s_[4];
};

}  // namespace ck

#endif
