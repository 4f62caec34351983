#ifndef CK_MIXING_HPP
#define CK_MIXING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ck {

enum class MixingKind { Fixed, Normal, NegLogUniform, PosLogUniform };

MixingKind mixing_kind_from_string(std::string_view s);
std::string to_string(MixingKind k);

// Hyperparameters of one mixing distribution, in estimation terms:
//   Fixed           -> value (loc; spread unused)
//   Normal          -> mu (loc), sigma (spread)
//   NegLogUniform   -> -exp(a + b*xi), a (loc), b (spread)
//   PosLogUniform   -> +exp(a + b*xi)
struct MixingSpec {
  MixingKind kind = MixingKind::Fixed;
  double loc = 0.0;
  double spread = 0.0;
  // Coefficients sharing a base id consume the same underlying uniform.
  std::string shared_base;
};

// Coefficient value for one base draw xi. Normal requires xi in (0,1);
// the log-uniform transforms accept the closed interval.
double transform_draw(const MixingSpec& spec, double xi);

// Analytic mean of the mixture.
double mixture_mean(const MixingSpec& spec);

// Modified Latin Hypercube Sampling base draws: for every (individual,
// dimension) a 1/R lattice with one uniform shift, randomly shuffled.
// Blocks depend only on (seed, key, dimension), never on generation order.
class DrawMatrix {
public:
  DrawMatrix() = default;
  DrawMatrix(std::size_t n, int dims, int draws, std::uint64_t seed);

  // Draw block for an arbitrary stream key (used for prediction streams).
  static std::vector<double> block(std::uint64_t seed, std::uint64_t key, int dims, int draws);

  std::size_t individuals() const { return n_; }
  int dims() const { return dims_; }
  int draws() const { return draws_; }
  std::uint64_t seed() const { return seed_; }

  // xi for (individual n, dimension d, draw r)
  double xi(std::size_t n, int d, int r) const {
    return data_[(n * dims_ + d) * draws_ + r];
  }
  std::span<const double> dim_block(std::size_t n, int d) const {
    return {data_.data() + (n * dims_ + d) * draws_, static_cast<std::size_t>(draws_)};
  }

private:
  std::size_t n_ = 0;
  int dims_ = 0;
  int draws_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> data_;
};

DrawMatrix mlhs_draws(std::size_t n_individuals, int dims, int draws, std::uint64_t seed);

}  // namespace ck

#endif
