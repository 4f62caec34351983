#include "ck/mixing.hpp"

#include <cmath>

#include "ck/error.hpp"
#include "ck/rng.hpp"
#include "ck/stats.hpp"

namespace ck {

MixingKind mixing_kind_from_string(std::string_view s) {
  if (s == "fixed") return MixingKind::Fixed;
  if (s == "normal") return MixingKind::Normal;
  if (s == "neg_log_uniform") return MixingKind::NegLogUniform;
  if (s == "pos_log_uniform") return MixingKind::PosLogUniform;
  throw ConfigError("unknown mixing kind '" + std::string(s) + "'");
}

std::string to_string(MixingKind k) {
  switch (k) {
    case MixingKind::Fixed: return "fixed";
    case MixingKind::Normal: return "normal";
    case MixingKind::NegLogUniform: return "neg_log_uniform";
    case MixingKind::PosLogUniform: return "pos_log_uniform";
  }
  return "?";
}

double transform_draw(const MixingSpec& spec, double xi) {
  switch (spec.kind) {
    case MixingKind::Fixed:
      return spec.loc;
    case MixingKind::Normal:
      if (!(xi > 0.0 && xi < 1.0))
        throw NumericError("transform_draw: normal mixing needs xi strictly inside (0,1)");
      return spec.loc + spec.spread * norm_ppf(xi);
    case MixingKind::NegLogUniform:
      if (!(xi >= 0.0 && xi <= 1.0))
        throw NumericError("transform_draw: xi outside [0,1]");
      return -std::exp(spec.loc + spec.spread * xi);
    case MixingKind::PosLogUniform:
      if (!(xi >= 0.0 && xi <= 1.0))
        throw NumericError("transform_draw: xi outside [0,1]");
      return std::exp(spec.loc + spec.spread * xi);
  }
  throw NumericError("transform_draw: bad kind");
}

double mixture_mean(const MixingSpec& spec) {
  switch (spec.kind) {
    case MixingKind::Fixed:
    case MixingKind::Normal:
      return spec.loc;
    case MixingKind::NegLogUniform:
    case MixingKind::PosLogUniform: {
      // integral of exp(a + b xi) over xi in [0,1]
      const double b = spec.spread;
      const double m = std::abs(b) < 1e-12 ? std::exp(spec.loc)
                                           : std::exp(spec.loc) * (std::exp(b) - 1.0) / b;
      return spec.kind == MixingKind::NegLogUniform ? -m : m;
    }
  }
  throw NumericError("mixture_mean: bad kind");
}

std::vector<double> DrawMatrix::block(std::uint64_t seed, std::uint64_t key, int dims,
                                      int draws) {
  std::vector<double> out(static_cast<std::size_t>(dims) * draws);
  const double r_inv = 1.0 / static_cast<double>(draws);
  for (int d = 0; d < dims; ++d) {
    Rng rng(mix_key(seed, key, static_cast<std::uint64_t>(d)));
    double* v = out.data() + static_cast<std::size_t>(d) * draws;
    const double shift = rng.uniform01() * r_inv;  // in (0, 1/R)
    for (int i = 0; i < draws; ++i) v[i] = static_cast<double>(i) * r_inv + shift;
    for (int i = draws; i > 1; --i) {
      const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }
  return out;
}

DrawMatrix::DrawMatrix(std::size_t n, int dims, int draws, std::uint64_t seed)
    : n_(n), dims_(dims), draws_(draws), seed_(seed) {
  if (dims < 0 || draws < 1) throw ConfigError("DrawMatrix: dims must be >= 0, draws >= 1");
  data_.resize(n * static_cast<std::size_t>(dims) * draws);
  for (std::size_t i = 0; i < n; ++i) {
    const auto blk = block(seed, static_cast<std::uint64_t>(i), dims, draws);
    std::copy(blk.begin(), blk.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * dims * draws));
  }
}

DrawMatrix mlhs_draws(std::size_t n_individuals, int dims, int draws, std::uint64_t seed) {
  if (n_individuals < 1 || dims < 1 || draws < 1)
    throw ConfigError("mlhs_draws: all dimensions must be >= 1");
  return DrawMatrix(n_individuals, dims, draws, seed);
}

}  // namespace ck
