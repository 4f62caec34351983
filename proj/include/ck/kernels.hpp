#ifndef CK_KERNELS_HPP
#define CK_KERNELS_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace ck {

// Unavailable alternatives get probability 0 (log-prob -inf) throughout.

// Softmax over available alternatives, max-shifted.
void mnl_log_probs(std::span<const double> v, std::span<const std::uint8_t> avail,
                   std::span<double> logp);
std::vector<double> mnl_probs(std::span<const double> v, std::span<const std::uint8_t> avail);
std::vector<double> mnl_probs(std::span<const double> v);

// Two-level nested logit, UMNL normalization: lambda scales inside the nest,
// top level has scale 1. Singleton nests behave as lambda = 1.
struct NestView {
  std::span<const int> members;
  double lambda = 1.0;
};

void nl_log_probs(std::span<const double> v, std::span<const std::uint8_t> avail,
                  std::span<const NestView> nests, std::span<double> logp);

// Partition form used by tests and the public surface.
struct NestPartition {
  std::vector<std::vector<int>> groups;
  std::vector<double> lambda;
};
std::vector<double> nl_probs(std::span<const double> v, std::span<const std::uint8_t> avail,
                             const NestPartition& nests);

// d ln P(chosen) / dV_k for every alternative k and d ln P(chosen) / d lambda_g
// for every nest g. dv and dlambda must be sized J and nests.size().
void nl_log_prob_grad(std::span<const double> v, std::span<const std::uint8_t> avail,
                      std::span<const NestView> nests, int chosen, std::span<double> dv,
                      std::span<double> dlambda);

}  // namespace ck

#endif
