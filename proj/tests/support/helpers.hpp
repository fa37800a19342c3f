#ifndef NOETHER_TESTS_HELPERS_HPP
#define NOETHER_TESTS_HELPERS_HPP

#include <memory>
#include <random>

#include "noether/data.hpp"
#include "noether/network.hpp"

namespace testing_util {

using noether::Activation;
using noether::Architecture;
using noether::Index;
using Vec = noether::Vector<double>;
using Mat = noether::Matrix<double>;

/// LeCun init with Swish slopes drawn from [0.5, 1.5] so every slot is generic.
inline noether::Network<double> random_net(const Architecture& arch, std::uint64_t seed) {
  auto net = noether::initialize<double>(arch, noether::InitScheme::lecun(), seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (Index h = 1; h <= net.depth(); ++h)
    if (net.has_beta(h))
      for (Index i = 0; i < net.width(h); ++i) net.beta(h)(i) = u(rng);
  return net;
}

inline Mat random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline Vec random_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale);
}

/// Regression set with Gaussian inputs and targets.
inline std::shared_ptr<noether::Dataset<double>> random_regression(Index n, Index dx, Index dy,
                                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto d = std::make_shared<noether::Dataset<double>>();
  d->inputs = random_matrix(n, dx, rng);
  d->targets = random_matrix(n, dy, rng);
  return d;
}

}  // namespace testing_util

#endif
