#ifndef NOETHER_DATA_HPP
#define NOETHER_DATA_HPP

#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "noether/loss.hpp"
#include "noether/network.hpp"

namespace noether {

/// Initialisation scheme for network parameters.
///
///   LeCun          W, b ~ N(0, 1/fan_in); Swish beta = 1
///   UnbiasedPairs  LeCun, then the last hidden layer is split into identical
///                  halves whose output weights cancel, so f_{w(0)} = 0
///   Balanced       LeCun, then layers rescaled so ||W^(h)||^2 = p ||W^(h+1)||^2
struct InitScheme {
  enum class Kind { LeCun, UnbiasedPairs, Balanced };
  Kind kind = Kind::LeCun;
  double p = 1.0;

  static InitScheme lecun() { return {Kind::LeCun, 1.0}; }
  static InitScheme unbiased_pairs() { return {Kind::UnbiasedPairs, 1.0}; }
  static InitScheme balanced(double p) {
    if (!(p > 0.0)) throw InputError("balanced init needs p > 0");
    return {Kind::Balanced, p};
  }

  /// "lecun", "unbiased_pairs", "balanced:<p>".
  static InitScheme parse(const std::string& text) {
    if (text == "lecun") return lecun();
    if (text == "unbiased_pairs") return unbiased_pairs();
    if (text.rfind("balanced", 0) == 0) {
      if (text == "balanced") return balanced(1.0);
      if (text.size() > 9 && text[8] == ':') {
        std::size_t used = 0;
        const double p = std::stod(text.substr(9), &used);
        if (used == text.size() - 9) return balanced(p);
      }
    }
    throw InputError("unknown init scheme '" + text + "'");
  }
};

using Rng = std::mt19937_64;

namespace detail {

template <typename Scalar>
void fill_normal(Matrix<Scalar>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = Scalar(dist(rng));
}

template <typename Scalar>
void fill_normal(Vector<Scalar>& v, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < v.size(); ++i) v(i) = Scalar(dist(rng));
}

}  // namespace detail

/// Deterministic in (arch, scheme, seed).
template <typename Scalar>
Network<Scalar> initialize(const Architecture& arch, InitScheme scheme, std::uint64_t seed) {
  using std::sqrt;
  Network<Scalar> net(arch);
  const Index K = net.depth();
  if (scheme.kind == InitScheme::Kind::UnbiasedPairs) {
    if (K < 2) throw ConfigError("init", "unbiased_pairs needs at least one hidden layer");
    if (net.width(K - 1) % 2 != 0)
      throw ConfigError("init", "unbiased_pairs needs an even last hidden width, got " +
                                    std::to_string(net.width(K - 1)));
  }
  Rng rng(seed);
  for (Index h = 1; h <= K; ++h) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(net.width(h - 1)));
    detail::fill_normal(net.weight(h), stddev, rng);
    if (net.has_bias(h)) detail::fill_normal(net.bias(h), stddev, rng);
  }

  if (scheme.kind == InitScheme::Kind::UnbiasedPairs) {
    const Index half = net.width(K - 1) / 2;
    auto& w = net.weight(K - 1);
    w.bottomRows(half) = w.topRows(half);
    if (net.has_bias(K - 1)) net.bias(K - 1).tail(half) = net.bias(K - 1).head(half);
    auto& out = net.weight(K);
    out.rightCols(half) = -out.leftCols(half);
    if (net.has_bias(K)) net.bias(K).setZero();
  } else if (scheme.kind == InitScheme::Kind::Balanced) {
    // Work down from the output layer: c_h^2 ||W^h||^2 = p ||W^(h+1)||^2 after scaling.
    for (Index h = K - 1; h >= 1; --h) {
      const Scalar target = Scalar(scheme.p) * net.weight(h + 1).squaredNorm();
      const Scalar current = net.weight(h).squaredNorm();
      if (current > Scalar(0)) net.weight(h) *= sqrt(target / current);
    }
  }
  return net;
}

/// Random rotation in SO(d) (QR of a Gaussian matrix with sign fix).
template <typename Scalar>
Matrix<Scalar> random_rotation(Index d, Rng& rng) {
  Matrix<Scalar> g(d, d);
  detail::fill_normal(g, 1.0, rng);
  Eigen::HouseholderQR<Matrix<Scalar>> qr(g);
  Matrix<Scalar> q = qr.householderQ();
  const Matrix<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  if (q.determinant() < Scalar(0)) q.col(0) = -q.col(0);
  return q;
}

/// Isotropic Gaussian inputs with scalar targets target_fn(||x||).
template <typename Scalar>
std::shared_ptr<Dataset<Scalar>> synth_rotational(Index n, Index d, std::uint64_t seed,
                                                  const std::function<Scalar(Scalar)>& target_fn) {
  if (n < 1) throw InputError("synth_rotational needs n >= 1");
  if (d < 2) throw InputError("synth_rotational needs d >= 2");
  auto data = std::make_shared<Dataset<Scalar>>();
  Rng rng(seed);
  data->inputs.resize(n, d);
  detail::fill_normal(data->inputs, 1.0, rng);
  data->targets.resize(n, 1);
  for (Index i = 0; i < n; ++i) data->targets(i, 0) = target_fn(data->inputs.row(i).norm());
  data->provenance = "synth_rotational(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                     ",seed=" + std::to_string(seed) + ")";
  return data;
}

/// Gaussian inputs labelled by argmax of a random linear teacher.
template <typename Scalar>
std::shared_ptr<Dataset<Scalar>> synth_teacher_classification(Index n, Index d, Index classes,
                                                              std::uint64_t seed) {
  if (n < 1 || d < 1 || classes < 2) throw InputError("teacher data needs n, d >= 1, classes >= 2");
  auto data = std::make_shared<Dataset<Scalar>>();
  Rng rng(seed);
  Matrix<Scalar> teacher(classes, d);
  detail::fill_normal(teacher, 1.0, rng);
  data->inputs.resize(n, d);
  detail::fill_normal(data->inputs, 1.0, rng);
  data->labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    (teacher * data->inputs.row(i).transpose()).maxCoeff(&best);
    data->labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  data->provenance = "teacher_classification(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                     ",classes=" + std::to_string(classes) + ",seed=" + std::to_string(seed) + ")";
  return data;
}

/// Inputs uniform on the unit sphere, y = sin(3 x_0) + 0.5 x_1.
template <typename Scalar>
std::shared_ptr<Dataset<Scalar>> synth_sphere_regression(Index n, Index d, std::uint64_t seed) {
  using std::sin;
  if (n < 1 || d < 2) throw InputError("sphere regression needs n >= 1, d >= 2");
  auto data = std::make_shared<Dataset<Scalar>>();
  Rng rng(seed);
  data->inputs.resize(n, d);
  detail::fill_normal(data->inputs, 1.0, rng);
  data->inputs.rowwise().normalize();
  data->targets.resize(n, 1);
  for (Index i = 0; i < n; ++i)
    data->targets(i, 0) = sin(Scalar(3) * data->inputs(i, 0)) + Scalar(0.5) * data->inputs(i, 1);
  data->provenance = "sphere_regression(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                     ",seed=" + std::to_string(seed) + ")";
  return data;
}

/// The 2d points +-e_i with one shared target. Sum x x^T = 2I and sum x = 0,
/// so the quadratic loss of a linear network is invariant under W^(1) -> W^(1) Q.
template <typename Scalar>
std::shared_ptr<Dataset<Scalar>> cross_polytope(Index d, const Vector<Scalar>& target) {
  if (d < 1) throw InputError("cross_polytope needs d >= 1");
  auto data = std::make_shared<Dataset<Scalar>>();
  data->inputs = Matrix<Scalar>::Zero(2 * d, d);
  data->targets.resize(2 * d, target.size());
  for (Index i = 0; i < d; ++i) {
    data->inputs(2 * i, i) = Scalar(1);
    data->inputs(2 * i + 1, i) = Scalar(-1);
  }
  data->targets.rowwise() = target.transpose();
  data->provenance = "cross_polytope(d=" + std::to_string(d) + ")";
  return data;
}

}  // namespace noether

#endif  // NOETHER_DATA_HPP
