#ifndef NOETHER_ACTIVATION_HPP
#define NOETHER_ACTIVATION_HPP

#include <cmath>
#include <optional>
#include <string>

#include "noether/error.hpp"

namespace noether {

/// Pointwise nonlinearity of one layer.
///
/// Parameters are validated on construction, so every value of this type is
/// evaluable: LeakyReLU has alpha < 1, Polynomial has an integer degree >= 1,
/// RePU has a real degree > 0. Swish carries no parameter here; its per-neuron
/// beta lives in the network parameters and is trained.
class Activation {
 public:
  enum class Kind { Linear, ReLU, LeakyReLU, Polynomial, RePU, Swish };

  /// Identity activation, used for output layers.
  Activation() = default;

  static Activation linear(double c = 1.0) { return {Kind::Linear, c}; }
  static Activation relu() { return {Kind::ReLU, 1.0}; }
  static Activation leaky_relu(double alpha) {
    if (!(alpha < 1.0)) throw InputError("LeakyReLU requires alpha < 1");
    return {Kind::LeakyReLU, alpha};
  }
  static Activation polynomial(int p) {
    if (p < 1) throw InputError("Polynomial activation requires integer p >= 1");
    return {Kind::Polynomial, static_cast<double>(p)};
  }
  static Activation repu(double p) {
    if (!(p > 0.0)) throw InputError("RePU requires p > 0");
    return {Kind::RePU, p};
  }
  static Activation swish() { return {Kind::Swish, 0.0}; }

  Kind kind() const noexcept { return kind_; }

  /// Slope c for Linear, alpha for LeakyReLU, degree p for Polynomial/RePU.
  double parameter() const noexcept { return param_; }

  bool is_swish() const noexcept { return kind_ == Kind::Swish; }
  bool is_linear() const noexcept { return kind_ == Kind::Linear; }

  /// Degree p such that sigma(lambda x) = lambda^p sigma(x) for lambda > 0,
  /// or nothing for Swish.
  std::optional<double> homogeneity_degree() const noexcept {
    switch (kind_) {
      case Kind::Linear:
      case Kind::ReLU:
      case Kind::LeakyReLU:
        return 1.0;
      case Kind::Polynomial:
      case Kind::RePU:
        return param_;
      case Kind::Swish:
        return std::nullopt;
    }
    return std::nullopt;
  }

  /// Parses "relu", "linear", "linear:2", "leaky_relu:0.1", "polynomial:3",
  /// "repu:2.5", "swish".
  static Activation parse(const std::string& text);

  std::string to_string() const;

  friend bool operator==(const Activation& a, const Activation& b) {
    return a.kind_ == b.kind_ && a.param_ == b.param_;
  }

 private:
  Activation(Kind k, double p) : kind_(k), param_(p) {}

  Kind kind_ = Kind::Linear;
  double param_ = 1.0;
};

namespace detail {

template <typename Scalar>
Scalar logistic(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar int_pow(Scalar x, int p) {
  Scalar r(1);
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

}  // namespace detail

/// sigma(x). `beta` is read only for Swish.
template <typename Scalar>
Scalar activation_eval(const Activation& a, Scalar x, Scalar beta = Scalar(1)) {
  using std::pow;
  const Scalar c(a.parameter());
  switch (a.kind()) {
    case Activation::Kind::Linear:
      return c * x;
    case Activation::Kind::ReLU:
      return x > Scalar(0) ? x : Scalar(0);
    case Activation::Kind::LeakyReLU:
      return x > Scalar(0) ? x : c * x;
    case Activation::Kind::Polynomial:
      return detail::int_pow(x, static_cast<int>(a.parameter()));
    case Activation::Kind::RePU:
      return x > Scalar(0) ? pow(x, c) : Scalar(0);
    case Activation::Kind::Swish:
      return x * detail::logistic(beta * x);
  }
  return x;
}

template <typename Scalar>
struct ActivationGrad {
  Scalar dx;
  Scalar dbeta;  // zero unless Swish
};

/// Analytic derivatives. ReLU and RePU use derivative 0 at x = 0.
template <typename Scalar>
ActivationGrad<Scalar> activation_grad(const Activation& a, Scalar x,
                                       Scalar beta = Scalar(1)) {
  using std::pow;
  const Scalar c(a.parameter());
  switch (a.kind()) {
    case Activation::Kind::Linear:
      return {c, Scalar(0)};
    case Activation::Kind::ReLU:
      return {x > Scalar(0) ? Scalar(1) : Scalar(0), Scalar(0)};
    case Activation::Kind::LeakyReLU:
      return {x > Scalar(0) ? Scalar(1) : c, Scalar(0)};
    case Activation::Kind::Polynomial: {
      const int p = static_cast<int>(a.parameter());
      return {Scalar(p) * detail::int_pow(x, p - 1), Scalar(0)};
    }
    case Activation::Kind::RePU:
      return {x > Scalar(0) ? c * pow(x, c - Scalar(1)) : Scalar(0), Scalar(0)};
    case Activation::Kind::Swish: {
      const Scalar s = detail::logistic(beta * x);
      const Scalar ds = s * (Scalar(1) - s);
      return {s + beta * x * ds, x * x * ds};
    }
  }
  return {Scalar(1), Scalar(0)};
}

}  // namespace noether

#endif  // NOETHER_ACTIVATION_HPP
