#ifndef NOETHER_LOSS_HPP
#define NOETHER_LOSS_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "noether/network.hpp"

namespace noether {

/// Training set {(x_i, y_i)}. Inputs are n x d_x. Regression targets are
/// n x d_y; classification sets carry `labels` instead (targets may be empty).
template <typename Scalar>
struct Dataset {
  Matrix<Scalar> inputs;
  Matrix<Scalar> targets;
  std::vector<int> labels;
  std::string provenance;

  Index size() const noexcept { return inputs.rows(); }
  Index input_dim() const noexcept { return inputs.cols(); }
};

/// Closed-form potential V(w) on the flat parameter vector.
template <typename Scalar>
struct Potential {
  std::string name;
  std::function<Scalar(const Vector<Scalar>&)> value;
  std::function<Vector<Scalar>(const Vector<Scalar>&)> gradient;

  /// (||w||^2 - 1)^2, invariant under every rotation of w.
  static Potential radial_quartic() {
    return {"radial_quartic",
            [](const Vector<Scalar>& w) {
              const Scalar r = w.squaredNorm() - Scalar(1);
              return r * r;
            },
            [](const Vector<Scalar>& w) -> Vector<Scalar> {
              return Scalar(4) * (w.squaredNorm() - Scalar(1)) * w;
            }};
  }

  /// 0.5 ||w||^2, the unit harmonic oscillator.
  static Potential half_squared_norm() {
    return {"half_squared_norm",
            [](const Vector<Scalar>& w) { return Scalar(0.5) * w.squaredNorm(); },
            [](const Vector<Scalar>& w) -> Vector<Scalar> { return w; }};
  }

  static Potential zero() {
    return {"zero", [](const Vector<Scalar>&) { return Scalar(0); },
            [](const Vector<Scalar>& w) -> Vector<Scalar> {
              return Vector<Scalar>::Zero(w.size());
            }};
  }
};

/// Objective L(w): dataset-based quadratic or negative log-likelihood loss,
/// or a closed-form potential of the parameters.
template <typename Scalar>
struct LossSpec {
  enum class Kind { Quadratic, NLL, Potential };

  Kind kind = Kind::Quadratic;
  std::shared_ptr<const Dataset<Scalar>> data;
  noether::Potential<Scalar> potential;

  /// 0.5 sum_i ||y_i - f(x_i)||^2.
  static LossSpec quadratic(std::shared_ptr<const Dataset<Scalar>> d) {
    return {Kind::Quadratic, std::move(d), {}};
  }
  /// Mean over samples of -log softmax(f(x_i))[label_i].
  static LossSpec nll(std::shared_ptr<const Dataset<Scalar>> d) {
    return {Kind::NLL, std::move(d), {}};
  }
  static LossSpec from_potential(noether::Potential<Scalar> p) {
    return {Kind::Potential, nullptr, std::move(p)};
  }
};

namespace detail {

template <typename Scalar>
void check_dataset(const Network<Scalar>& net, const LossSpec<Scalar>& ls) {
  if (!ls.data) throw InputError("loss needs a dataset");
  const auto& d = *ls.data;
  if (d.size() == 0) throw InputError("dataset is empty");
  if (d.input_dim() != net.input_dim())
    throw InputError("dataset inputs have dimension " + std::to_string(d.input_dim()) +
                     ", network expects " + std::to_string(net.input_dim()));
  if (ls.kind == LossSpec<Scalar>::Kind::Quadratic) {
    if (d.targets.rows() != d.size() || d.targets.cols() != net.output_dim())
      throw InputError("quadratic loss targets must be n x d_K");
  } else {
    if (static_cast<Index>(d.labels.size()) != d.size())
      throw InputError("NLL loss needs one label per sample");
    for (int c : d.labels)
      if (c < 0 || c >= net.output_dim()) throw InputError("label outside output range");
  }
}

/// Loss value and dL/dA^(K) for the whole batch.
template <typename Scalar>
Scalar output_loss(const LossSpec<Scalar>& ls, const Matrix<Scalar>& out,
                   Matrix<Scalar>* out_grad) {
  const auto& d = *ls.data;
  if (ls.kind == LossSpec<Scalar>::Kind::Quadratic) {
    const Matrix<Scalar> r = out - d.targets.transpose();
    if (out_grad) *out_grad = r;
    return Scalar(0.5) * r.squaredNorm();
  }
  using std::exp;
  using std::log;
  const Index n = out.cols();
  Scalar total(0);
  if (out_grad) out_grad->resize(out.rows(), n);
  for (Index j = 0; j < n; ++j) {
    const Scalar mx = out.col(j).maxCoeff();
    const Vector<Scalar> e = (out.col(j).array() - mx).exp().matrix();
    const Scalar z = e.sum();
    const int c = d.labels[static_cast<std::size_t>(j)];
    total += -(out(c, j) - mx - log(z));
    if (out_grad) {
      out_grad->col(j) = e / z;
      (*out_grad)(c, j) -= Scalar(1);
    }
  }
  if (out_grad) *out_grad /= Scalar(n);
  return total / Scalar(n);
}

}  // namespace detail

template <typename Scalar>
Scalar loss(const Network<Scalar>& net, const LossSpec<Scalar>& ls) {
  if (ls.kind == LossSpec<Scalar>::Kind::Potential) return ls.potential.value(net.flatten());
  detail::check_dataset(net, ls);
  const Matrix<Scalar> out = net.forward(ls.data->inputs.transpose());
  return detail::output_loss<Scalar>(ls, out, nullptr);
}

template <typename Scalar>
struct LossAndGrad {
  Scalar value;
  Vector<Scalar> grad;
};

template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const Network<Scalar>& net, const LossSpec<Scalar>& ls) {
  if (ls.kind == LossSpec<Scalar>::Kind::Potential) {
    const Vector<Scalar> w = net.flatten();
    return {ls.potential.value(w), ls.potential.gradient(w)};
  }
  detail::check_dataset(net, ls);
  ForwardCache<Scalar> cache;
  const Matrix<Scalar> out = net.forward(ls.data->inputs.transpose(), &cache);
  Matrix<Scalar> og;
  const Scalar value = detail::output_loss<Scalar>(ls, out, &og);
  return {value, net.backward(cache, og)};
}

/// Flat gradient of the loss, including dL/dbeta for Swish layers.
template <typename Scalar>
Vector<Scalar> grad(const Network<Scalar>& net, const LossSpec<Scalar>& ls) {
  return loss_and_grad(net, ls).grad;
}

/// L and its gradient as functions of the flat parameter vector.
template <typename Scalar>
class Objective {
 public:
  Objective(Network<Scalar> net, LossSpec<Scalar> ls)
      : net_(std::move(net)), ls_(std::move(ls)) {}

  Scalar value(const Vector<Scalar>& w) const { return loss(net_.with_params(w), ls_); }
  Vector<Scalar> gradient(const Vector<Scalar>& w) const {
    return grad(net_.with_params(w), ls_);
  }
  LossAndGrad<Scalar> value_and_gradient(const Vector<Scalar>& w) const {
    return loss_and_grad(net_.with_params(w), ls_);
  }

  Network<Scalar> network_at(const Vector<Scalar>& w) const { return net_.with_params(w); }
  const Network<Scalar>& network() const noexcept { return net_; }
  const LossSpec<Scalar>& loss_spec() const noexcept { return ls_; }

 private:
  Network<Scalar> net_;
  LossSpec<Scalar> ls_;
};

}  // namespace noether

#endif  // NOETHER_LOSS_HPP
