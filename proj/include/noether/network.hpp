#ifndef NOETHER_NETWORK_HPP
#define NOETHER_NETWORK_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "noether/activation.hpp"
#include "noether/error.hpp"

namespace noether {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Shape of a dense feed-forward network with layers 0 (input) .. K (output).
struct Architecture {
  std::vector<Index> dims;              // d_0, ..., d_K
  std::vector<Activation> activations;  // sigma_1, ..., sigma_K
  std::vector<bool> bias;               // b^(h) present, per layer 1..K

  /// Same hidden activation everywhere, `output` on layer K.
  static Architecture mlp(std::vector<Index> dims, Activation hidden,
                          Activation output = Activation::linear(),
                          bool with_bias = false) {
    if (dims.size() < 2) throw InputError("architecture needs at least one layer");
    Architecture a;
    const std::size_t k = dims.size() - 1;
    a.dims = std::move(dims);
    a.activations.assign(k, hidden);
    a.activations.back() = output;
    a.bias.assign(k, with_bias);
    return a;
  }

  Index depth() const noexcept { return static_cast<Index>(activations.size()); }

  void validate() const {
    if (dims.size() < 2) throw InputError("architecture needs at least one layer");
    if (activations.size() + 1 != dims.size())
      throw InputError("architecture needs one activation per layer");
    if (bias.size() != activations.size())
      throw InputError("architecture needs one bias flag per layer");
    for (Index d : dims)
      if (d < 1) throw InputError("layer widths must be positive");
  }
};

/// Offsets of one layer's blocks inside the flat parameter vector.
/// A block that is absent has offset -1.
struct LayerSlots {
  Index weight = 0;
  Index bias = -1;
  Index beta = -1;
};

/// Per-layer pre-activations Z^(h) and activations A^(h) of a batch; samples
/// are columns. post[0] is the input batch.
template <typename Scalar>
struct ForwardCache {
  std::vector<Matrix<Scalar>> pre;   // index h-1 holds Z^(h)
  std::vector<Matrix<Scalar>> post;  // index h holds A^(h)
};

/// Parameters w of a dense network: W^(h), optional b^(h), and trainable
/// Swish slopes beta^(h) on every Swish layer.
///
/// Layers are addressed 1-based (h = 1..K) to match W^(h) connecting layer h-1
/// to layer h. The flat view orders blocks layer by layer as W (column-major),
/// then b, then beta.
template <typename Scalar>
class Network {
 public:
  struct Layer {
    Matrix<Scalar> weight;  // d_h x d_{h-1}
    Vector<Scalar> bias;    // d_h or empty
    Vector<Scalar> beta;    // d_h or empty
  };

  Network() = default;

  explicit Network(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    layers_.resize(arch_.activations.size());
    slots_.resize(layers_.size());
    Index offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Index rows = arch_.dims[l + 1];
      const Index cols = arch_.dims[l];
      layers_[l].weight = Matrix<Scalar>::Zero(rows, cols);
      slots_[l].weight = offset;
      offset += rows * cols;
      if (arch_.bias[l]) {
        layers_[l].bias = Vector<Scalar>::Zero(rows);
        slots_[l].bias = offset;
        offset += rows;
      }
      if (arch_.activations[l].is_swish()) {
        layers_[l].beta = Vector<Scalar>::Ones(rows);
        slots_[l].beta = offset;
        offset += rows;
      }
    }
    param_count_ = offset;
  }

  const Architecture& architecture() const noexcept { return arch_; }
  Index depth() const noexcept { return static_cast<Index>(layers_.size()); }
  Index input_dim() const noexcept { return arch_.dims.front(); }
  Index output_dim() const noexcept { return arch_.dims.back(); }
  Index width(Index h) const { return arch_.dims.at(static_cast<std::size_t>(h)); }
  Index param_count() const noexcept { return param_count_; }

  const Activation& activation(Index h) const { return arch_.activations.at(idx(h)); }
  bool has_bias(Index h) const { return arch_.bias.at(idx(h)); }
  bool has_beta(Index h) const { return activation(h).is_swish(); }

  Matrix<Scalar>& weight(Index h) { return layers_.at(idx(h)).weight; }
  const Matrix<Scalar>& weight(Index h) const { return layers_.at(idx(h)).weight; }
  Vector<Scalar>& bias(Index h) { return layers_.at(idx(h)).bias; }
  const Vector<Scalar>& bias(Index h) const { return layers_.at(idx(h)).bias; }
  Vector<Scalar>& beta(Index h) { return layers_.at(idx(h)).beta; }
  const Vector<Scalar>& beta(Index h) const { return layers_.at(idx(h)).beta; }

  const LayerSlots& slots(Index h) const { return slots_.at(idx(h)); }

  Vector<Scalar> flatten() const {
    Vector<Scalar> flat(param_count_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      const auto& s = slots_[l];
      flat.segment(s.weight, L.weight.size()) = L.weight.reshaped();
      if (s.bias >= 0) flat.segment(s.bias, L.bias.size()) = L.bias;
      if (s.beta >= 0) flat.segment(s.beta, L.beta.size()) = L.beta;
    }
    return flat;
  }

  /// Overwrites every parameter from a flat vector of length param_count().
  template <typename Derived>
  void assign(const Eigen::MatrixBase<Derived>& flat) {
    if (flat.size() != param_count_)
      throw InputError("flat parameter vector has length " +
                       std::to_string(flat.size()) + ", expected " +
                       std::to_string(param_count_));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& L = layers_[l];
      const auto& s = slots_[l];
      L.weight.reshaped() = flat.segment(s.weight, L.weight.size());
      if (s.bias >= 0) L.bias = flat.segment(s.bias, L.bias.size());
      if (s.beta >= 0) L.beta = flat.segment(s.beta, L.beta.size());
    }
  }

  template <typename Derived>
  Network with_params(const Eigen::MatrixBase<Derived>& flat) const {
    Network copy = *this;
    copy.assign(flat);
    return copy;
  }

  /// Batched forward pass; `inputs` is d_0 x n with one sample per column.
  Matrix<Scalar> forward(const Matrix<Scalar>& inputs, ForwardCache<Scalar>* cache = nullptr) const {
    if (inputs.rows() != input_dim())
      throw InputError("input has dimension " + std::to_string(inputs.rows()) +
                       ", network expects " + std::to_string(input_dim()));
    if (cache) {
      cache->pre.clear();
      cache->post.clear();
      cache->post.push_back(inputs);
    }
    Matrix<Scalar> a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      Matrix<Scalar> z = L.weight * a;
      if (L.bias.size() > 0) z.colwise() += L.bias;
      a = activate(arch_.activations[l], z, L.beta);
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->post.push_back(a);
      }
    }
    return a;
  }

  /// Single-sample forward pass f_w(x).
  Vector<Scalar> operator()(const Vector<Scalar>& x) const {
    return forward(Matrix<Scalar>(x)).col(0);
  }

  /// Reverse-mode pass: given dL/dA^(K) for the cached batch (d_K x n),
  /// returns the flat gradient summed over the batch.
  Vector<Scalar> backward(const ForwardCache<Scalar>& cache,
                          const Matrix<Scalar>& output_grad) const {
    Vector<Scalar> grad = Vector<Scalar>::Zero(param_count_);
    Matrix<Scalar> g = output_grad;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& L = layers_[l];
      const auto& s = slots_[l];
      const auto& act = arch_.activations[l];
      const Matrix<Scalar>& z = cache.pre[l];
      Matrix<Scalar> delta(z.rows(), z.cols());
      Vector<Scalar> dbeta;
      if (act.is_swish()) dbeta = Vector<Scalar>::Zero(z.rows());
      for (Index j = 0; j < z.cols(); ++j) {
        for (Index i = 0; i < z.rows(); ++i) {
          const Scalar b = act.is_swish() ? L.beta(i) : Scalar(1);
          const auto d = activation_grad(act, z(i, j), b);
          delta(i, j) = g(i, j) * d.dx;
          if (act.is_swish()) dbeta(i) += g(i, j) * d.dbeta;
        }
      }
      Eigen::Map<Matrix<Scalar>>(grad.data() + s.weight, L.weight.rows(), L.weight.cols()) =
          delta * cache.post[l].transpose();
      if (s.bias >= 0) grad.segment(s.bias, L.bias.size()) = delta.rowwise().sum();
      if (s.beta >= 0) grad.segment(s.beta, L.beta.size()) = dbeta;
      if (l > 0) g = L.weight.transpose() * delta;
    }
    return grad;
  }

 private:
  std::size_t idx(Index h) const {
    if (h < 1 || h > depth())
      throw InputError("layer index " + std::to_string(h) + " outside 1.." +
                       std::to_string(depth()));
    return static_cast<std::size_t>(h - 1);
  }

  static Matrix<Scalar> activate(const Activation& act, const Matrix<Scalar>& z,
                                 const Vector<Scalar>& beta) {
    Matrix<Scalar> a(z.rows(), z.cols());
    for (Index j = 0; j < z.cols(); ++j)
      for (Index i = 0; i < z.rows(); ++i)
        a(i, j) = activation_eval(act, z(i, j), act.is_swish() ? beta(i) : Scalar(1));
    return a;
  }

  Architecture arch_;
  std::vector<Layer> layers_;
  std::vector<LayerSlots> slots_;
  Index param_count_ = 0;
};

/// W^(h) read out of a flat vector laid out like `net`.
template <typename Scalar>
Matrix<Scalar> weight_block(const Network<Scalar>& net, const Vector<Scalar>& flat, Index h) {
  if (flat.size() != net.param_count())
    throw InputError("flat vector has length " + std::to_string(flat.size()) + ", expected " +
                     std::to_string(net.param_count()));
  const Matrix<Scalar>& w = net.weight(h);
  return flat.segment(net.slots(h).weight, w.size()).reshaped(w.rows(), w.cols());
}

/// [f_{w+eps d}(x) - 2 f_w(x) + f_{w-eps d}(x)] / eps^2, per output.
template <typename Scalar>
Vector<Scalar> directional_second_difference(const Network<Scalar>& net,
                                             const Vector<Scalar>& x,
                                             const Vector<Scalar>& direction,
                                             Scalar eps) {
  if (!(eps > Scalar(0))) throw InputError("eps must be positive");
  if (!(direction.norm() > Scalar(0))) throw InputError("direction must be nonzero");
  const Vector<Scalar> w = net.flatten();
  const Vector<Scalar> plus = net.with_params(w + eps * direction)(x);
  const Vector<Scalar> minus = net.with_params(w - eps * direction)(x);
  return (plus - Scalar(2) * net(x) + minus) / (eps * eps);
}

}  // namespace noether

#endif  // NOETHER_NETWORK_HPP
