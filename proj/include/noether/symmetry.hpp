#ifndef NOETHER_SYMMETRY_HPP
#define NOETHER_SYMMETRY_HPP

#include <Eigen/LU>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "noether/dynamics.hpp"
#include "noether/loss.hpp"
#include "noether/trajectory.hpp"

namespace noether {

/// Per-neuron rescaling of a p-homogeneous neuron i in layer h:
/// W^(h)[i,:] (and b^(h)[i]) grow by (1+eps), W^(h+1)[:,i] shrinks by (1+eps)^-p.
struct Homogeneity {
  Index h = 1;
  Index i = 0;
  double p = 1.0;
  bool with_bias = false;
};

/// The Swish variant of Homogeneity: beta^(h)[i] shrinks by 1/(1+eps) and the
/// outgoing column by the same factor.
struct SwishNeuron {
  Index h = 1;
  Index i = 0;
  bool with_bias = false;
};

/// W^(h) -> G W^(h), W^(h+1) -> W^(h+1) G^-1 with G = I + eps A, for a linear
/// layer h.
template <typename Scalar>
struct LinearLayer {
  Index h = 1;
  Matrix<Scalar> A;
};

/// W^(1) -> W^(1) Q with Q in SO(d_0) generated by the skew matrix P.
template <typename Scalar>
struct Rotation {
  Matrix<Scalar> P;
};

template <typename Scalar>
using Generator = std::variant<Homogeneity, SwishNeuron, LinearLayer<Scalar>, Rotation<Scalar>>;

template <typename Scalar>
std::string describe(const Generator<Scalar>& g) {
  struct {
    std::string operator()(const Homogeneity& x) const {
      return "homogeneity(h=" + std::to_string(x.h) + ",i=" + std::to_string(x.i) +
             ",p=" + std::to_string(x.p) + (x.with_bias ? ",bias" : "") + ")";
    }
    std::string operator()(const SwishNeuron& x) const {
      return "swish(h=" + std::to_string(x.h) + ",i=" + std::to_string(x.i) +
             (x.with_bias ? ",bias" : "") + ")";
    }
    std::string operator()(const LinearLayer<Scalar>& x) const {
      return "linear(h=" + std::to_string(x.h) + ")";
    }
    std::string operator()(const Rotation<Scalar>& x) const {
      return "rotation(d=" + std::to_string(x.P.rows()) + ")";
    }
  } visitor;
  return std::visit(visitor, g);
}

namespace detail {

inline std::string layer_tag(Index h) { return "layer " + std::to_string(h); }

template <typename Scalar>
void check_neuron(const Network<Scalar>& net, Index h, Index i, bool with_bias) {
  if (h < 1 || h >= net.depth())
    throw GeneratorError("neuron generators need 1 <= h < K, got h = " + std::to_string(h));
  if (i < 0 || i >= net.width(h))
    throw GeneratorError("neuron " + std::to_string(i) + " outside " + layer_tag(h));
  if (with_bias != net.has_bias(h))
    throw GeneratorError(layer_tag(h) + (net.has_bias(h) ? " has a bias; generator must include it"
                                                         : " has no bias"));
}

template <typename Scalar>
void check(const Homogeneity& g, const Network<Scalar>& net) {
  check_neuron(net, g.h, g.i, g.with_bias);
  const auto degree = net.activation(g.h).homogeneity_degree();
  if (!degree) throw GeneratorError(layer_tag(g.h) + " is not homogeneous");
  if (std::abs(*degree - g.p) > 1e-12)
    throw GeneratorError(layer_tag(g.h) + " has homogeneity degree " + std::to_string(*degree) +
                         ", generator uses p = " + std::to_string(g.p));
}

template <typename Scalar>
void check(const SwishNeuron& g, const Network<Scalar>& net) {
  check_neuron(net, g.h, g.i, g.with_bias);
  if (!net.has_beta(g.h)) throw GeneratorError(layer_tag(g.h) + " has no trainable Swish beta");
}

template <typename Scalar>
void check(const LinearLayer<Scalar>& g, const Network<Scalar>& net) {
  if (g.h < 1 || g.h >= net.depth())
    throw GeneratorError("linear generator needs 1 <= h < K, got h = " + std::to_string(g.h));
  if (!net.activation(g.h).is_linear()) throw GeneratorError(layer_tag(g.h) + " is not linear");
  if (net.has_bias(g.h)) throw GeneratorError("linear generator needs " + layer_tag(g.h) + " without bias");
  if (g.A.rows() != net.width(g.h) || g.A.cols() != net.width(g.h))
    throw GeneratorError("A must be " + std::to_string(net.width(g.h)) + " x " +
                         std::to_string(net.width(g.h)));
}

template <typename Scalar>
void check(const Rotation<Scalar>& g, const Network<Scalar>& net) {
  using std::abs;
  using std::max;
  if (g.P.rows() != net.input_dim() || g.P.cols() != net.input_dim())
    throw GeneratorError("P must be d_0 x d_0 = " + std::to_string(net.input_dim()));
  const Scalar scale = max(Scalar(1), g.P.norm());
  if ((g.P + g.P.transpose()).norm() > Scalar(1e-12) * scale)
    throw GeneratorError("rotation generator P is not skew-symmetric");
}

}  // namespace detail

template <typename Scalar>
void validate(const Generator<Scalar>& g, const Network<Scalar>& net) {
  std::visit([&](const auto& x) { detail::check(x, net); }, g);
}

/// Tangent vector xi(w) of the generator, in the flat layout of `net`.
template <typename Scalar>
Vector<Scalar> apply_generator(const Generator<Scalar>& g, const Network<Scalar>& net) {
  validate(g, net);
  Vector<Scalar> xi = Vector<Scalar>::Zero(net.param_count());
  auto weight = [&](Index h) {
    const auto& w = net.weight(h);
    return Eigen::Map<Matrix<Scalar>>(xi.data() + net.slots(h).weight, w.rows(), w.cols());
  };
  auto neuron = [&](Index h, Index i, Scalar p, bool with_bias) {
    weight(h).row(i) = net.weight(h).row(i);
    if (with_bias) xi(net.slots(h).bias + i) = net.bias(h)(i);
    weight(h + 1).col(i) = -p * net.weight(h + 1).col(i);
  };
  if (const auto* x = std::get_if<Homogeneity>(&g)) {
    neuron(x->h, x->i, Scalar(x->p), x->with_bias);
  } else if (const auto* x = std::get_if<SwishNeuron>(&g)) {
    neuron(x->h, x->i, Scalar(1), x->with_bias);
    xi(net.slots(x->h).beta + x->i) = -net.beta(x->h)(x->i);
  } else if (const auto* x = std::get_if<LinearLayer<Scalar>>(&g)) {
    weight(x->h) = x->A * net.weight(x->h);
    weight(x->h + 1) = -net.weight(x->h + 1) * x->A;
  } else if (const auto* x = std::get_if<Rotation<Scalar>>(&g)) {
    weight(1) = net.weight(1) * x->P;
  }
  return xi;
}

/// Cayley element (I - P/2)^-1 (I + P/2) of a skew matrix; exactly orthogonal
/// with determinant +1.
template <typename Scalar>
Matrix<Scalar> cayley(const Matrix<Scalar>& P) {
  const Matrix<Scalar> I = Matrix<Scalar>::Identity(P.rows(), P.cols());
  return (I - P / Scalar(2)).partialPivLu().solve(I + P / Scalar(2));
}

/// The finite group element for parameter eps, applied exactly.
template <typename Scalar>
Network<Scalar> transform_exact(const Generator<Scalar>& g, const Network<Scalar>& net, Scalar eps) {
  using std::pow;
  validate(g, net);
  Network<Scalar> out = net;
  auto scale_neuron = [&](Index h, Index i, Scalar p, bool with_bias) {
    if (!(Scalar(1) + eps > Scalar(0))) throw TransformError("neuron rescaling needs 1 + eps > 0");
    const Scalar up = Scalar(1) + eps;
    out.weight(h).row(i) *= up;
    if (with_bias) out.bias(h)(i) *= up;
    out.weight(h + 1).col(i) *= pow(up, -p);
  };
  if (const auto* x = std::get_if<Homogeneity>(&g)) {
    scale_neuron(x->h, x->i, Scalar(x->p), x->with_bias);
  } else if (const auto* x = std::get_if<SwishNeuron>(&g)) {
    scale_neuron(x->h, x->i, Scalar(1), x->with_bias);
    out.beta(x->h)(x->i) /= Scalar(1) + eps;
  } else if (const auto* x = std::get_if<LinearLayer<Scalar>>(&g)) {
    const Index d = x->A.rows();
    const Matrix<Scalar> G = Matrix<Scalar>::Identity(d, d) + eps * x->A;
    Eigen::FullPivLU<Matrix<Scalar>> lu(G);
    if (!lu.isInvertible()) throw TransformError("I + eps A is singular");
    out.weight(x->h) = G * net.weight(x->h);
    out.weight(x->h + 1) = net.weight(x->h + 1) * lu.inverse();
  } else if (const auto* x = std::get_if<Rotation<Scalar>>(&g)) {
    out.weight(1) = net.weight(1) * cayley<Scalar>(eps * x->P);
  }
  return out;
}

/// |L(transform_exact(g, net, eps)) - L(net)|.
template <typename Scalar>
Scalar loss_invariance_defect(const Generator<Scalar>& g, const Network<Scalar>& net,
                              const LossSpec<Scalar>& ls, Scalar eps) {
  using std::abs;
  return abs(loss(transform_exact(g, net, eps), ls) - loss(net, ls));
}

/// <grad L(w), xi(w)>; zero for a symmetry of L.
template <typename Scalar>
Scalar rund_trautmann_residual(const Generator<Scalar>& g, const Network<Scalar>& net,
                               const LossSpec<Scalar>& ls) {
  return grad(net, ls).dot(apply_generator(g, net));
}

template <typename Scalar>
struct RundTrautmannReport {
  Scalar residual = 0;
  Scalar grad_norm = 0;
  Scalar xi_norm = 0;

  /// |residual| <= rel_tol ||grad L|| ||xi||.
  bool certified(Scalar rel_tol = Scalar(1e-8)) const {
    using std::abs;
    return abs(residual) <= rel_tol * grad_norm * xi_norm;
  }
};

template <typename Scalar>
RundTrautmannReport<Scalar> rund_trautmann_check(const Generator<Scalar>& g,
                                                 const Network<Scalar>& net,
                                                 const LossSpec<Scalar>& ls) {
  const Vector<Scalar> gr = grad(net, ls);
  const Vector<Scalar> xi = apply_generator(g, net);
  return {gr.dot(xi), gr.norm(), xi.norm()};
}

/// How kappa2 w'' + kappa1 w' is obtained at a window centre.
enum class ForceEstimate {
  FiniteDifference,  // central differences of sampled w (first order) or v
  OdeRhs,            // substitute the equation of motion: -grad L(w)
};

/// E = kappa2 w'' + kappa1 w' at the centre of a window. OdeRhs needs `oracle`.
template <typename Scalar>
Vector<Scalar> noether_force(const Window<Scalar>& win, const DynamicsSpec<Scalar>& spec,
                             ForceEstimate mode = ForceEstimate::FiniteDifference,
                             const Oracle<Scalar>* oracle = nullptr) {
  if (!win.prev || !win.mid || !win.next) throw InputError("window needs 3 samples");
  if (mode == ForceEstimate::OdeRhs) {
    if (!oracle) throw InputError("ODE substitution needs a gradient oracle");
    return -(*oracle)(win.mid->w).grad;
  }
  const Scalar t = win.mid->t;
  const Scalar two_dt = Scalar(2) * win.spacing;
  if (!spec.second_order()) return spec.kappa1(t) * (win.next->w - win.prev->w) / two_dt;
  if (win.mid->v.size() == 0) throw InputError("second-order window lacks velocity samples");
  const Vector<Scalar> acc = (win.next->v - win.prev->v) / two_dt;
  return spec.kappa2(t) * acc + spec.kappa1(t) * win.mid->v;
}

/// <E, xi(w)> at the window centre; vanishes along exact trajectories when g
/// is a symmetry of L.
template <typename Scalar>
Scalar conserved_expression(const Generator<Scalar>& g, const Network<Scalar>& net,
                            const Window<Scalar>& win, const DynamicsSpec<Scalar>& spec,
                            ForceEstimate mode = ForceEstimate::FiniteDifference,
                            const Oracle<Scalar>* oracle = nullptr) {
  const Vector<Scalar> e = noether_force(win, spec, mode, oracle);
  return e.dot(apply_generator(g, net.with_params(win.mid->w)));
}

/// Basis {P_ij : i < j} of so(d): +1 at (i,j), -1 at (j,i).
template <typename Scalar>
std::vector<Matrix<Scalar>> skew_basis(Index d) {
  std::vector<Matrix<Scalar>> basis;
  for (Index i = 0; i < d; ++i)
    for (Index j = i + 1; j < d; ++j) {
      Matrix<Scalar> P = Matrix<Scalar>::Zero(d, d);
      P(i, j) = Scalar(1);
      P(j, i) = Scalar(-1);
      basis.push_back(std::move(P));
    }
  return basis;
}

/// Every neuron generator the architecture admits: Homogeneity for each
/// homogeneous hidden layer, SwishNeuron for each Swish layer.
template <typename Scalar>
std::vector<Generator<Scalar>> neuron_generators(const Network<Scalar>& net) {
  std::vector<Generator<Scalar>> out;
  for (Index h = 1; h < net.depth(); ++h) {
    const bool bias = net.has_bias(h);
    if (net.has_beta(h)) {
      for (Index i = 0; i < net.width(h); ++i) out.push_back(SwishNeuron{h, i, bias});
    } else if (auto p = net.activation(h).homogeneity_degree()) {
      for (Index i = 0; i < net.width(h); ++i) out.push_back(Homogeneity{h, i, *p, bias});
    }
  }
  return out;
}

}  // namespace noether

#endif  // NOETHER_SYMMETRY_HPP
