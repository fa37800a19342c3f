#ifndef NOETHER_CONSERVATION_HPP
#define NOETHER_CONSERVATION_HPP

#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "noether/dynamics.hpp"
#include "noether/symmetry.hpp"
#include "noether/trajectory.hpp"

namespace noether {

namespace detail {

template <typename Scalar>
void check_pair(const Network<Scalar>& net, Index h) {
  if (h < 1 || h >= net.depth())
    throw InputError("layer pair (h, h+1) needs 1 <= h < K, got h = " + std::to_string(h));
}

}  // namespace detail

/// ||W^(h)||^2 + [bias] ||b^(h)||^2 - p ||W^(h+1)||^2 - [swish] ||beta^(h)||^2.
/// The flags must match the architecture of layer h.
template <typename Scalar>
Scalar norm_gap(const Network<Scalar>& net, Index h, Scalar p, bool with_bias = false,
                bool with_swish = false) {
  detail::check_pair(net, h);
  if (with_bias != net.has_bias(h))
    throw InputError("with_bias does not match layer " + std::to_string(h));
  if (with_swish != net.has_beta(h))
    throw InputError("with_swish does not match layer " + std::to_string(h));
  Scalar gap = net.weight(h).squaredNorm() - p * net.weight(h + 1).squaredNorm();
  if (with_bias) gap += net.bias(h).squaredNorm();
  if (with_swish) gap -= net.beta(h).squaredNorm();
  return gap;
}

/// norm_gap with flags taken from the architecture.
template <typename Scalar>
Scalar layer_gap(const Network<Scalar>& net, Index h, Scalar p) {
  return norm_gap(net, h, p, net.has_bias(h), net.has_beta(h));
}

/// The per-neuron refinement of layer_gap:
/// ||W^(h)[i,:]||^2 + b_i^2 - p ||W^(h+1)[:,i]||^2 - beta_i^2.
template <typename Scalar>
Scalar neuron_gap(const Network<Scalar>& net, Index h, Index i, Scalar p) {
  detail::check_pair(net, h);
  if (i < 0 || i >= net.width(h)) throw InputError("neuron index outside layer");
  Scalar gap = net.weight(h).row(i).squaredNorm() - p * net.weight(h + 1).col(i).squaredNorm();
  if (net.has_bias(h)) gap += net.bias(h)(i) * net.bias(h)(i);
  if (net.has_beta(h)) gap -= net.beta(h)(i) * net.beta(h)(i);
  return gap;
}

/// W^(h) W^(h)^T - W^(h+1)^T W^(h+1).
template <typename Scalar>
Matrix<Scalar> balancedness_residual(const Network<Scalar>& net, Index h) {
  detail::check_pair(net, h);
  return net.weight(h) * net.weight(h).transpose() -
         net.weight(h + 1).transpose() * net.weight(h + 1);
}

/// W^(h) E_h^T - E_(h+1)^T W^(h+1), with E = kappa2 W'' + kappa1 W' estimated
/// at the window centre. tr(R A) = <E, xi_A> for the LinearLayer generator A.
template <typename Scalar>
Matrix<Scalar> dynamic_balance_residual(const Network<Scalar>& net, const Window<Scalar>& win,
                                        Index h, const DynamicsSpec<Scalar>& spec,
                                        ForceEstimate mode = ForceEstimate::FiniteDifference,
                                        const Oracle<Scalar>* oracle = nullptr) {
  detail::check_pair(net, h);
  const Vector<Scalar> e = noether_force(win, spec, mode, oracle);
  const Matrix<Scalar> w0 = weight_block(net, win.mid->w, h);
  const Matrix<Scalar> w1 = weight_block(net, win.mid->w, h + 1);
  return w0 * weight_block(net, e, h).transpose() - weight_block(net, e, h + 1).transpose() * w1;
}

/// W'^(h) W'^(h)^T - W'^(h+1)^T W'^(h+1): half the second time derivative of
/// balancedness_residual under ND.
template <typename Scalar>
Matrix<Scalar> nd_balance_second_derivative(const Network<Scalar>& net, const Vector<Scalar>& v,
                                            Index h) {
  detail::check_pair(net, h);
  if (v.size() == 0) throw NotApplicableError("first-order dynamics carry no velocity");
  const Matrix<Scalar> v0 = weight_block(net, v, h);
  const Matrix<Scalar> v1 = weight_block(net, v, h + 1);
  return v0 * v0.transpose() - v1.transpose() * v1;
}

/// E_1^T W^(1) - W^(1)^T E_1 at the window centre. Entry (j, i) equals
/// conserved_expression for the rotation generator P_ij.
template <typename Scalar>
Matrix<Scalar> rotation_residual(const Network<Scalar>& net, const Window<Scalar>& win,
                                 const DynamicsSpec<Scalar>& spec,
                                 ForceEstimate mode = ForceEstimate::FiniteDifference,
                                 const Oracle<Scalar>* oracle = nullptr) {
  const Vector<Scalar> e = noether_force(win, spec, mode, oracle);
  const Matrix<Scalar> w = weight_block(net, win.mid->w, 1);
  const Matrix<Scalar> m = weight_block(net, e, 1).transpose() * w;
  return m - m.transpose();
}

/// W'^(1)^T W^(1) - W^(1)^T W'^(1); constant in time under ND with a
/// rotation-invariant loss.
template <typename Scalar>
Matrix<Scalar> rotation_momentum(const Network<Scalar>& net, const Vector<Scalar>& w,
                                 const Vector<Scalar>& v) {
  if (v.size() == 0) throw NotApplicableError("first-order dynamics carry no velocity");
  const Matrix<Scalar> m = weight_block(net, v, 1).transpose() * weight_block(net, w, 1);
  return m - m.transpose();
}

/// v x w for 3-vectors (v = w').
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> angular_momentum(const Vector<Scalar>& w, const Vector<Scalar>& v) {
  if (w.size() != 3 || v.size() != 3)
    throw InputError("angular momentum needs 3-dimensional w and v");
  const Eigen::Matrix<Scalar, 3, 1> w3 = w, v3 = v;
  return v3.cross(w3);
}

/// 0.5 ||v||^2 + L(w).
template <typename Scalar>
Scalar hamiltonian(const Vector<Scalar>& v, Scalar loss_value) {
  if (v.size() == 0) throw NotApplicableError("hamiltonian needs second-order dynamics");
  return Scalar(0.5) * v.squaredNorm() + loss_value;
}

/// Sum over consecutive layer pairs of |layer_gap| with p the homogeneity
/// degree of layer h (1 for Swish).
template <typename Scalar>
Scalar total_abs_gap(const Network<Scalar>& net) {
  using std::abs;
  Scalar total(0);
  for (Index h = 1; h < net.depth(); ++h) {
    const Scalar p(net.activation(h).homogeneity_degree().value_or(1.0));
    total += abs(layer_gap(net, h, p));
  }
  return total;
}

template <typename Scalar>
struct GrowthBoundReport {
  bool holds = true;
  Scalar loss0 = 0;
  Scalar min_margin = std::numeric_limits<Scalar>::infinity();  // min of rhs - lhs
  std::size_t worst_sample = 0;
  std::vector<Scalar> lhs;  // sum |gap(t)| - sum |gap(0)|
  std::vector<Scalar> rhs;  // 2 (L(w(0)) - L*) t^2, L* = 0
};

/// Checks sum_h |gap_h(t)| - sum_h |gap_h(0)| <= 2 L(w(0)) (t - t0)^2 at every
/// sample of an ND trajectory started from rest.
template <typename Scalar>
GrowthBoundReport<Scalar> norm_gap_growth_bound_check(const Trajectory<Scalar>& traj,
                                                      const Network<Scalar>& net) {
  if (traj.snapshots.empty()) throw InputError("empty trajectory");
  const auto& first = traj.snapshots.front();
  if (first.v.size() == 0 || first.v.squaredNorm() != Scalar(0))
    throw NotApplicableError("growth bound needs a second-order trajectory from rest");
  GrowthBoundReport<Scalar> rep;
  rep.loss0 = traj.records.front().loss;
  const Scalar gap0 = total_abs_gap(net.with_params(first.w));
  const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + gap0);
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const auto& snap = traj.snapshots[s];
    const Scalar dt = snap.t - first.t;
    const Scalar l = total_abs_gap(net.with_params(snap.w)) - gap0;
    const Scalar r = Scalar(2) * rep.loss0 * dt * dt;
    rep.lhs.push_back(l);
    rep.rhs.push_back(r);
    if (r - l < rep.min_margin) {
      rep.min_margin = r - l;
      rep.worst_sample = s;
    }
    if (l > r + slack) rep.holds = false;
  }
  return rep;
}

// Monitors for trajectory logging.

template <typename Scalar>
Monitor<Scalar> norm_gap_monitor(std::string name, Index h, Scalar p) {
  return {std::move(name), [h, p](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return layer_gap(c.net, h, p);
          }};
}

template <typename Scalar>
Monitor<Scalar> neuron_gap_monitor(std::string name, Index h, Index i, Scalar p) {
  return {std::move(name), [h, i, p](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return neuron_gap(c.net, h, i, p);
          }};
}

template <typename Scalar>
Monitor<Scalar> balancedness_monitor(std::string name, Index h) {
  return {std::move(name), [h](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return balancedness_residual(c.net, h);
          }};
}

template <typename Scalar>
Monitor<Scalar> rotation_momentum_monitor(std::string name) {
  return {std::move(name), [](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return rotation_momentum(c.net, c.state.w, c.state.v);
          }};
}

/// Component k (0, 1, 2) of v x w.
template <typename Scalar>
Monitor<Scalar> angular_momentum_monitor(std::string name, int k) {
  return {std::move(name), [k](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return angular_momentum(c.state.w, c.state.v)(k);
          }};
}

template <typename Scalar>
Monitor<Scalar> hamiltonian_monitor(std::string name) {
  return {std::move(name), [](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return hamiltonian(c.state.v, c.loss);
          }};
}

template <typename Scalar>
Monitor<Scalar> kinetic_energy_monitor(std::string name) {
  return {std::move(name), [](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            if (c.state.v.size() == 0)
              throw NotApplicableError("kinetic energy needs second-order dynamics");
            return Scalar(0.5) * c.state.v.squaredNorm();
          }};
}

template <typename Scalar>
Monitor<Scalar> total_abs_gap_monitor(std::string name) {
  return {std::move(name), [](const MonitorContext<Scalar>& c) -> MonitorValue<Scalar> {
            return total_abs_gap(c.net);
          }};
}

}  // namespace noether

#endif  // NOETHER_CONSERVATION_HPP
