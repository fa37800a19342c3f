#ifndef NOETHER_NTK_HPP
#define NOETHER_NTK_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "noether/dynamics.hpp"
#include "noether/trajectory.hpp"

namespace noether {

inline constexpr Index kMaxGramSamples = 512;

namespace detail {

template <typename Scalar>
void require_scalar_output(const Network<Scalar>& net) {
  if (net.output_dim() != 1)
    throw NotApplicableError("kernel suite needs a scalar-output network, d_K = " +
                             std::to_string(net.output_dim()));
}

}  // namespace detail

/// Phi(x) = d f_w(x) / d w.
template <typename Scalar>
Vector<Scalar> tangent_features(const Network<Scalar>& net, const Vector<Scalar>& x) {
  detail::require_scalar_output(net);
  ForwardCache<Scalar> cache;
  net.forward(Matrix<Scalar>(x), &cache);
  return net.backward(cache, Matrix<Scalar>::Ones(1, 1));
}

/// Rows are Phi(x_i) for the rows x_i of `inputs` (n x d_0).
template <typename Scalar>
Matrix<Scalar> tangent_feature_matrix(const Network<Scalar>& net, const Matrix<Scalar>& inputs) {
  detail::require_scalar_output(net);
  Matrix<Scalar> phi(inputs.rows(), net.param_count());
  for (Index i = 0; i < inputs.rows(); ++i)
    phi.row(i) = tangent_features<Scalar>(net, inputs.row(i).transpose()).transpose();
  return phi;
}

/// H_ij = <Phi(x_i), Phi(x_j)>.
template <typename Scalar>
Matrix<Scalar> gram(const Network<Scalar>& net, const Matrix<Scalar>& inputs) {
  if (inputs.rows() > kMaxGramSamples)
    throw InputError("gram is dense; at most " + std::to_string(kMaxGramSamples) + " samples");
  const Matrix<Scalar> phi = tangent_feature_matrix(net, inputs);
  Matrix<Scalar> h = Matrix<Scalar>::Zero(phi.rows(), phi.rows());
  h.template selfadjointView<Eigen::Lower>().rankUpdate(phi);
  return h.template selfadjointView<Eigen::Lower>();
}

/// Predictions f_w(x_i) as a vector, for scalar-output networks.
template <typename Scalar>
Vector<Scalar> predictions(const Network<Scalar>& net, const Matrix<Scalar>& inputs) {
  detail::require_scalar_output(net);
  return net.forward(inputs.transpose()).row(0).transpose();
}

template <typename Scalar>
struct KernelTrajectory {
  std::vector<Scalar> t;
  std::vector<Vector<Scalar>> u;
  std::vector<Vector<Scalar>> v;  // empty entries for GF
  std::size_t sample_every = 1;
};

/// Linearised dynamics in prediction space: u' = -H (u - y) for GF (explicit
/// Euler, step eta) and u'' = -H (u - y) for ND (velocity Verlet, step
/// sqrt(eta)), started from rest.
template <typename Scalar>
KernelTrajectory<Scalar> kernel_dynamics_run(const Matrix<Scalar>& H, const Vector<Scalar>& y,
                                             const Vector<Scalar>& u0, DynamicsKind kind,
                                             Scalar eta, std::size_t steps,
                                             std::size_t sample_every = 1) {
  using std::sqrt;
  if (H.rows() != H.cols() || H.rows() != y.size() || y.size() != u0.size())
    throw InputError("kernel dynamics: H must be n x n with y, u0 of length n");
  if (kind != DynamicsKind::GF && kind != DynamicsKind::ND)
    throw NotApplicableError("kernel dynamics support GF and ND only");
  if (!(eta > Scalar(0))) throw SpecError("eta must be positive");
  if (sample_every == 0) throw InputError("sample_every must be positive");

  KernelTrajectory<Scalar> out;
  out.sample_every = sample_every;
  Vector<Scalar> u = u0;
  Vector<Scalar> v = Vector<Scalar>::Zero(u.size());
  const bool second = kind == DynamicsKind::ND;
  const Scalar h = second ? sqrt(eta) : eta;
  const Scalar half = h / Scalar(2);
  Vector<Scalar> force = -H * (u - y);
  auto record = [&](std::size_t k) {
    out.t.push_back(static_cast<Scalar>(k) * h);
    out.u.push_back(u);
    out.v.push_back(second ? v : Vector<Scalar>());
  };
  record(0);
  for (std::size_t k = 1; k <= steps; ++k) {
    if (second) {
      v += half * force;
      u += h * v;
      force = -H * (u - y);
      v += half * force;
    } else {
      u += eta * force;
      force = -H * (u - y);
    }
    if (k % sample_every == 0) record(k);
  }
  return out;
}

template <typename Scalar>
struct VelocityStats {
  Scalar sup_norm = 0;     // sup_t ||v||
  Scalar sup_max = 0;      // sup_t max_i |v_i|
  Scalar sup_avg = 0;      // sup_t mean_i |v_i|
  Scalar loss0 = 0;
  Scalar norm_bound = 0;   // sqrt(2 L0)
  Scalar avg_bound = 0;    // sqrt(2 L0 / m)
  Index m = 0;
};

template <typename Scalar>
VelocityStats<Scalar> velocity_stats(const Trajectory<Scalar>& traj) {
  using std::max;
  using std::sqrt;
  if (traj.snapshots.empty()) throw InputError("empty trajectory");
  if (traj.snapshots.front().v.size() == 0)
    throw NotApplicableError("velocity statistics need second-order dynamics");
  VelocityStats<Scalar> s;
  s.m = traj.snapshots.front().v.size();
  s.loss0 = traj.records.front().loss;
  s.norm_bound = sqrt(Scalar(2) * s.loss0);
  s.avg_bound = sqrt(Scalar(2) * s.loss0 / Scalar(s.m));
  for (const auto& snap : traj.snapshots) {
    const auto a = snap.v.cwiseAbs();
    s.sup_norm = max(s.sup_norm, snap.v.norm());
    s.sup_max = max(s.sup_max, a.maxCoeff());
    s.sup_avg = max(s.sup_avg, a.mean());
  }
  return s;
}

/// max_i |w_i(T) - w_i(0)|.
template <typename Scalar>
Scalar weight_movement(const Trajectory<Scalar>& traj) {
  if (traj.snapshots.size() < 2) return Scalar(0);
  return (traj.snapshots.back().w - traj.snapshots.front().w).cwiseAbs().maxCoeff();
}

/// Network predictions on `inputs` at every snapshot.
template <typename Scalar>
std::vector<Vector<Scalar>> prediction_trajectory(const Trajectory<Scalar>& traj,
                                                  const Network<Scalar>& net,
                                                  const Matrix<Scalar>& inputs) {
  std::vector<Vector<Scalar>> out;
  out.reserve(traj.snapshots.size());
  for (const auto& snap : traj.snapshots) out.push_back(predictions(net.with_params(snap.w), inputs));
  return out;
}

/// sup over samples of max_i |u_net,i - u_kernel,i|.
template <typename Scalar>
Scalar network_vs_kernel_divergence(const std::vector<Vector<Scalar>>& net_u,
                                    const std::vector<Vector<Scalar>>& kernel_u) {
  using std::max;
  if (net_u.size() != kernel_u.size())
    throw InputError("network and kernel trajectories have different sample counts");
  Scalar sup(0);
  for (std::size_t s = 0; s < net_u.size(); ++s) {
    if (net_u[s].size() != kernel_u[s].size())
      throw InputError("network and kernel predictions differ in length");
    sup = max(sup, (net_u[s] - kernel_u[s]).cwiseAbs().maxCoeff());
  }
  return sup;
}

}  // namespace noether

#endif  // NOETHER_NTK_HPP
