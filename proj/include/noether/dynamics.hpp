#ifndef NOETHER_DYNAMICS_HPP
#define NOETHER_DYNAMICS_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "noether/loss.hpp"
#include "noether/trajectory.hpp"

namespace noether {

/// The optimisation dynamics kappa2(t) w'' + kappa1(t) w' + grad L(w) = 0 and
/// the discrete schemes that realise them.
///
///   GF       kappa2 = 0, kappa1 = 1      explicit Euler, t advances by eta
///   ND       kappa2 = 1, kappa1 = 0      velocity Verlet, t advances by sqrt(eta)
///   NAGD     discrete Nesterov recursion (kappa1 = 3/t in the limit)
///   General  user kappa1, kappa2 > 0     friction-split velocity Verlet
enum class DynamicsKind { GF, ND, NAGD, General };

template <typename Scalar>
struct DynamicsSpec {
  DynamicsKind kind = DynamicsKind::GF;
  Scalar eta = Scalar(0.01);
  Scalar t_start = 0;
  std::size_t steps = 0;
  std::function<Scalar(Scalar)> kappa1_fn;  // General only
  std::function<Scalar(Scalar)> kappa2_fn;  // General only
  std::string label;

  static DynamicsSpec gradient_flow(Scalar eta, std::size_t steps) {
    return {DynamicsKind::GF, eta, Scalar(0), steps, {}, {}, "gf"};
  }
  static DynamicsSpec newtonian(Scalar eta, std::size_t steps) {
    return {DynamicsKind::ND, eta, Scalar(0), steps, {}, {}, "nd"};
  }
  static DynamicsSpec nesterov_discrete(Scalar eta, std::size_t steps) {
    return {DynamicsKind::NAGD, eta, Scalar(0), steps, {}, {}, "nagd"};
  }
  /// kappa2 = 1, kappa1 = 3/t from t = delta; delta <= 0 selects 10 sqrt(eta).
  static DynamicsSpec nesterov_flow(Scalar eta, std::size_t steps, Scalar delta = Scalar(-1)) {
    using std::sqrt;
    if (!(delta > Scalar(0))) delta = Scalar(10) * sqrt(eta);
    return {DynamicsKind::General, eta, delta, steps,
            [](Scalar t) { return Scalar(3) / t; }, [](Scalar) { return Scalar(1); }, "nagf"};
  }
  static DynamicsSpec general(Scalar eta, std::size_t steps, std::function<Scalar(Scalar)> k1,
                              std::function<Scalar(Scalar)> k2, Scalar t_start = Scalar(0)) {
    return {DynamicsKind::General, eta, t_start, steps, std::move(k1), std::move(k2), "general"};
  }

  Scalar kappa1(Scalar t) const {
    switch (kind) {
      case DynamicsKind::GF: return Scalar(1);
      case DynamicsKind::ND: return Scalar(0);
      case DynamicsKind::NAGD: return Scalar(3) / t;
      case DynamicsKind::General: return kappa1_fn(t);
    }
    return Scalar(0);
  }
  Scalar kappa2(Scalar t) const {
    switch (kind) {
      case DynamicsKind::GF: return Scalar(0);
      case DynamicsKind::ND:
      case DynamicsKind::NAGD: return Scalar(1);
      case DynamicsKind::General: return kappa2_fn(t);
    }
    return Scalar(1);
  }

  bool second_order() const noexcept { return kind != DynamicsKind::GF; }

  /// Continuous time advanced by one step: eta for GF, sqrt(eta) otherwise.
  Scalar time_step() const {
    using std::sqrt;
    return kind == DynamicsKind::GF ? eta : sqrt(eta);
  }

  void validate() const {
    if (!(eta > Scalar(0))) throw SpecError("step size eta must be positive");
    if (!(t_start >= Scalar(0))) throw SpecError("t_start must be non-negative");
    if (kind == DynamicsKind::General) {
      if (!kappa1_fn || !kappa2_fn) throw SpecError("general dynamics need kappa1 and kappa2");
      if (!(kappa2_fn(t_start) > Scalar(0))) throw SpecError("kappa2(t_start) must be positive");
    }
  }
};

/// Integrator state. `v` is the velocity w' at time t (empty for GF);
/// `w_prev` is the previous iterate (NAGD only). `grad`/`loss` cache the
/// objective at the current w when `evaluated` is set.
template <typename Scalar>
struct DynamicsState {
  Vector<Scalar> w;
  Vector<Scalar> v;
  Vector<Scalar> w_prev;
  Scalar t = 0;
  std::size_t k = 0;

  Vector<Scalar> grad;
  Scalar loss = std::numeric_limits<Scalar>::quiet_NaN();
  bool evaluated = false;
};

/// A step produced a non-finite gradient or iterate. `last()` is the last
/// finite state.
template <typename Scalar>
class DivergedError : public Error {
 public:
  explicit DivergedError(DynamicsState<Scalar> last)
      : Error("trajectory diverged at step " + std::to_string(last.k)), last_(std::move(last)) {}
  const DynamicsState<Scalar>& last() const noexcept { return last_; }

 private:
  DynamicsState<Scalar> last_;
};

/// Loss and gradient at a flat parameter vector.
template <typename Scalar>
using Oracle = std::function<LossAndGrad<Scalar>(const Vector<Scalar>&)>;

template <typename Scalar>
Oracle<Scalar> make_oracle(const Objective<Scalar>& obj) {
  return [&obj](const Vector<Scalar>& w) { return obj.value_and_gradient(w); };
}

/// Oracle from a bare gradient function; the loss reads as NaN.
template <typename Scalar>
Oracle<Scalar> gradient_oracle(std::function<Vector<Scalar>(const Vector<Scalar>&)> g) {
  return [g = std::move(g)](const Vector<Scalar>& w) {
    return LossAndGrad<Scalar>{std::numeric_limits<Scalar>::quiet_NaN(), g(w)};
  };
}

template <typename Scalar>
DynamicsState<Scalar> initial_state(const DynamicsSpec<Scalar>& spec, Vector<Scalar> w,
                                    std::optional<Vector<Scalar>> v = std::nullopt) {
  spec.validate();
  DynamicsState<Scalar> s;
  s.t = spec.t_start;
  if (spec.second_order()) {
    s.v = v ? *v : Vector<Scalar>::Zero(w.size());
    if (s.v.size() != w.size()) throw InputError("initial velocity has the wrong length");
  }
  if (spec.kind == DynamicsKind::NAGD) s.w_prev = w;
  s.w = std::move(w);
  return s;
}

template <typename Scalar>
DynamicsState<Scalar> initial_state(const DynamicsSpec<Scalar>& spec, Vector<Scalar> w,
                                    Vector<Scalar> v) {
  return initial_state(spec, std::move(w), std::optional<Vector<Scalar>>(std::move(v)));
}

namespace detail {

template <typename Scalar>
void evaluate(DynamicsState<Scalar>& s, const Oracle<Scalar>& oracle) {
  if (s.evaluated) return;
  auto lg = oracle(s.w);
  if (!lg.grad.allFinite()) throw DivergedError<Scalar>(s);
  s.grad = std::move(lg.grad);
  s.loss = lg.value;
  s.evaluated = true;
}

template <typename Scalar>
void ensure_finite(const DynamicsState<Scalar>& next, const DynamicsState<Scalar>& last) {
  if (!next.w.allFinite() || (next.v.size() > 0 && !next.v.allFinite()))
    throw DivergedError<Scalar>(last);
}

}  // namespace detail

/// w' = w - eta grad L(w).
template <typename Scalar>
DynamicsState<Scalar> step_gf(const DynamicsSpec<Scalar>& spec, DynamicsState<Scalar> s,
                              const Oracle<Scalar>& oracle) {
  detail::evaluate(s, oracle);
  DynamicsState<Scalar> next;
  next.w = s.w - spec.eta * s.grad;
  next.t = s.t + spec.eta;
  next.k = s.k + 1;
  detail::ensure_finite(next, s);
  return next;
}

/// Velocity Verlet for w'' = -grad L(w) with h = sqrt(eta):
///   v+ = v - (h/2) g(w);  w' = w + h v+;  v' = v+ - (h/2) g(w').
/// Positions obey w_{k+2} = 2 w_{k+1} - w_k - eta grad L(w_{k+1}).
template <typename Scalar>
DynamicsState<Scalar> step_nd(const DynamicsSpec<Scalar>& spec, DynamicsState<Scalar> s,
                              const Oracle<Scalar>& oracle) {
  detail::evaluate(s, oracle);
  const Scalar h = spec.time_step();
  const Scalar half = h / Scalar(2);
  DynamicsState<Scalar> next;
  Vector<Scalar> v_half = s.v - half * s.grad;
  next.w = s.w + h * v_half;
  next.t = s.t + h;
  next.k = s.k + 1;
  next.v = v_half;
  detail::ensure_finite(next, s);
  detail::evaluate(next, oracle);
  next.v -= half * next.grad;
  detail::ensure_finite(next, s);
  return next;
}

/// Discrete Nesterov recursion: y_k = w_k + (k-1)/(k+2) (w_k - w_{k-1}) with
/// y_0 = w_0, then w_{k+1} = y_k - eta grad L(y_k). The stored velocity is the
/// backward difference (w_{k+1} - w_k) / sqrt(eta).
template <typename Scalar>
DynamicsState<Scalar> step_nagd(const DynamicsSpec<Scalar>& spec, DynamicsState<Scalar> s,
                                const Oracle<Scalar>& oracle) {
  const Scalar kk = static_cast<Scalar>(s.k);
  const Scalar momentum = s.k == 0 ? Scalar(0) : (kk - Scalar(1)) / (kk + Scalar(2));
  const Vector<Scalar> y = s.w + momentum * (s.w - s.w_prev);
  auto lg = oracle(y);
  if (!lg.grad.allFinite()) throw DivergedError<Scalar>(s);
  const Scalar h = spec.time_step();
  DynamicsState<Scalar> next;
  next.w = y - spec.eta * lg.grad;
  next.w_prev = s.w;
  next.v = (next.w - s.w) / h;
  next.t = s.t + h;
  next.k = s.k + 1;
  detail::ensure_finite(next, s);
  return next;
}

/// Strang splitting for kappa2 w'' + kappa1 w' + grad L = 0 with h = sqrt(eta):
/// exact friction decay exp(-int kappa1/kappa2) over each half step (midpoint
/// quadrature) around a velocity-Verlet kick-drift-kick. With kappa1 = 0 and
/// kappa2 = 1 this is step_nd.
template <typename Scalar>
DynamicsState<Scalar> step_general(const DynamicsSpec<Scalar>& spec, DynamicsState<Scalar> s,
                                   const Oracle<Scalar>& oracle) {
  using std::exp;
  const Scalar h = spec.time_step();
  const Scalar half = h / Scalar(2);
  const Scalar t0 = s.t;
  const Scalar m0 = spec.kappa2(t0);
  const Scalar m1 = spec.kappa2(t0 + h);
  if (!(m0 > Scalar(0)) || !(m1 > Scalar(0)))
    throw SpecError("kappa2 must stay positive on the integration window (t = " +
                    std::to_string(static_cast<double>(t0)) + ")");
  const Scalar ta = t0 + h / Scalar(4);
  const Scalar tb = t0 + Scalar(3) * h / Scalar(4);
  const Scalar decay_a = exp(-half * spec.kappa1(ta) / spec.kappa2(ta));
  const Scalar decay_b = exp(-half * spec.kappa1(tb) / spec.kappa2(tb));

  detail::evaluate(s, oracle);
  DynamicsState<Scalar> next;
  Vector<Scalar> v_half = decay_a * s.v;
  v_half -= (half / m0) * s.grad;
  next.w = s.w + h * v_half;
  next.t = t0 + h;
  next.k = s.k + 1;
  next.v = v_half;
  detail::ensure_finite(next, s);
  detail::evaluate(next, oracle);
  next.v -= (half / m1) * next.grad;
  next.v *= decay_b;
  detail::ensure_finite(next, s);
  return next;
}

template <typename Scalar>
DynamicsState<Scalar> step(const DynamicsSpec<Scalar>& spec, DynamicsState<Scalar> s,
                           const Oracle<Scalar>& oracle) {
  switch (spec.kind) {
    case DynamicsKind::GF: return step_gf(spec, std::move(s), oracle);
    case DynamicsKind::ND: return step_nd(spec, std::move(s), oracle);
    case DynamicsKind::NAGD: return step_nagd(spec, std::move(s), oracle);
    case DynamicsKind::General: return step_general(spec, std::move(s), oracle);
  }
  return s;
}

/// What a monitor sees at a sampled step.
template <typename Scalar>
struct MonitorContext {
  const Network<Scalar>& net;  // parameters at the current w
  const DynamicsState<Scalar>& state;
  const DynamicsSpec<Scalar>& spec;
  const LossSpec<Scalar>& loss_spec;
  Scalar loss;
};

template <typename Scalar>
struct Monitor {
  std::string name;
  std::function<MonitorValue<Scalar>(const MonitorContext<Scalar>&)> eval;
};

template <typename Scalar>
struct RunOptions {
  std::size_t sample_every = 1;
  std::optional<Vector<Scalar>> initial_velocity;
};

/// Integrates `spec.steps` steps from the parameters of `net`, recording the
/// loss and every monitor at steps that are multiples of `sample_every`.
/// A diverging run stops at the last finite sample with `truncated` set.
template <typename Scalar>
Trajectory<Scalar> run(const DynamicsSpec<Scalar>& spec, const Network<Scalar>& net,
                       const LossSpec<Scalar>& ls, const std::vector<Monitor<Scalar>>& monitors,
                       const RunOptions<Scalar>& opts = {}) {
  if (opts.sample_every == 0) throw InputError("sample_every must be positive");
  const Objective<Scalar> objective(net, ls);
  const Oracle<Scalar> oracle = make_oracle(objective);

  Trajectory<Scalar> traj;
  traj.sample_every = opts.sample_every;
  traj.dt = spec.time_step();

  DynamicsState<Scalar> state = initial_state(spec, net.flatten(), opts.initial_velocity);
  auto record = [&]() {
    detail::evaluate(state, oracle);
    const Network<Scalar> current = objective.network_at(state.w);
    MonitorRecord<Scalar> rec;
    rec.step = state.k;
    rec.t = state.t;
    rec.loss = state.loss;
    const MonitorContext<Scalar> ctx{current, state, spec, ls, state.loss};
    for (const auto& m : monitors) rec.quantities.emplace_back(m.name, m.eval(ctx));
    traj.records.push_back(std::move(rec));
    traj.snapshots.push_back({state.k, state.t, state.w, state.v});
  };

  try {
    record();
    for (std::size_t i = 0; i < spec.steps; ++i) {
      state = step(spec, std::move(state), oracle);
      if (state.k % opts.sample_every == 0) record();
    }
  } catch (const DivergedError<Scalar>& e) {
    traj.truncated = true;
    traj.truncation_step = e.last().k;
    traj.truncation_reason = e.what();
  }
  return traj;
}

}  // namespace noether

#endif  // NOETHER_DYNAMICS_HPP
