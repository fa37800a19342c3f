#ifndef NOETHER_TRAJECTORY_HPP
#define NOETHER_TRAJECTORY_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "noether/network.hpp"

namespace noether {

/// A tracked quantity is either a scalar or a small matrix.
template <typename Scalar>
using MonitorValue = std::variant<Scalar, Matrix<Scalar>>;

/// Scalar view of a monitor value: the value itself or the Frobenius norm.
template <typename Scalar>
Scalar scalar_view(const MonitorValue<Scalar>& v) {
  if (const auto* s = std::get_if<Scalar>(&v)) return *s;
  return std::get<Matrix<Scalar>>(v).norm();
}

/// One trajectory sample.
template <typename Scalar>
struct MonitorRecord {
  std::size_t step = 0;
  Scalar t = 0;
  Scalar loss = 0;
  std::vector<std::pair<std::string, MonitorValue<Scalar>>> quantities;

  const MonitorValue<Scalar>& at(const std::string& name) const {
    for (const auto& [key, value] : quantities)
      if (key == name) return value;
    throw InputError("no monitor named '" + name + "' in record");
  }
  Scalar scalar(const std::string& name) const { return scalar_view<Scalar>(at(name)); }
  const Matrix<Scalar>& matrix(const std::string& name) const {
    return std::get<Matrix<Scalar>>(at(name));
  }
};

/// Parameters (and velocity, for second-order dynamics) at a sampled step.
template <typename Scalar>
struct Snapshot {
  std::size_t step = 0;
  Scalar t = 0;
  Vector<Scalar> w;
  Vector<Scalar> v;  // empty for first-order dynamics
};

template <typename Scalar>
struct Trajectory {
  std::vector<MonitorRecord<Scalar>> records;
  std::vector<Snapshot<Scalar>> snapshots;  // parallel to records
  std::size_t sample_every = 1;
  Scalar dt = 0;  // time advanced per integrator step
  bool truncated = false;
  std::size_t truncation_step = 0;
  std::string truncation_reason;

  /// Time between consecutive samples.
  Scalar sample_spacing() const { return dt * static_cast<Scalar>(sample_every); }
  std::size_t size() const noexcept { return records.size(); }
};

/// Three consecutive, equally spaced samples centred on `mid`.
template <typename Scalar>
struct Window {
  const Snapshot<Scalar>* prev = nullptr;
  const Snapshot<Scalar>* mid = nullptr;
  const Snapshot<Scalar>* next = nullptr;
  Scalar spacing = 0;
};

/// Window centred on sample `centre` (needs 1 <= centre <= size-2).
template <typename Scalar>
Window<Scalar> window_at(const Trajectory<Scalar>& traj, std::size_t centre) {
  if (traj.snapshots.size() < 3)
    throw InputError("window needs at least 3 samples, trajectory has " +
                     std::to_string(traj.snapshots.size()));
  if (centre < 1 || centre + 1 >= traj.snapshots.size())
    throw InputError("window centre " + std::to_string(centre) + " has no neighbours");
  return {&traj.snapshots[centre - 1], &traj.snapshots[centre], &traj.snapshots[centre + 1],
          traj.sample_spacing()};
}

}  // namespace noether

#endif  // NOETHER_TRAJECTORY_HPP
