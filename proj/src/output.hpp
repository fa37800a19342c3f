#ifndef NOETHER_APP_OUTPUT_HPP
#define NOETHER_APP_OUTPUT_HPP

#include <ostream>
#include <string>
#include <vector>

#include "noether/trajectory.hpp"

namespace noether::app {

/// 17 significant digits with trailing zeros dropped, '.' as the decimal
/// point regardless of locale. nan/inf/-inf for non-finite values.
std::string format_number(double x);

/// RFC-4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(const std::string& text);

/// Header: step,t,loss then one column per monitor in recording order.
/// Matrix monitors are written as their Frobenius norm.
void write_csv(std::ostream& os, const Trajectory<double>& traj);

/// Matrices up to this size are written in full to JSONL.
inline constexpr Index kJsonlMatrixLimit = 64;

/// One JSON object per record.
void write_jsonl(std::ostream& os, const Trajectory<double>& traj);

struct Series {
  std::string label;
  std::vector<double> y;
};

/// SVG 1.1 line chart over `x` with `left` on the left axis and `right` on
/// the right axis.
std::string svg_two_axis(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                         const Series& left, const Series& right);

/// Writes `text` to `path`, creating parent directories.
void write_file(const std::string& path, const std::string& text);

}  // namespace noether::app

#endif  // NOETHER_APP_OUTPUT_HPP
