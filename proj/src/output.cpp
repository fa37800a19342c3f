#include "output.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace noether::app {

namespace {

nlohmann::json value_json(const MonitorValue<double>& value) {
  if (const double* s = std::get_if<double>(&value)) return std::isfinite(*s) ? nlohmann::json(*s) : nlohmann::json(nullptr);
  const auto& m = std::get<Matrix<double>>(value);
  nlohmann::json out = {{"rows", m.rows()}, {"cols", m.cols()}, {"frobenius", m.norm()}};
  if (m.rows() <= kJsonlMatrixLimit && m.cols() <= kJsonlMatrixLimit) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    out["data"] = std::move(rows);
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0, hi = 1;
};

Range finite_range(const std::vector<double>& v) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double x : v)
    if (std::isfinite(x)) {
      r.lo = std::min(r.lo, x);
      r.hi = std::max(r.hi, x);
    }
  if (!(r.lo <= r.hi)) return {0, 1};
  if (r.lo == r.hi) {
    const double pad = r.lo == 0 ? 1.0 : 0.5 * std::abs(r.lo);
    return {r.lo - pad, r.hi + pad};
  }
  return r;
}

std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, end);
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_csv(std::ostream& os, const Trajectory<double>& traj) {
  os << "step,t,loss";
  if (!traj.records.empty())
    for (const auto& [name, v] : traj.records.front().quantities) os << ',' << csv_field(name);
  os << "\r\n";
  for (const auto& r : traj.records) {
    os << r.step << ',' << format_number(r.t) << ',' << format_number(r.loss);
    for (const auto& [name, v] : r.quantities) os << ',' << format_number(scalar_view(v));
    os << "\r\n";
  }
}

void write_jsonl(std::ostream& os, const Trajectory<double>& traj) {
  for (const auto& r : traj.records) {
    nlohmann::json rec = {{"step", r.step}, {"t", r.t}};
    rec["loss"] = std::isfinite(r.loss) ? nlohmann::json(r.loss) : nlohmann::json(nullptr);
    nlohmann::json q = nlohmann::json::object();
    for (const auto& [name, v] : r.quantities) q[name] = value_json(v);
    rec["quantities"] = std::move(q);
    os << rec.dump() << '\n';
  }
  if (traj.truncated) {
    os << nlohmann::json{{"truncated", true},
                         {"truncation_step", traj.truncation_step},
                         {"reason", traj.truncation_reason}}
              .dump()
       << '\n';
  }
}

std::string svg_two_axis(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                         const Series& left, const Series& right) {
  constexpr double W = 720, H = 400, ml = 80, mr = 80, mt = 40, mb = 50;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const Range rx = finite_range(x), rl = finite_range(left.y), rr = finite_range(right.y);
  auto px = [&](double v) { return ml + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double v, const Range& r) { return mt + ph - (v - r.lo) / (r.hi - r.lo) * ph; };
  auto path = [&](const std::vector<double>& y, const Range& r) {
    std::ostringstream d;
    bool pen = false;
    for (std::size_t j = 0; j < std::min(x.size(), y.size()); ++j) {
      if (!std::isfinite(x[j]) || !std::isfinite(y[j])) {
        pen = false;
        continue;
      }
      d << (pen ? " L" : " M") << tick(px(x[j])) << ' ' << tick(py(y[j], r));
      pen = true;
    }
    return d.str();
  };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
    << "</text>\n"
    << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double f = k / 4.0;
    const double yy = mt + ph - f * ph;
    const double xx = ml + f * pw;
    s << "<text x=\"" << ml - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\" fill=\"#1f77b4\">"
      << tick(rl.lo + f * (rl.hi - rl.lo)) << "</text>\n"
      << "<text x=\"" << ml + pw + 6 << "\" y=\"" << yy + 4 << "\" fill=\"#d62728\">"
      << tick(rr.lo + f * (rr.hi - rr.lo)) << "</text>\n"
      << "<text x=\"" << xx << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">"
      << tick(rx.lo + f * (rx.hi - rx.lo)) << "</text>\n";
  }
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
    << "</text>\n"
    << "<text transform=\"translate(18," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\" fill=\"#1f77b4\">"
    << xml_escape(left.label) << "</text>\n"
    << "<text transform=\"translate(" << W - 14 << ',' << mt + ph / 2
    << ") rotate(90)\" text-anchor=\"middle\" fill=\"#d62728\">" << xml_escape(right.label) << "</text>\n"
    << "<path d=\"" << path(left.y, rl) << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n"
    << "<path d=\"" << path(right.y, rr) << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n"
    << "</svg>\n";
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InputError("cannot write '" + path + "'");
  os << text;
  if (!os) throw InputError("write failed for '" + path + "'");
}

}  // namespace noether::app
