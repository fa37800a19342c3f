#include "noether/activation.hpp"

#include <charconv>
#include <sstream>

namespace noether {

namespace {

double parse_number(const std::string& text, const std::string& whole) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InputError("bad activation parameter in '" + whole + "'");
  return value;
}

}  // namespace

Activation Activation::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const bool has_arg = colon != std::string::npos;
  const std::string arg = has_arg ? text.substr(colon + 1) : std::string();

  if (name == "relu" && !has_arg) return relu();
  if (name == "swish" && !has_arg) return swish();
  if (name == "linear") return linear(has_arg ? parse_number(arg, text) : 1.0);
  if (name == "leaky_relu") return leaky_relu(has_arg ? parse_number(arg, text) : 0.01);
  if (name == "repu" && has_arg) return repu(parse_number(arg, text));
  if (name == "polynomial" && has_arg) {
    const double p = parse_number(arg, text);
    if (p != static_cast<double>(static_cast<int>(p)))
      throw InputError("Polynomial activation requires integer p >= 1");
    return polynomial(static_cast<int>(p));
  }
  throw InputError("unknown activation '" + text + "'");
}

std::string Activation::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Linear:
      os << "linear";
      if (param_ != 1.0) os << ':' << param_;
      break;
    case Kind::ReLU: os << "relu"; break;
    case Kind::LeakyReLU: os << "leaky_relu:" << param_; break;
    case Kind::Polynomial: os << "polynomial:" << static_cast<int>(param_); break;
    case Kind::RePU: os << "repu:" << param_; break;
    case Kind::Swish: os << "swish"; break;
  }
  return os.str();
}

}  // namespace noether
