#ifndef NOETHER_ERROR_HPP
#define NOETHER_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace noether {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions, empty datasets, malformed arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input. Carries the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Generator family does not match the architecture it is applied to.
class GeneratorError : public Error {
 public:
  using Error::Error;
};

/// Finite group element cannot be formed (e.g. singular I + eps A).
class TransformError : public Error {
 public:
  using Error::Error;
};

/// Invalid dynamics specification (e.g. kappa2 <= 0).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Quantity requested for dynamics or data it is not defined for.
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration; `path()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace noether

#endif  // NOETHER_ERROR_HPP
