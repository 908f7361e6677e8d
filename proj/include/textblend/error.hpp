#pragma once

#include <stdexcept>
#include <string>

namespace textblend {

/// Error taxonomy shared by the library and the CLI. The CLI maps kinds to
/// exit codes: usage -> 2, config -> 3, everything else -> 1.
class Error : public std::runtime_error {
 public:
  enum class Kind { dimension, numeric, usage, input, config, io, internal };

  Error(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

  const char* kind_name() const {
    switch (kind_) {
      case Kind::dimension: return "dimension";
      case Kind::numeric: return "numeric";
      case Kind::usage: return "usage";
      case Kind::input: return "input";
      case Kind::config: return "config";
      case Kind::io: return "io";
      case Kind::internal: return "internal";
    }
    return "unknown";
  }

 private:
  Kind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(Kind::dimension, m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(Kind::numeric, m) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error(Kind::usage, m) {}
};

struct InputError : Error {
  explicit InputError(const std::string& m) : Error(Kind::input, m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(Kind::config, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(Kind::io, m) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& m) : Error(Kind::internal, m) {}
};

}  // namespace textblend
