#pragma once

#include <stdexcept>
#include <string>

namespace kten {

enum class Errc {
  InvalidParameter,
  ZeroRelativeVelocity,
  NonUnitNormal,
  EqualMasses,
  CoincidentPoints,
  SingularAtZeroSpeed,
  SingularAngle,
  QuadratureTruncation,
  InsufficientGrid,
  NonFiniteResult,
  HistoryGap,
  ConvergenceFailure,
  DivergentIntegral,
  EpsOutOfRange,
  DegenerateGeometry,
  GuardViolated,
  MajorantViolation,
  InsufficientData,
  EmptySeries,
  UnknownSubcommand,
  IoError,
};

const char* errc_name(Errc c);

// Validation errors map to exit code 1, numerical failures to exit code 2.
bool is_numerical(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace kten
