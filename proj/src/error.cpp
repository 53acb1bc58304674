#include "kten/error.hpp"

namespace kten {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::ZeroRelativeVelocity: return "ZeroRelativeVelocity";
    case Errc::NonUnitNormal: return "NonUnitNormal";
    case Errc::EqualMasses: return "EqualMasses";
    case Errc::CoincidentPoints: return "CoincidentPoints";
    case Errc::SingularAtZeroSpeed: return "SingularAtZeroSpeed";
    case Errc::SingularAngle: return "SingularAngle";
    case Errc::QuadratureTruncation: return "QuadratureTruncation";
    case Errc::InsufficientGrid: return "InsufficientGrid";
    case Errc::NonFiniteResult: return "NonFiniteResult";
    case Errc::HistoryGap: return "HistoryGap";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::DivergentIntegral: return "DivergentIntegral";
    case Errc::EpsOutOfRange: return "EpsOutOfRange";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::GuardViolated: return "GuardViolated";
    case Errc::MajorantViolation: return "MajorantViolation";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::UnknownSubcommand: return "UnknownSubcommand";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(Errc c) {
  switch (c) {
    case Errc::QuadratureTruncation:
    case Errc::NonFiniteResult:
    case Errc::ConvergenceFailure:
    case Errc::DivergentIntegral:
    case Errc::DegenerateGeometry:
    case Errc::GuardViolated:
    case Errc::MajorantViolation:
    case Errc::InsufficientData:
      return true;
    default:
      return false;
  }
}

}  // namespace kten
