#include "kickoff/error.hpp"

namespace kickoff {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::domain: return "domain";
    case Errc::undefined_bearing: return "undefined_bearing";
    case Errc::degenerate_segment: return "degenerate_segment";
    case Errc::frame_mismatch: return "frame_mismatch";
    case Errc::degenerate_layout: return "degenerate_layout";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::calibration_invalid: return "calibration_invalid";
    case Errc::insufficient_points: return "insufficient_points";
    case Errc::degenerate_configuration: return "degenerate_configuration";
    case Errc::singular_homography: return "singular_homography";
    case Errc::projection: return "projection";
    case Errc::not_found: return "not_found";
    case Errc::preempted: return "preempted";
    case Errc::cooldown: return "cooldown";
    case Errc::validation: return "validation";
    case Errc::phase: return "phase";
    case Errc::auth: return "auth";
    case Errc::placement: return "placement";
    case Errc::protocol: return "protocol";
    case Errc::config: return "config";
    case Errc::io: return "io";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace kickoff
