#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kickoff {

enum class Errc {
  domain,
  undefined_bearing,
  degenerate_segment,
  frame_mismatch,
  degenerate_layout,
  insufficient_data,
  calibration_invalid,
  insufficient_points,
  degenerate_configuration,
  singular_homography,
  projection,
  not_found,
  preempted,
  cooldown,
  validation,
  phase,
  auth,
  placement,
  protocol,
  config,
  io,
};

std::string_view to_string(Errc code);

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace kickoff
