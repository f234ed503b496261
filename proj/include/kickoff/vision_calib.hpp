#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kickoff/geometry.hpp"

namespace kickoff {

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  bool operator==(const PixelPoint&) const = default;
};

struct Correspondence {
  PixelPoint pixel;
  Vec2 field;  // m
};

struct ImageGeometry {
  int width = 820;
  int height = 635;
};

// Projective map from image pixels to field meters, normalized so H(2,2) == 1.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()), inv_(Eigen::Matrix3d::Identity()) {}

  // Throws Errc::singular_homography if the matrix cannot be normalized or inverted.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography scale(double meters_per_pixel);

  const Eigen::Matrix3d& matrix() const { return h_; }
  const Eigen::Matrix3d& inverse_matrix() const { return inv_; }

 private:
  Eigen::Matrix3d h_;
  Eigen::Matrix3d inv_;
};

// Throws Errc::projection when the point maps to infinity.
Vec2 pixel_to_field(const Homography& h, const PixelPoint& p);
PixelPoint field_to_pixel(const Homography& h, const Vec2& p);

// Normalized DLT over >= 4 correspondences. Throws Errc::insufficient_points
// below 4 and Errc::degenerate_configuration when the points do not pin down
// a unique projective map (e.g. collinear).
Homography fit_homography(std::span<const Correspondence> correspondences);

struct VisibilityTarget {
  std::array<Vec2, 4> field_corners;
  ImageGeometry image;
};

struct CalibrationReport {
  Homography homography;
  std::vector<double> residuals;  // m, one per correspondence
  double max_residual = 0.0;
  std::optional<std::size_t> worst_index;
  double tolerance = 0.01;
  bool passed = false;
  bool field_visible = true;

  std::string to_json() const;
};

// Per-point distance between the mapped pixel and the ground-truth field point.
// When `target` is given the field must also be fully visible for a pass.
CalibrationReport verify_calibration(const Homography& h, std::span<const Correspondence> correspondences,
                                     double tolerance = 0.01,
                                     const std::optional<VisibilityTarget>& target = std::nullopt);

// True iff every corner projects strictly inside the image through H^-1.
bool check_field_visible(const Homography& h, const std::array<Vec2, 4>& field_corners, const ImageGeometry& image);

// Corner points of the four field-corner fiducials: 16 field-frame points,
// marker by marker, counter-clockwise within each marker.
std::vector<Vec2> fiducial_points(double field_length, double field_width, double marker_size, double marker_inset);

// CSV with header `u_px,v_px,x_m,y_m`.
std::vector<Correspondence> read_correspondences(std::istream& in);
void write_correspondences(std::ostream& out, std::span<const Correspondence> correspondences);

}  // namespace kickoff
