#include "kickoff/vision_calib.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kickoff/csv.hpp"
#include "kickoff/error.hpp"

namespace kickoff {
namespace {

// Similarity taking the points to zero centroid and mean distance sqrt(2).
template <typename Get>
Eigen::Matrix3d normalizer(std::size_t n, Get get) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < n; ++i) c += get(i);
  c /= static_cast<double>(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (get(i) - c).norm();
  mean /= static_cast<double>(n);
  if (!(mean > 0.0)) throw Error(Errc::degenerate_configuration, "all points coincide");
  const double s = std::sqrt(2.0) / mean;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

}  // namespace

Homography::Homography(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw Error(Errc::singular_homography, "matrix has non-finite entries");
  if (std::abs(m(2, 2)) < 1e-12 * m.cwiseAbs().maxCoeff()) {
    throw Error(Errc::singular_homography, "H(2,2) vanishes, cannot normalize");
  }
  h_ = m / m(2, 2);
  const double det = h_.determinant();
  if (!(std::abs(det) > 1e-12)) throw Error(Errc::singular_homography, "determinant is zero");
  inv_ = h_.inverse();
}

Homography Homography::scale(double meters_per_pixel) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = meters_per_pixel;
  m(1, 1) = meters_per_pixel;
  return Homography(m);
}

Vec2 pixel_to_field(const Homography& h, const PixelPoint& p) {
  const Eigen::Vector3d r = h.matrix() * Eigen::Vector3d(p.u, p.v, 1.0);
  if (std::abs(r.z()) < 1e-12 * std::max(1.0, r.head<2>().cwiseAbs().maxCoeff())) {
    throw Error(Errc::projection, "pixel maps to a point at infinity");
  }
  return {r.x() / r.z(), r.y() / r.z()};
}

PixelPoint field_to_pixel(const Homography& h, const Vec2& p) {
  const Eigen::Vector3d r = h.inverse_matrix() * Eigen::Vector3d(p.x, p.y, 1.0);
  if (std::abs(r.z()) < 1e-12 * std::max(1.0, r.head<2>().cwiseAbs().maxCoeff())) {
    throw Error(Errc::projection, "field point maps to a pixel at infinity");
  }
  return {r.x() / r.z(), r.y() / r.z()};
}

Homography fit_homography(std::span<const Correspondence> corr) {
  if (corr.size() < 4) {
    throw Error(Errc::insufficient_points, "need at least 4 correspondences, got " + std::to_string(corr.size()));
  }
  for (const Correspondence& c : corr) {
    if (!std::isfinite(c.pixel.u) || !std::isfinite(c.pixel.v) || !c.field.finite()) {
      throw Error(Errc::validation, "correspondence has non-finite coordinates");
    }
  }

  const std::size_t n = corr.size();
  const Eigen::Matrix3d tp = normalizer(n, [&](std::size_t i) { return Eigen::Vector2d(corr[i].pixel.u, corr[i].pixel.v); });
  const Eigen::Matrix3d tf = normalizer(n, [&](std::size_t i) { return Eigen::Vector2d(corr[i].field.x, corr[i].field.y); });

  // Each correspondence gives two rows of A h = 0 for h = vec(H) row-major.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(2 * n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = tp * Eigen::Vector3d(corr[i].pixel.u, corr[i].pixel.v, 1.0);
    const Eigen::Vector3d f = tf * Eigen::Vector3d(corr[i].field.x, corr[i].field.y, 1.0);
    const double x = p.x(), y = p.y(), X = f.x(), Y = f.y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << x, y, 1, 0, 0, 0, -X * x, -X * y, -X;
    a.row(r + 1) << 0, 0, 0, x, y, 1, -Y * x, -Y * y, -Y;
  }

  // A full V gives the null vector even for the minimal 8x9 system. A unique
  // solution needs a one-dimensional null space, so the eighth singular value
  // must be clearly non-zero.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) <= 1e-10 * sv(0)) {
    throw Error(Errc::degenerate_configuration, "correspondences do not determine a unique homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  const Eigen::Matrix3d m = tf.inverse() * hn * tp;
  try {
    return Homography(m);
  } catch (const Error&) {
    throw Error(Errc::degenerate_configuration, "fitted homography is singular");
  }
}

bool check_field_visible(const Homography& h, const std::array<Vec2, 4>& corners, const ImageGeometry& image) {
  for (const Vec2& c : corners) {
    PixelPoint p;
    try {
      p = field_to_pixel(h, c);
    } catch (const Error&) {
      return false;
    }
    if (!(p.u > 0.0 && p.u < image.width && p.v > 0.0 && p.v < image.height)) return false;
  }
  return true;
}

CalibrationReport verify_calibration(const Homography& h, std::span<const Correspondence> corr, double tolerance,
                                     const std::optional<VisibilityTarget>& target) {
  CalibrationReport report;
  report.homography = h;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    double r = std::numeric_limits<double>::infinity();
    try {
      r = distance(pixel_to_field(h, corr[i].pixel), corr[i].field);
    } catch (const Error&) {
    }
    report.residuals.push_back(r);
    if (!report.worst_index || r > report.max_residual) {
      report.max_residual = r;
      report.worst_index = i;
    }
  }
  if (target) report.field_visible = check_field_visible(h, target->field_corners, target->image);
  report.passed = !corr.empty() && report.max_residual <= tolerance && report.field_visible;
  return report;
}

std::string CalibrationReport::to_json() const {
  nlohmann::json j;
  const auto& m = homography.matrix();
  j["homography"] = {{m(0, 0), m(0, 1), m(0, 2)}, {m(1, 0), m(1, 1), m(1, 2)}, {m(2, 0), m(2, 1), m(2, 2)}};
  j["residuals_m"] = residuals;
  j["max_residual_m"] = max_residual;
  j["worst_index"] = worst_index ? nlohmann::json(*worst_index) : nlohmann::json(nullptr);
  j["tolerance_m"] = tolerance;
  j["field_visible"] = field_visible;
  j["passed"] = passed;
  return j.dump(2);
}

std::vector<Vec2> fiducial_points(double length, double width, double marker_size, double inset) {
  // Marker centres sit just outside each field corner.
  const double cx = length / 2.0 + inset;
  const double cy = width / 2.0 + inset;
  const double h = marker_size / 2.0;
  std::vector<Vec2> pts;
  for (const Vec2 centre : {Vec2{cx, cy}, Vec2{-cx, cy}, Vec2{-cx, -cy}, Vec2{cx, -cy}}) {
    for (const Vec2 off : {Vec2{h, h}, Vec2{-h, h}, Vec2{-h, -h}, Vec2{h, -h}}) pts.push_back(centre + off);
  }
  return pts;
}

std::vector<Correspondence> read_correspondences(std::istream& in) {
  std::vector<Correspondence> out;
  for (const auto& r : csv::read_numeric(in, 4, "u_px,v_px,x_m,y_m")) out.push_back({{r[0], r[1]}, {r[2], r[3]}});
  return out;
}

void write_correspondences(std::ostream& out, std::span<const Correspondence> corr) {
  std::vector<std::vector<double>> rows;
  for (const Correspondence& c : corr) rows.push_back({c.pixel.u, c.pixel.v, c.field.x, c.field.y});
  csv::write_numeric(out, "u_px,v_px,x_m,y_m", rows);
}

}  // namespace kickoff
