#include "waytrain/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct Local {
  double x;
  double y;
};

// Equirectangular projection about a reference latitude.
Local to_local(GeoPoint p, GeoPoint ref, double cos_ref) {
  return {(p.lon - ref.lon) * kDegToRad * cos_ref * kEarthRadiusM,
          (p.lat - ref.lat) * kDegToRad * kEarthRadiusM};
}

}  // namespace

bool is_valid(GeoPoint p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

void check_valid(GeoPoint p) {
  require(is_valid(p), ErrorCode::ContractViolation,
          "coordinate out of range (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ")");
}

double haversine_distance(GeoPoint a, GeoPoint b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double initial_bearing(GeoPoint a, GeoPoint b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  const double deg = std::atan2(y, x) * kRadToDeg;
  return std::fmod(deg + 360.0, 360.0);
}

GeoPoint destination_point(GeoPoint origin, double bearing_deg, double distance_m) {
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing_deg * kDegToRad;
  const double phi1 = origin.lat * kDegToRad;
  const double lambda1 = origin.lon * kDegToRad;
  const double phi2 =
      std::asin(std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta));
  const double lambda2 =
      lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                           std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  double lon = lambda2 * kRadToDeg;
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {phi2 * kRadToDeg, lon};
}

namespace {

// Distance from p to the sub-segment [t_lo, t_hi] of [a, b], computed in the
// segment's own local frame.
double clamped_segment_distance(GeoPoint p, GeoPoint a, GeoPoint b, double t_lo, double t_hi,
                                double* fraction) {
  const GeoPoint mid{(a.lat + b.lat) / 2.0, (a.lon + b.lon) / 2.0};
  const double cos_mid = std::cos(mid.lat * kDegToRad);
  const Local la = to_local(a, mid, cos_mid);
  const Local lb = to_local(b, mid, cos_mid);
  const Local lp = to_local(p, mid, cos_mid);
  const double dx = lb.x - la.x;
  const double dy = lb.y - la.y;
  const double len2 = dx * dx + dy * dy;
  double t = t_lo;
  if (len2 > 0.0) t = std::clamp(((lp.x - la.x) * dx + (lp.y - la.y) * dy) / len2, t_lo, t_hi);
  if (fraction != nullptr) *fraction = t;
  return std::hypot(la.x + t * dx - lp.x, la.y + t * dy - lp.y);
}

}  // namespace

double segment_distance(GeoPoint p, GeoPoint a, GeoPoint b, double* fraction) {
  return clamped_segment_distance(p, a, b, 0.0, 1.0, fraction);
}

Polyline::Polyline(std::vector<GeoPoint> vertices) : vertices_(std::move(vertices)) {
  require(vertices_.size() >= 2, ErrorCode::ContractViolation, "polyline needs at least 2 vertices");
  cumulative_.reserve(vertices_.size());
  cumulative_.push_back(0.0);
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    check_valid(vertices_[i]);
    if (i == 0) continue;
    require(vertices_[i] != vertices_[i - 1], ErrorCode::ContractViolation,
            "consecutive identical vertices at index " + std::to_string(i));
    cumulative_.push_back(cumulative_.back() + haversine_distance(vertices_[i - 1], vertices_[i]));
  }
}

std::size_t Polyline::segment_at(double along_m) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), along_m);
  const auto idx = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
  if (idx == 0) return 0;
  return std::min(idx - 1, segment_count() - 1);
}

GeoPoint Polyline::point_at(double along_m) const {
  along_m = std::clamp(along_m, 0.0, length());
  const std::size_t seg = segment_at(along_m);
  const double seg_len = cumulative_[seg + 1] - cumulative_[seg];
  const double t = seg_len > 0.0 ? (along_m - cumulative_[seg]) / seg_len : 0.0;
  const GeoPoint a = vertices_[seg];
  const GeoPoint b = vertices_[seg + 1];
  return {a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
}

double Polyline::segment_bearing(std::size_t segment) const {
  require(segment < segment_count(), ErrorCode::ContractViolation, "segment index out of range");
  return initial_bearing(vertices_[segment], vertices_[segment + 1]);
}

ProjectedPosition project_onto_polyline(GeoPoint p, const Polyline& line, AlongWindow window) {
  require(window.begin <= window.end, ErrorCode::ContractViolation, "empty projection window");
  const double begin = std::max(window.begin, 0.0);
  const double end = std::min(window.end, line.length());
  require(begin <= end, ErrorCode::ContractViolation, "projection window outside the polyline");

  const auto& cum = line.cumulative();
  const auto& verts = line.vertices();
  ProjectedPosition best{0, begin, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < line.segment_count(); ++i) {
    const double s0 = cum[i];
    const double s1 = cum[i + 1];
    if (s1 < begin || s0 > end) continue;
    const double seg_len = s1 - s0;
    double t_lo = 0.0;
    double t_hi = 1.0;
    if (seg_len > 0.0) {
      t_lo = std::clamp((begin - s0) / seg_len, 0.0, 1.0);
      t_hi = std::clamp((end - s0) / seg_len, 0.0, 1.0);
    }
    double t = 0.0;
    const double cross = clamped_segment_distance(p, verts[i], verts[i + 1], t_lo, t_hi, &t);
    if (cross < best.cross_track) {
      best = {i, std::clamp(s0 + t * seg_len, begin, end), cross};
    }
  }
  return best;
}

ProjectedPosition project_onto_polyline(GeoPoint p, const Polyline& line) {
  return project_onto_polyline(p, line, {0.0, line.length()});
}

bool within_geofence(GeoPoint p, GeoPoint center, double radius_m) {
  require(radius_m > 0.0, ErrorCode::ContractViolation, "geofence radius must be positive");
  return haversine_distance(p, center) <= radius_m;
}

Polyline simplify_trace(std::span<const GpsFix> fixes, double tolerance_m) {
  require(fixes.size() >= 2, ErrorCode::InsufficientData, "simplification needs at least 2 fixes");
  require(tolerance_m >= 0.0, ErrorCode::ContractViolation, "negative tolerance");
  for (std::size_t i = 1; i < fixes.size(); ++i) {
    require(fixes[i].ts_ms > fixes[i - 1].ts_ms, ErrorCode::Ordering, "trace timestamps must increase");
  }

  const std::size_t n = fixes.size();
  std::vector<bool> keep(n, false);
  keep.front() = keep.back() = true;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    double max_dist = -1.0;
    std::size_t max_idx = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = segment_distance(fixes[i].point, fixes[first].point, fixes[last].point);
      if (d > max_dist) {
        max_dist = d;
        max_idx = i;
      }
    }
    if (max_dist > tolerance_m) {
      keep[max_idx] = true;
      stack.emplace_back(first, max_idx);
      stack.emplace_back(max_idx, last);
    }
  }

  std::vector<GeoPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    if (!out.empty() && out.back() == fixes[i].point) continue;
    out.push_back(fixes[i].point);
  }
  require(out.size() >= 2, ErrorCode::InsufficientData, "trace collapses to a single point");
  return Polyline(std::move(out));
}

}  // namespace waytrain
