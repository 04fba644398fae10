#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace waytrain {

/// Mean Earth radius of the spherical model used throughout (meters).
inline constexpr double kEarthRadiusM = 6'371'000.0;

/// WGS84 coordinate in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(GeoPoint p) noexcept;
/// Throws ContractViolation for out-of-range coordinates.
void check_valid(GeoPoint p);

using TimestampMs = std::int64_t;

struct GpsFix {
  GeoPoint point;
  TimestampMs ts_ms = 0;
  std::optional<double> accuracy_m;

  friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

/// Ordered vertex chain with cumulative haversine distances.
class Polyline {
public:
  /// Requires >= 2 valid vertices and no two consecutive identical ones.
  explicit Polyline(std::vector<GeoPoint> vertices);

  const std::vector<GeoPoint>& vertices() const noexcept { return vertices_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }
  std::size_t size() const noexcept { return vertices_.size(); }
  std::size_t segment_count() const noexcept { return vertices_.size() - 1; }
  double length() const noexcept { return cumulative_.back(); }

  /// Point at the given along-track distance (clamped to [0, length]).
  GeoPoint point_at(double along_m) const;
  /// Index of the segment holding along_m; the end of the line maps to the last segment.
  std::size_t segment_at(double along_m) const;
  /// Initial bearing of a segment, degrees clockwise from north.
  double segment_bearing(std::size_t segment) const;

  friend bool operator==(const Polyline& a, const Polyline& b) {
    return a.vertices_ == b.vertices_;
  }

private:
  std::vector<GeoPoint> vertices_;
  std::vector<double> cumulative_;
};

struct ProjectedPosition {
  std::size_t segment_index = 0;
  double along_track = 0.0;
  double cross_track = 0.0;
};

/// Closed along-track interval [begin, end] in meters.
struct AlongWindow {
  double begin = 0.0;
  double end = 0.0;
};

double haversine_distance(GeoPoint a, GeoPoint b);

/// Initial great-circle bearing from a to b, degrees in [0, 360).
double initial_bearing(GeoPoint a, GeoPoint b);

/// Great-circle destination from origin after distance_m on bearing_deg.
GeoPoint destination_point(GeoPoint origin, double bearing_deg, double distance_m);

/// Nearest point among the segments overlapping `window`. The window is
/// intersected with [0, length]; an empty intersection is a contract violation.
ProjectedPosition project_onto_polyline(GeoPoint p, const Polyline& line, AlongWindow window);
ProjectedPosition project_onto_polyline(GeoPoint p, const Polyline& line);

/// Inclusive: a point exactly `radius_m` away is inside.
bool within_geofence(GeoPoint p, GeoPoint center, double radius_m);

inline constexpr double kDefaultSimplifyToleranceM = 5.0;

/// Douglas-Peucker over the fix coordinates. Endpoints are kept and every input
/// point stays within `tolerance_m` cross-track of the result.
Polyline simplify_trace(std::span<const GpsFix> fixes, double tolerance_m = kDefaultSimplifyToleranceM);

/// Planar distance from p to segment [a, b] under the local equirectangular
/// approximation; `fraction` receives the clamped position along the segment.
double segment_distance(GeoPoint p, GeoPoint a, GeoPoint b, double* fraction = nullptr);

// GPS trace CSV: header `ts_ms,lat_deg,lon_deg,accuracy_m`, accuracy may be empty.
inline constexpr const char* kTraceCsvHeader = "ts_ms,lat_deg,lon_deg,accuracy_m";

std::vector<GpsFix> read_trace_csv(std::istream& in);
void write_trace_csv(std::ostream& out, std::span<const GpsFix> fixes);

}  // namespace waytrain
