#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>

namespace rlomm {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kMetersPerDegLat = 111'320.0;

struct OutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateBox : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidCellSize : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A GPS fix: WGS84 degrees plus a unix timestamp in seconds.
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    std::int64_t time = 0;
};

struct GridCell {
    int row = 0;
    int col = 0;
    friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct GridCellHash {
    std::size_t operator()(const GridCell& c) const noexcept {
        return std::hash<std::int64_t>{}((std::int64_t(c.row) << 32) ^ std::uint32_t(c.col));
    }
};

/// Great-circle distance in meters (spherical earth, radius 6371 km).
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Uniform partition of a city bounding box into rows x cols square cells
/// of side cell_m. Metric offsets use a local equirectangular projection
/// about the south-west origin; cells are half-open intervals
/// [k*cell_m, (k+1)*cell_m) on both axes.
class GridSpec {
public:
    GridSpec() = default;
    GridSpec(GeoPoint origin, double cell_m, int rows, int cols);

    /// Builds the smallest grid covering [min, max] with the given cell side.
    static GridSpec from_bbox(const GeoPoint& min, const GeoPoint& max, double cell_m);

    double east_offset_m(const GeoPoint& p) const {
        return (p.lon - origin_.lon) * lon_scale_;
    }
    double north_offset_m(const GeoPoint& p) const {
        return (p.lat - origin_.lat) * kMetersPerDegLat;
    }

    /// Inverse of the local projection.
    GeoPoint point_at(double east_m, double north_m) const {
        return {origin_.lat + north_m / kMetersPerDegLat,
                origin_.lon + east_m / lon_scale_, 0};
    }

    /// Maps a point to its cell; throws OutOfBounds outside the box.
    GridCell cell_of(const GeoPoint& p) const;
    std::optional<GridCell> try_cell_of(const GeoPoint& p) const;

    GeoPoint cell_center(const GridCell& c) const {
        return point_at((c.col + 0.5) * cell_m_, (c.row + 0.5) * cell_m_);
    }

    const GeoPoint& origin() const { return origin_; }
    double cell_m() const { return cell_m_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t cell_count() const { return std::int64_t(rows_) * cols_; }

private:
    GeoPoint origin_{};
    double cell_m_ = 1.0;
    int rows_ = 1;
    int cols_ = 1;
    double lon_scale_ = kMetersPerDegLat;
};

}  // namespace rlomm
