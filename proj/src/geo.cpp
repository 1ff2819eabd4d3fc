#include "rlomm/geo.hpp"

#include <algorithm>

namespace rlomm {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
// Degree round trips lose a few nanometres; snap boundaries within a
// micrometre so half-open cell edges behave as written.
constexpr double kSnapM = 1e-6;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.lat * kDegToRad;
    const double lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

GridSpec::GridSpec(GeoPoint origin, double cell_m, int rows, int cols)
    : origin_(origin), cell_m_(cell_m), rows_(rows), cols_(cols) {
    if (cell_m <= 0.0) throw InvalidCellSize("cell side must be positive");
    if (rows < 1 || cols < 1) throw DegenerateBox("grid must have at least one cell");
    lon_scale_ = std::cos(origin.lat * kDegToRad) * kMetersPerDegLat;
}

GridSpec GridSpec::from_bbox(const GeoPoint& min, const GeoPoint& max, double cell_m) {
    if (cell_m <= 0.0) throw InvalidCellSize("cell side must be positive");
    GridSpec probe(min, cell_m, 1, 1);
    const double east = probe.east_offset_m(max);
    const double north = probe.north_offset_m(max);
    if (east <= 0.0 || north <= 0.0)
        throw DegenerateBox("bounding box extent must be positive on both axes");
    const int rows = int(std::ceil((north - kSnapM) / cell_m));
    const int cols = int(std::ceil((east - kSnapM) / cell_m));
    return GridSpec(min, cell_m, rows, cols);
}

GridCell GridSpec::cell_of(const GeoPoint& p) const {
    auto c = try_cell_of(p);
    if (!c) throw OutOfBounds("point outside grid bounding box");
    return *c;
}

std::optional<GridCell> GridSpec::try_cell_of(const GeoPoint& p) const {
    const double east = east_offset_m(p);
    const double north = north_offset_m(p);
    if (east < -kSnapM || north < -kSnapM) return std::nullopt;
    const int col = int(std::floor((east + kSnapM) / cell_m_));
    const int row = int(std::floor((north + kSnapM) / cell_m_));
    if (row >= rows_ || col >= cols_) return std::nullopt;
    return GridCell{row, col};
}

}  // namespace rlomm
