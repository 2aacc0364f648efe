#include "inrstrain/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "inrstrain/errors.hpp"

namespace inrstrain {

void Geometry::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            throw DataError("geometry: dims must be >= 1");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw DataError("geometry: spacing must be positive and finite");
        }
        if (!std::isfinite(origin[a])) {
            throw DataError("geometry: origin must be finite");
        }
    }
    const Mat3 gram = direction.transpose() * direction;
    if (!((gram - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6)) {
        throw DataError("geometry: direction columns are not orthonormal");
    }
}

bool Geometry::same_as(const Geometry& other, double tol) const
{
    return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol
           && (origin - other.origin).cwiseAbs().maxCoeff() <= tol
           && (direction - other.direction).cwiseAbs().maxCoeff() <= tol;
}

Vec3 voxel_to_world(const Geometry& g, const Vec3& idx)
{
    return g.origin + g.direction * g.spacing.cwiseProduct(idx);
}

// Direction columns are orthonormal, so the inverse is the transpose.
Vec3 world_to_voxel(const Geometry& g, const Vec3& p)
{
    return (g.direction.transpose() * (p - g.origin)).cwiseQuotient(g.spacing);
}

Mat3 world_to_voxel_jacobian(const Geometry& g)
{
    return g.spacing.cwiseInverse().asDiagonal() * g.direction.transpose();
}

Geometry slice_geometry(const Geometry& g, int k)
{
    Geometry s = g;
    s.dims[2] = 1;
    s.origin = voxel_to_world(g, Vec3(0.0, 0.0, static_cast<double>(k)));
    return s;
}

void NormalizedFrame::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (!(half_extent[a] > 0.0) || !std::isfinite(half_extent[a]) || !std::isfinite(center[a])) {
            throw DataError("normalized frame: half extents must be positive and finite");
        }
    }
}

NormalizedFrame NormalizedFrame::from_geometry(const Geometry& g)
{
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 idx((corner & 1) ? g.dims[0] - 1 : 0, (corner & 2) ? g.dims[1] - 1 : 0,
                       (corner & 4) ? g.dims[2] - 1 : 0);
        const Vec3 p = voxel_to_world(g, idx);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    NormalizedFrame frame;
    frame.center = 0.5 * (lo + hi);
    frame.half_extent = 0.5 * (hi - lo);
    const double floor_extent = 0.5 * g.spacing.minCoeff();
    for (int a = 0; a < 3; ++a) {
        frame.half_extent[a] = std::max(frame.half_extent[a], floor_extent);
    }
    return frame;
}

} // namespace inrstrain
