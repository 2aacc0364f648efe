#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Dense>

namespace inrstrain {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index3 = std::array<int, 3>;

// Physical placement of a voxel grid. Voxel (0,0,0) is centered at
// `origin`; axis i advances by spacing[i] along direction column i.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();
    Mat3 direction = Mat3::Identity();

    std::size_t voxel_count() const noexcept
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    std::size_t linear_index(int i, int j, int k) const noexcept
    {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }

    Index3 unravel(std::size_t n) const noexcept
    {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(n % nx), static_cast<int>((n / nx) % ny),
                static_cast<int>(n / (nx * ny))};
    }

    bool contains(int i, int j, int k) const noexcept
    {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }

    // Throws DataError when spacing, direction or dims are invalid.
    void validate() const;

    bool same_as(const Geometry& other, double tol = 1e-6) const;
};

Vec3 voxel_to_world(const Geometry& g, const Vec3& idx);
Vec3 world_to_voxel(const Geometry& g, const Vec3& p);

// Derivative of world_to_voxel: d idx / d p.
Mat3 world_to_voxel_jacobian(const Geometry& g);

// Geometry of the single slice `k` of `g` as an nz=1 plane.
Geometry slice_geometry(const Geometry& g, int k);

// Maps world millimetres onto the canonical cube [-1,1]^3.
struct NormalizedFrame {
    Vec3 center = Vec3::Zero();
    Vec3 half_extent = Vec3::Ones();

    Vec3 to_canonical(const Vec3& p) const { return (p - center).cwiseQuotient(half_extent); }
    Vec3 to_world(const Vec3& q) const { return center + q.cwiseProduct(half_extent); }

    void validate() const;

    // World bounding box of all voxel centers of `g`. Degenerate axes
    // (a single voxel) get half a voxel spacing of extent.
    static NormalizedFrame from_geometry(const Geometry& g);
};

} // namespace inrstrain
