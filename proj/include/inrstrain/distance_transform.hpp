#pragma once

#include <cstdint>
#include <vector>

#include "inrstrain/geometry.hpp"

namespace inrstrain {

// Exact squared Euclidean distance (mm^2) from every voxel center to the
// nearest voxel with seeds[n] != 0, honoring anisotropic spacing.
// With `in_plane`, distances are computed independently per z-slice.
// Voxels are +inf when there is no seed in reach.
std::vector<double> squared_distance_transform(const Geometry& g, const std::vector<std::uint8_t>& seeds,
                                               bool in_plane = false);

// Voxels of `region` with at least one 6-neighbour (4-neighbour when
// `in_plane`) outside the region or outside the grid.
std::vector<std::uint8_t> region_boundary(const Geometry& g, const std::vector<std::uint8_t>& region,
                                          bool in_plane = false);

} // namespace inrstrain
