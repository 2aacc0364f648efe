#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "inrstrain/geometry.hpp"

namespace inrstrain {

// Scalar grid with geometry; x-fastest layout.
template <typename T>
struct ImageGrid {
    Geometry geom;
    std::vector<T> data;

    ImageGrid() = default;
    explicit ImageGrid(const Geometry& g, T fill = T{}) : geom(g), data(g.voxel_count(), fill) {}

    T& at(int i, int j, int k) { return data[geom.linear_index(i, j, k)]; }
    const T& at(int i, int j, int k) const { return data[geom.linear_index(i, j, k)]; }
    std::size_t size() const noexcept { return data.size(); }
};

using Volume3D = ImageGrid<float>;
using LabelMask = ImageGrid<std::uint8_t>;

namespace label {
inline constexpr std::uint8_t background = 0;
inline constexpr std::uint8_t lv_pool = 1;
inline constexpr std::uint8_t myocardium = 2;
inline constexpr std::uint8_t rv_pool = 3;
inline constexpr std::uint8_t max_code = 3;
} // namespace label

void validate(const Volume3D& vol);
void validate(const LabelMask& mask);

// Binary indicator of `code` as a float volume (1 inside, 0 outside).
Volume3D indicator(const LabelMask& mask, std::uint8_t code);

struct Sample {
    double value = 0.0;
    bool inside = false;
};

struct SampleGrad {
    double value = 0.0;
    bool inside = false;
    Vec3 grad_world = Vec3::Zero(); // d value / d p in mm^-1
};

// Trilinear interpolation at world point `p`. Points outside the
// voxel-center lattice return 0 with inside == false.
Sample sample_trilinear(const Volume3D& vol, const Vec3& p);
SampleGrad sample_trilinear_grad(const Volume3D& vol, const Vec3& p);

// Same, at a continuous voxel index.
SampleGrad sample_trilinear_index(const Volume3D& vol, const Vec3& idx);

// Bilinear lookup in an nz=1 plane after orthogonal projection of `p`
// onto it. The gradient has no component along the plane normal.
SampleGrad sample_plane_projected(const Volume3D& plane, const Vec3& p);

// Nearest-voxel label lookup; outside returns background.
std::uint8_t sample_nearest(const LabelMask& mask, const Vec3& p);
std::uint8_t sample_nearest_projected(const LabelMask& plane, const Vec3& p);

struct PlaneImage {
    Volume3D image;            // values on the plane geometry
    std::vector<std::uint8_t> inside;
};

// Trilinear resampling of `vol` at every voxel center of `plane`.
PlaneImage resample_to_plane(const Volume3D& vol, const Geometry& plane);

// Nearest-neighbour resampling of a mask onto another grid.
LabelMask resample_nearest(const LabelMask& mask, const Geometry& target);

// Ordered cine frames on one shared geometry.
struct CineSeries {
    std::vector<Volume3D> images;
    std::vector<LabelMask> masks;
    int ed_index = 0;
    int es_index = 0;

    int time_points() const noexcept { return static_cast<int>(images.size()); }
    const Geometry& geometry() const { return images.front().geom; }
    void validate() const;
};

struct ViewSet {
    CineSeries sax;
    CineSeries ch4;
    std::optional<CineSeries> ch2;

    void validate() const;
};

} // namespace inrstrain
