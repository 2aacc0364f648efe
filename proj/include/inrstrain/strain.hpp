#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inrstrain/registration.hpp"
#include "inrstrain/volume.hpp"

namespace inrstrain {

enum class Structure { LV, RV };
enum class StrainComponent { Radial, Circumferential };
enum class Segment { Basal, Mid, Apical, Global };
enum class StrainTensor { GreenLagrange, Engineering };

std::string to_string(Structure s);
std::string to_string(StrainComponent c);
std::string to_string(Segment s);

// In-plane radial/circumferential unit vectors at evaluation voxels.
struct DirectionField {
    std::vector<std::size_t> voxels; // linear voxel index in the mask grid
    std::vector<Vec3> points;        // world mm
    std::vector<int> slice;
    std::vector<Vec3> e_r;
    std::vector<Vec3> e_c;
    int skipped_slices = 0;

    std::size_t size() const noexcept { return voxels.size(); }
};

Mat3 deformation_gradient(const MlpParams& params, const NormalizedFrame& frame, const Vec3& x_mm);

// E = (F^T F - I) / 2
Mat3 green_lagrange(const Mat3& F);
// (F + F^T)/2 - I
Mat3 engineering_strain(const Mat3& F);
Mat3 strain_tensor(const Mat3& F, StrainTensor kind);

// LV MYO voxels; e_r points away from the slice's LV pool centroid.
DirectionField lv_polar_dirs(const LabelMask& mask);

// RV pool contour band; e_r is the outward normal from the in-plane
// signed distance map of the pool, smoothed with a Gaussian of
// `smoothing_sigma` voxels before differentiation.
DirectionField rv_dirs(const LabelMask& mask, double smoothing_sigma = 2.0);

// Signed in-plane distance (mm) to the boundary of `region`, negative
// inside; per slice.
std::vector<double> signed_distance_in_plane(const Geometry& g, const std::vector<std::uint8_t>& region);

inline double project_strain(const Mat3& E, const Vec3& e) { return e.dot(E * e); }

// Segment of every slice; slices without MYO map to nullopt.
std::vector<std::optional<Segment>> segment_slices(const LabelMask& mask);

struct StrainCurve {
    Structure structure = Structure::LV;
    StrainComponent component = StrainComponent::Radial;
    Segment segment = Segment::Global;
    std::vector<int> time_indices;
    std::vector<double> values;
};

struct PeakStrain {
    double value = 0.0;
    int time_index = 0;
};

// F at the requested world points for cine time `t`.
using GradientProvider = std::function<std::vector<Mat3>(int t, const std::vector<Vec3>& points)>;

struct StrainField {
    Structure structure;
    const DirectionField* field;
};

// Segment-mean projected strain per time point, in fixed voxel order.
std::vector<StrainCurve> strain_curves(int time_points, const GradientProvider& gradients,
                                       const std::vector<StrainField>& fields,
                                       const std::vector<std::optional<Segment>>& segments,
                                       StrainTensor tensor = StrainTensor::GreenLagrange);

// Curves from trained registrations; the fixed (ED) time point uses F = I.
std::vector<StrainCurve> strain_curves(const std::vector<RegResult>& results, int time_points,
                                       const std::vector<StrainField>& fields,
                                       const std::vector<std::optional<Segment>>& segments,
                                       StrainTensor tensor = StrainTensor::GreenLagrange);

// Radial: signed maximum; circumferential: signed minimum; earliest wins ties.
PeakStrain peak_strain(const StrainCurve& curve);

} // namespace inrstrain
