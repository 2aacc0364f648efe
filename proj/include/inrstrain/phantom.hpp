#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"

#include "inrstrain/slice_align.hpp"
#include "inrstrain/volume.hpp"

namespace inrstrain {

// Synthetic beating annulus. The LV axis runs along world z through
// x = y = 0; the SAX grid is centered on it.
struct PhantomConfig {
    Index3 dims{64, 64, 12};
    Vec3 spacing{2.0, 2.0, 8.0};
    double r_in = 14.0;         // mm, endocardial radius at ED
    double r_out = 22.0;        // mm, epicardial radius at ED
    double c_max = 80.0;        // mm^2
    double taper_radius = 34.0; // mm, contraction fades to zero here
    int phases = 10;
    std::uint64_t texture_seed = 1;
    bool rv_enable = true;
    double apex_taper = 0.0;    // fractional LV narrowing from slice 0 to the last slice
    double lax_spacing = 2.0;   // mm, long-axis pixel size
    bool with_ch2 = true;
    double noise_sigma = 0.0;

    void validate() const;
};

nlohmann::json to_json(const PhantomConfig& cfg);
PhantomConfig phantom_config_from_json(const nlohmann::json& j);

// Closed-form motion. Material (ED) points at in-plane radius R sit at
// radius r with r^2 = R^2 - c(t) b(R), where b is 1 up to r_out and
// falls to 0 at taper_radius.
struct GroundTruth {
    PhantomConfig config;
    std::vector<double> c; // per time point, mm^2
    int ed_index = 0;
    int es_index = 0;
    std::optional<SliceTranslations> shifts;

    double blend(double R) const;
    double blend_derivative(double R) const;
    // Radius scale of the LV at height z (1 at the base).
    double lv_scale(double z) const;

    Vec3 to_spatial(const Vec3& X, int t) const; // ED position -> time t
    Vec3 to_material(const Vec3& x, int t) const; // time t -> ED position
    Mat3 deformation_gradient(const Vec3& X, int t) const;

    std::uint8_t material_label(const Vec3& X) const;
    double material_intensity(const Vec3& X) const;

    LabelMask label_volume(const Geometry& g, int t) const;
    Volume3D intensity_volume(const Geometry& g, int t) const;

    nlohmann::json to_json() const;
    static GroundTruth from_json(const nlohmann::json& j);

    // Draws the texture waves from config.texture_seed.
    void build_texture();

private:
    struct Wave {
        Vec3 k;
        double phase;
    };
    std::vector<Wave> waves_;
};

// (E_RR, E_CC) at ED point X inside the LV wall.
std::pair<double, double> analytic_strain(const GroundTruth& gt, int t, const Vec3& X);

struct Phantom {
    ViewSet views;
    GroundTruth truth;
};

Phantom make_phantom(const PhantomConfig& cfg);

// SAX geometry and the long-axis plane geometries used by make_phantom.
Geometry phantom_sax_geometry(const PhantomConfig& cfg);
Geometry phantom_ch4_geometry(const PhantomConfig& cfg);
Geometry phantom_ch2_geometry(const PhantomConfig& cfg);

// Random per-slice shifts U(-max_shift, max_shift)^2 applied to every
// frame. Returns the corrupted series and the shifts applied.
std::pair<CineSeries, SliceTranslations> inject_misalignment(const CineSeries& sax, std::uint64_t seed,
                                                            double max_shift);

// Keeps slices 0, k, 2k, ...; spacing along z grows by k.
Volume3D decimate(const Volume3D& vol, int k);
LabelMask decimate(const LabelMask& mask, int k);

} // namespace inrstrain
