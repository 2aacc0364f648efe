#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "inrstrain/siren.hpp"
#include "inrstrain/volume.hpp"

namespace inrstrain {

enum class JacobianMode { Weighted, Uniform, Off };

std::string to_string(JacobianMode mode);
JacobianMode jacobian_mode_from_string(const std::string& s);

struct RegConfig {
    int iterations = 2500;
    int chain_iterations = 0; // iterations for warm-started pairs; 0 = same as `iterations`
    double lr = 1e-4;
    int batch_sax = 10000;
    int batch_4ch = 10000;
    double alpha_fg = 0.05;
    double alpha_bg = 0.0001;
    double alpha_uniform = 0.05;
    bool use_4ch = true;
    JacobianMode jac_mode = JacobianMode::Weighted;
    bool warm_start = true;
    std::uint64_t seed = 0;
    SirenShape network;
    int roi_dilation = 10;
    bool rv_band_foreground = true;
    int jobs = 1;

    void validate() const;
    double weight_fg() const;
    double weight_bg() const;
};

// Where coordinates are drawn for one view: the MYO bounding box
// dilated by `dilation` voxels and clipped to the grid.
struct SamplingDomain {
    Geometry geom;
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};
    std::vector<std::uint8_t> foreground;

    static SamplingDomain build(const LabelMask& mask, int dilation, bool rv_band_foreground);
};

struct CoordBatch {
    Matrix3X world;
    Matrix3X canonical;
    std::vector<std::uint8_t> fg;

    Eigen::Index size() const { return world.cols(); }
};

CoordBatch sample_coords(const SamplingDomain& domain, const NormalizedFrame& frame, int n, std::mt19937_64& rng);
CoordBatch sample_coords(const LabelMask& mask, const NormalizedFrame& frame, int n, std::mt19937_64& rng,
                         int dilation = 10);

// Fixed (ED) and moving frames for one registration; the 4CH members
// are optional planes (nz = 1).
struct RegistrationPair {
    const Volume3D* fixed_sax = nullptr;
    const Volume3D* moving_sax = nullptr;
    const LabelMask* fixed_sax_mask = nullptr;
    const Volume3D* fixed_4ch = nullptr;
    const Volume3D* moving_4ch = nullptr;
    const LabelMask* fixed_4ch_mask = nullptr;

    bool has_4ch() const { return fixed_4ch && moving_4ch && fixed_4ch_mask; }
};

// The terms of the multi-view loss; total is their weighted sum.
struct LossTerms {
    double total = 0.0;
    double ncc_sax = 0.0;
    double ncc_4ch = 0.0;
    double jfg_sax = 0.0;
    double jbg_sax = 0.0;
    double jfg_4ch = 0.0;
    double jbg_4ch = 0.0;
};

double weighted_total(const LossTerms& t, double w_fg, double w_bg);

struct LossEval {
    LossTerms terms;
    MlpGrads grads;
};

LossEval registration_loss(const MlpParams& params, const RegistrationPair& pair, const NormalizedFrame& frame,
                  const CoordBatch& sax_batch, const CoordBatch* ch4_batch, const RegConfig& cfg,
                  bool with_grad = true);

struct RegResult {
    MlpParams params;
    std::vector<LossTerms> trace;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    int moving_index = -1;
    int fixed_index = -1;
    RegConfig config;
    NormalizedFrame frame;
    Index3 roi_lo{0, 0, 0};
    Index3 roi_hi{0, 0, 0};
};

RegResult register_pair(const RegistrationPair& pair, const NormalizedFrame& frame, const RegConfig& cfg,
                        const MlpParams* init, std::uint64_t pair_seed, int iterations = 0);

// Registers every non-ED SAX frame to the ED frame in time order. With
// warm_start, pair i+1 starts from pair i's trained weights.
std::vector<RegResult> register_sequence(const ViewSet& views, const RegConfig& cfg);

// Maps fixed-frame millimetres through phi(x) = x + u(x).
class DisplacementModel {
public:
    DisplacementModel(const MlpParams& params, const NormalizedFrame& frame);

    std::vector<Vec3> map(const std::vector<Vec3>& x_mm) const;
    // F = I + du_mm/dx_mm at each point.
    std::vector<Mat3> deformation_gradients(const std::vector<Vec3>& x_mm) const;

private:
    SirenEvaluator eval_;
    NormalizedFrame frame_;
};

Mat3 canonical_to_mm_gradient(const Mat3& jac_canonical, const NormalizedFrame& frame);

Volume3D warp_volume(const Volume3D& moving, const MlpParams& params, const NormalizedFrame& frame);
Volume3D warp_volume(const Volume3D& moving, const MlpParams& params, const NormalizedFrame& frame,
                     const Geometry& fixed_grid);
LabelMask warp_mask(const LabelMask& moving, const MlpParams& params, const NormalizedFrame& frame);
LabelMask warp_mask(const LabelMask& moving, const MlpParams& params, const NormalizedFrame& frame,
                    const Geometry& fixed_grid);
// Warps an nz=1 plane mask by projecting phi(x) back onto the plane.
LabelMask warp_plane_mask(const LabelMask& moving_plane, const MlpParams& params, const NormalizedFrame& frame);

std::vector<double> jac_det_grid(const MlpParams& params, const NormalizedFrame& frame,
                                 const std::vector<Vec3>& points_mm);

// World positions of all voxel centers of `g`, x-fastest.
std::vector<Vec3> voxel_centers(const Geometry& g);

} // namespace inrstrain
