#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "inrstrain/losses.hpp"
#include "inrstrain/volume.hpp"

namespace inrstrain {

// Per-slice in-plane shift in mm along the SAX direction columns 0 and
// 1. Aligned slice content equals the raw slice content moved by +t.
struct SliceTranslations {
    std::vector<Eigen::Vector2d> shifts;

    static SliceTranslations zeros(int slices) { return {std::vector<Eigen::Vector2d>(slices, Eigen::Vector2d::Zero())}; }
    int size() const noexcept { return static_cast<int>(shifts.size()); }
};

enum class NmiScaleMode { Auto, Fixed };

struct AlignConfig {
    int iterations = 2000;
    double lr = 0.01;
    NmiScaleMode nmi_scale_mode = NmiScaleMode::Auto;
    double nmi_scale = 1.0; // used when mode is Fixed
    double max_shift = 20.0;
    std::uint64_t seed = 0;
    ParzenOptions parzen;

    void validate() const;
};

// SAX stack values on a long-axis plane, with per-pixel derivatives
// w.r.t. the translations of the two bracketing slices.
struct StackWarp {
    std::vector<double> values;
    std::vector<std::uint8_t> inside;
    std::vector<int> slice0, slice1;
    std::vector<Eigen::Vector2d> d_t0, d_t1;
};

StackWarp warp_stack_to_lax(const Volume3D& sax, const SliceTranslations& trans, const Geometry& lax_plane,
                            bool with_grad = true);

// Reference long-axis view (an nz=1 plane) with its segmentation.
struct LaxReference {
    const Volume3D* image = nullptr;
    const LabelMask* mask = nullptr;
};

struct AlignViewTerms {
    double ncc = 0.0;  // correlation value (loss contribution -ncc)
    double nmi = 0.0;  // NMI value (loss contribution -s*nmi)
    double dice = 0.0; // soft Dice value (loss contribution 1-dice)
};

struct AlignLoss {
    double total = 0.0;
    std::vector<AlignViewTerms> views;
    std::vector<Eigen::Vector2d> grad;
};

// Image loss (-NCC - s NMI over the long-axis MYO mask) plus
// segmentation loss (1 - soft Dice of the warped SAX LV pool against the
// long-axis LV pool), summed over the reference views.
AlignLoss alignment_loss(const SliceTranslations& trans, const Volume3D& sax, const LabelMask& sax_mask,
                         const std::vector<LaxReference>& views, double nmi_scale, const ParzenOptions& parzen = {});

struct AlignResult {
    SliceTranslations translations;
    std::vector<double> loss_trace;
    double nmi_scale = 1.0;
};

// Optimizes translations at the ED frame against the 2CH and 4CH views.
AlignResult align_stack(const ViewSet& views, const AlignConfig& cfg);

// Same, on explicit frames.
AlignResult align_stack(const Volume3D& sax, const LabelMask& sax_mask, const std::vector<LaxReference>& views,
                        const AlignConfig& cfg);

Volume3D apply_translations(const Volume3D& sax, const SliceTranslations& trans);
LabelMask apply_translations(const LabelMask& sax, const SliceTranslations& trans);

void write_shifts_csv(const SliceTranslations& trans, const std::filesystem::path& path);
SliceTranslations read_shifts_csv(const std::filesystem::path& path);

} // namespace inrstrain
