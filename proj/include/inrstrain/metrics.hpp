#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inrstrain/volume.hpp"

namespace inrstrain {

// 2|A n B| / (|A| + |B|); 1 when both are empty.
double dice(const LabelMask& a, const LabelMask& b, std::uint8_t code);

// Full symmetric Hausdorff distance in mm between the boundaries of the
// two label sets.
double hausdorff(const LabelMask& a, const LabelMask& b, std::uint8_t code);

// Mean |det - 1| over the voxels of `mask` carrying `code`; `dets` is
// indexed like the mask.
double jacobian_stats(const std::vector<double>& dets, const LabelMask& mask, std::uint8_t code);

struct StructureMetrics {
    std::string structure;
    std::uint8_t code = 0;
    double dsc_sax = 0.0;
    double dsc_4ch = 0.0; // NaN when no 4CH view was evaluated
    double jac_abs_dev = 0.0;
    double hd_mm = 0.0;
    long voxels = 0;
};

struct MetricReport {
    std::vector<StructureMetrics> structures;
    double hd_avg = 0.0;
};

struct MetricInputs {
    const LabelMask* warped_sax = nullptr;
    const LabelMask* fixed_sax = nullptr;
    const LabelMask* warped_4ch = nullptr; // optional
    const LabelMask* fixed_4ch = nullptr;
    const std::vector<double>* dets = nullptr; // on the fixed SAX grid
};

// LV, MYO and RV metrics; structures absent from both masks are skipped.
MetricReport evaluate_metrics(const MetricInputs& in);

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path);

} // namespace inrstrain
