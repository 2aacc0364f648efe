#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "inrstrain/metrics.hpp"
#include "inrstrain/registration.hpp"
#include "inrstrain/slice_align.hpp"
#include "inrstrain/strain.hpp"
#include "inrstrain/upsample.hpp"

namespace inrstrain {

struct PipelineConfig {
    bool do_align = true;
    AlignConfig align;
    bool do_upsample = true;
    UpsampleSpec upsample;
    RegConfig reg;
    StrainTensor tensor = StrainTensor::GreenLagrange;
    double rv_smoothing = 2.0; // voxels
};

struct StageTimes {
    double align = 0.0;
    double upsample = 0.0;
    double register_seq = 0.0;
    double strain = 0.0;
    double evaluate = 0.0;
};

struct PipelineResult {
    std::optional<AlignResult> alignment;
    ViewSet prepared; // aligned and upsampled views used for registration
    std::vector<RegResult> registrations;
    std::vector<StrainCurve> curves;
    MetricReport metrics;  // ES pair, after registration
    MetricReport baseline; // ES pair, unregistered
    StageTimes times;
    std::vector<std::string> warnings;
};

// Aligns the SAX stack (ED frame) and applies the shifts to every frame.
ViewSet align_views(const ViewSet& views, const AlignConfig& cfg, AlignResult* result = nullptr);

// Through-plane upsampling of every SAX frame and mask.
ViewSet upsample_views(const ViewSet& views, const UpsampleSpec& spec);

// LV and (when present) RV strain curves from a registered sequence.
std::vector<StrainCurve> sequence_strain(const std::vector<RegResult>& results, const CineSeries& sax,
                                         StrainTensor tensor, double rv_smoothing,
                                         std::vector<std::string>* warnings = nullptr);

// Metrics of the moving frame `moving` against ED after warping with
// `result`; a null result gives the unregistered baseline.
MetricReport evaluate_pair(const ViewSet& views, int moving, const RegResult* result);

PipelineResult run_pipeline(const ViewSet& views, const PipelineConfig& cfg);

// Writes shifts.csv, strain_curves.csv, peak_strain.csv, metrics.csv,
// metrics_baseline.csv, loss_trace.csv, params and SVG plots.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& dir);

} // namespace inrstrain
