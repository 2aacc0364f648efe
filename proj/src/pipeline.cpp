#include "inrstrain/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "inrstrain/errors.hpp"
#include "inrstrain/report.hpp"

namespace inrstrain {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

ViewSet align_views(const ViewSet& views, const AlignConfig& cfg, AlignResult* result)
{
    AlignResult r = align_stack(views, cfg);
    ViewSet out = views;
    for (int t = 0; t < views.sax.time_points(); ++t) {
        out.sax.images[t] = apply_translations(views.sax.images[t], r.translations);
        out.sax.masks[t] = apply_translations(views.sax.masks[t], r.translations);
    }
    if (result) {
        *result = std::move(r);
    }
    return out;
}

ViewSet upsample_views(const ViewSet& views, const UpsampleSpec& spec)
{
    spec.validate();
    ViewSet out = views;
    for (int t = 0; t < views.sax.time_points(); ++t) {
        out.sax.images[t] = upsample_through_plane(views.sax.images[t], spec);
        out.sax.masks[t] = upsample_mask(views.sax.masks[t], spec);
    }
    return out;
}

std::vector<StrainCurve> sequence_strain(const std::vector<RegResult>& results, const CineSeries& sax,
                                         StrainTensor tensor, double rv_smoothing, std::vector<std::string>* warnings)
{
    const LabelMask& ed_mask = sax.masks[sax.ed_index];
    const DirectionField lv = lv_polar_dirs(ed_mask);
    if (lv.skipped_slices > 0 && warnings) {
        warnings->push_back("strain: " + std::to_string(lv.skipped_slices) +
                            " slice(s) with myocardium but no LV pool were skipped");
    }
    std::vector<StrainField> fields{{Structure::LV, &lv}};
    std::optional<DirectionField> rv;
    if (std::find(ed_mask.data.begin(), ed_mask.data.end(), label::rv_pool) != ed_mask.data.end()) {
        rv = rv_dirs(ed_mask, rv_smoothing);
        fields.push_back({Structure::RV, &*rv});
    } else if (warnings) {
        warnings->push_back("strain: no RV pool at ED; RV curves omitted");
    }
    const auto segments = segment_slices(ed_mask);
    return strain_curves(results, sax.time_points(), fields, segments, tensor);
}

MetricReport evaluate_pair(const ViewSet& views, int moving, const RegResult* result)
{
    const int ed = views.sax.ed_index;
    const LabelMask& fixed = views.sax.masks[ed];
    MetricInputs in;
    in.fixed_sax = &fixed;
    LabelMask warped_sax, warped_4ch;
    std::vector<double> dets;
    const bool has_4ch = views.ch4.time_points() == views.sax.time_points();
    if (result) {
        warped_sax = warp_mask(views.sax.masks[moving], result->params, result->frame, fixed.geom);
        dets = jac_det_grid(result->params, result->frame, voxel_centers(fixed.geom));
        if (has_4ch) {
            warped_4ch = warp_plane_mask(views.ch4.masks[moving], result->params, result->frame);
        }
    } else {
        warped_sax = views.sax.masks[moving];
        dets.assign(fixed.size(), 1.0);
        if (has_4ch) {
            warped_4ch = views.ch4.masks[moving];
        }
    }
    in.warped_sax = &warped_sax;
    in.dets = &dets;
    if (has_4ch) {
        in.warped_4ch = &warped_4ch;
        in.fixed_4ch = &views.ch4.masks[ed];
    }
    return evaluate_metrics(in);
}

PipelineResult run_pipeline(const ViewSet& views, const PipelineConfig& cfg)
{
    views.validate();
    PipelineResult out;
    ViewSet current = views;

    auto start = std::chrono::steady_clock::now();
    if (cfg.do_align) {
        if (views.ch2) {
            AlignResult ar;
            current = align_views(current, cfg.align, &ar);
            out.alignment = std::move(ar);
        } else {
            out.warnings.push_back("align: no 2CH view; alignment skipped");
        }
    }
    out.times.align = seconds_since(start);

    start = std::chrono::steady_clock::now();
    if (cfg.do_upsample && cfg.upsample.factor > 1) {
        current = upsample_views(current, cfg.upsample);
    }
    out.times.upsample = seconds_since(start);

    start = std::chrono::steady_clock::now();
    out.registrations = register_sequence(current, cfg.reg);
    out.times.register_seq = seconds_since(start);

    start = std::chrono::steady_clock::now();
    out.curves = sequence_strain(out.registrations, current.sax, cfg.tensor, cfg.rv_smoothing, &out.warnings);
    out.times.strain = seconds_since(start);

    start = std::chrono::steady_clock::now();
    const int es = current.sax.es_index;
    const auto it = std::find_if(out.registrations.begin(), out.registrations.end(),
                                 [&](const RegResult& r) { return r.moving_index == es; });
    if (it == out.registrations.end()) {
        throw DataError("pipeline: ES frame coincides with ED; nothing to evaluate");
    }
    out.metrics = evaluate_pair(current, es, &*it);
    out.baseline = evaluate_pair(current, es, nullptr);
    out.times.evaluate = seconds_since(start);
    out.prepared = std::move(current);
    return out;
}

void write_pipeline_outputs(const PipelineResult& result, const fs::path& dir)
{
    fs::create_directories(dir);
    if (result.alignment) {
        write_shifts_csv(result.alignment->translations, dir / "shifts.csv");
    }
    write_strain_curves_csv(result.curves, dir / "strain_curves.csv");
    write_peaks_csv(result.curves, dir / "peak_strain.csv");
    write_metrics_csv(result.metrics, dir / "metrics.csv");
    write_metrics_csv(result.baseline, dir / "metrics_baseline.csv");
    write_loss_trace_csv(result.registrations, dir / "loss_trace.csv");
    fs::create_directories(dir / "params");
    for (const auto& r : result.registrations) {
        char name[32];
        std::snprintf(name, sizeof name, "pair_%02d.params", r.moving_index);
        write_reg_result(r, dir / "params" / name);
    }
    for (auto structure : {Structure::LV, Structure::RV}) {
        for (auto component : {StrainComponent::Radial, StrainComponent::Circumferential}) {
            std::vector<PlotSeries> series;
            for (const auto& c : result.curves) {
                if (c.structure != structure || c.component != component) continue;
                PlotSeries s{to_string(c.segment), {}, c.values};
                s.x.assign(c.time_indices.begin(), c.time_indices.end());
                series.push_back(std::move(s));
            }
            if (series.empty()) continue;
            const std::string name = to_string(structure) + "_" + to_string(component);
            write_svg_plot(series, name + " strain", "time index", "strain", dir / ("strain_" + name + ".svg"));
        }
    }
    std::vector<PlotSeries> losses;
    for (const auto& r : result.registrations) {
        PlotSeries s{"t=" + std::to_string(r.moving_index), {}, {}};
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
            s.x.push_back(static_cast<double>(i));
            s.y.push_back(r.trace[i].total);
        }
        losses.push_back(std::move(s));
    }
    write_svg_plot(losses, "registration loss", "iteration", "loss", dir / "loss_trace.svg");
    if (result.alignment) {
        PlotSeries s{"alignment", {}, result.alignment->loss_trace};
        for (std::size_t i = 0; i < s.y.size(); ++i) s.x.push_back(static_cast<double>(i));
        write_svg_plot({s}, "alignment loss", "iteration", "loss", dir / "align_trace.svg");
    }
}

} // namespace inrstrain
