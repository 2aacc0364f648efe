#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "inrstrain/pipeline.hpp"
#include "inrstrain/strain.hpp"

namespace inrstrain {

void write_strain_curves_csv(const std::vector<StrainCurve>& curves, const std::filesystem::path& path);
void write_peaks_csv(const std::vector<StrainCurve>& curves, const std::filesystem::path& path);
void write_loss_trace_csv(const std::vector<RegResult>& results, const std::filesystem::path& path);

// Params file plus a JSON sidecar with config, traces and timing.
void write_reg_result(const RegResult& result, const std::filesystem::path& params_path);
// Params, frame and time indices back from write_reg_result output.
RegResult read_reg_result(const std::filesystem::path& params_path);
// All pair_*.params files of a directory, sorted by moving index.
std::vector<RegResult> read_reg_results(const std::filesystem::path& dir);

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained SVG line chart.
void write_svg_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::filesystem::path& path);

nlohmann::json to_json(const AlignConfig& cfg);
nlohmann::json to_json(const RegConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);

// Applies flat config keys; unknown keys raise ConfigError unless listed
// in `foreign_keys`.
void apply_config(const nlohmann::json& j, PipelineConfig& cfg, const std::vector<std::string>& foreign_keys = {});

std::string format_number(double v);

struct RunManifest {
    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    bool deterministic = false;
    nlohmann::json timings = nlohmann::json::object();
    int exit_status = 0;
    std::string error;

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;
};

inline constexpr const char* version_string = "0.1.0";

} // namespace inrstrain
