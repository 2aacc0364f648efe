#include "inrstrain/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "inrstrain/errors.hpp"

namespace inrstrain {

namespace fs = std::filesystem;

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    return out;
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

void write_strain_curves_csv(const std::vector<StrainCurve>& curves, const fs::path& path)
{
    auto out = open_out(path);
    out << "time_index,structure,component,segment,value\n";
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.values.size(); ++i) {
            out << c.time_indices[i] << ',' << to_string(c.structure) << ',' << to_string(c.component) << ','
                << to_string(c.segment) << ',' << format_number(c.values[i]) << '\n';
        }
    }
}

void write_peaks_csv(const std::vector<StrainCurve>& curves, const fs::path& path)
{
    auto out = open_out(path);
    out << "structure,component,segment,peak,time_index\n";
    for (const auto& c : curves) {
        const auto p = peak_strain(c);
        out << to_string(c.structure) << ',' << to_string(c.component) << ',' << to_string(c.segment) << ','
            << format_number(p.value) << ',' << p.time_index << '\n';
    }
}

void write_loss_trace_csv(const std::vector<RegResult>& results, const fs::path& path)
{
    auto out = open_out(path);
    out << "moving_index,iteration,total,ncc_sax,ncc_4ch,jfg_sax,jbg_sax,jfg_4ch,jbg_4ch\n";
    for (const auto& r : results) {
        for (std::size_t it = 0; it < r.trace.size(); ++it) {
            const auto& t = r.trace[it];
            out << r.moving_index << ',' << it << ',' << format_number(t.total) << ',' << format_number(t.ncc_sax)
                << ',' << format_number(t.ncc_4ch) << ',' << format_number(t.jfg_sax) << ','
                << format_number(t.jbg_sax) << ',' << format_number(t.jfg_4ch) << ',' << format_number(t.jbg_4ch)
                << '\n';
        }
    }
}

void write_reg_result(const RegResult& r, const fs::path& params_path)
{
    save_params(r.params, params_path);
    nlohmann::json j;
    j["config"] = to_json(r.config);
    j["seed"] = r.seed;
    j["moving_index"] = r.moving_index;
    j["fixed_index"] = r.fixed_index;
    j["wall_seconds"] = r.wall_seconds;
    j["frame"] = {{"center", {r.frame.center[0], r.frame.center[1], r.frame.center[2]}},
                  {"half_extent", {r.frame.half_extent[0], r.frame.half_extent[1], r.frame.half_extent[2]}}};
    j["roi_lo"] = r.roi_lo;
    j["roi_hi"] = r.roi_hi;
    nlohmann::json total = nlohmann::json::array();
    for (const auto& t : r.trace) {
        total.push_back(t.total);
    }
    j["trace_total"] = total;
    if (!r.trace.empty()) {
        const auto& f = r.trace.back();
        j["final_terms"] = {{"total", f.total},     {"ncc_sax", f.ncc_sax}, {"ncc_4ch", f.ncc_4ch},
                            {"jfg_sax", f.jfg_sax}, {"jbg_sax", f.jbg_sax}, {"jfg_4ch", f.jfg_4ch},
                            {"jbg_4ch", f.jbg_4ch}};
    }
    fs::path side = params_path;
    side.replace_extension(".json");
    auto out = open_out(side);
    out << j.dump(2) << '\n';
}

RegResult read_reg_result(const fs::path& params_path)
{
    RegResult r;
    r.params = load_params(params_path);
    fs::path side = params_path;
    side.replace_extension(".json");
    std::ifstream in(side);
    if (!in) {
        throw DataError("cannot open " + side.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        r.seed = j.at("seed").get<std::uint64_t>();
        r.moving_index = j.at("moving_index").get<int>();
        r.fixed_index = j.at("fixed_index").get<int>();
        r.wall_seconds = j.value("wall_seconds", 0.0);
        for (int a = 0; a < 3; ++a) {
            r.frame.center[a] = j.at("frame").at("center").at(a).get<double>();
            r.frame.half_extent[a] = j.at("frame").at("half_extent").at(a).get<double>();
        }
        PipelineConfig pc;
        apply_config(j.at("config"), pc);
        r.config = pc.reg;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(side.filename().string(), e.what());
    }
    r.frame.validate();
    return r;
}

std::vector<RegResult> read_reg_results(const fs::path& dir)
{
    std::vector<RegResult> out;
    if (!fs::is_directory(dir)) {
        throw DataError("not a directory: " + dir.string());
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("pair_", 0) == 0 && e.path().extension() == ".params") {
            out.push_back(read_reg_result(e.path()));
        }
    }
    if (out.empty()) {
        throw DataError("no pair_*.params files in " + dir.string());
    }
    std::sort(out.begin(), out.end(), [](const RegResult& a, const RegResult& b) {
        return a.moving_index < b.moving_index;
    });
    return out;
}

void write_svg_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const fs::path& path)
{
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    const double W = 720, H = 420, left = 70, right = 180, top = 40, bottom = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) {
        x0 = 0; x1 = 1; y0 = 0; y1 = 1;
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0;
        const double xv = x0 + (x1 - x0) * k / 4.0;
        o << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << format_number(yv)
          << "</text>\n";
        o << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
          << format_number(xv) << "</text>\n";
        o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
          << "\" stroke=\"#ddd\"/>\n";
    }
    if (y0 < 0 && y1 > 0) {
        o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(0) << "\" y2=\"" << py(0)
          << "\" stroke=\"#888\"/>\n";
    }
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
      << "</text>\n";
    o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(y_label) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % std::size(palette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
            if (!std::isfinite(series[s].y[i])) continue;
            o << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
        }
        o << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << W - right + 10 << "\" x2=\"" << W - right + 30 << "\" y1=\"" << ly - 4 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - right + 36 << "\" y=\"" << ly << "\">" << xml_escape(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
    auto out = open_out(path);
    out << o.str();
}

nlohmann::json to_json(const AlignConfig& c)
{
    return {{"align_iterations", c.iterations},
            {"align_lr", c.lr},
            {"nmi_scale_mode", c.nmi_scale_mode == NmiScaleMode::Auto ? "auto" : "fixed"},
            {"nmi_scale", c.nmi_scale},
            {"max_shift", c.max_shift},
            {"nmi_bins", c.parzen.bins},
            {"nmi_sigma", c.parzen.sigma}};
}

nlohmann::json to_json(const RegConfig& c)
{
    return {{"iterations", c.iterations},
            {"chain_iterations", c.chain_iterations},
            {"lr", c.lr},
            {"batch_sax", c.batch_sax},
            {"batch_4ch", c.batch_4ch},
            {"alpha_fg", c.alpha_fg},
            {"alpha_bg", c.alpha_bg},
            {"alpha_uniform", c.alpha_uniform},
            {"use_4ch", c.use_4ch},
            {"jac_mode", to_string(c.jac_mode)},
            {"warm_start", c.warm_start},
            {"seed", c.seed},
            {"hidden_width", c.network.hidden_width},
            {"hidden_layers", c.network.hidden_layers},
            {"omega0", c.network.omega0},
            {"roi_dilation", c.roi_dilation},
            {"rv_band_foreground", c.rv_band_foreground},
            {"jobs", c.jobs}};
}

nlohmann::json to_json(const PipelineConfig& c)
{
    nlohmann::json j = to_json(c.reg);
    j.update(to_json(c.align));
    j["do_align"] = c.do_align;
    j["do_upsample"] = c.do_upsample;
    j["upsample_factor"] = c.upsample.factor;
    j["upsample_method"] = c.upsample.method;
    j["strain_tensor"] = c.tensor == StrainTensor::GreenLagrange ? "green_lagrange" : "engineering";
    j["rv_smoothing"] = c.rv_smoothing;
    return j;
}

void apply_config(const nlohmann::json& j, PipelineConfig& c, const std::vector<std::string>& foreign_keys)
{
    if (!j.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    const std::set<std::string> foreign(foreign_keys.begin(), foreign_keys.end());
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "align_iterations") c.align.iterations = v.get<int>();
            else if (key == "align_lr") c.align.lr = v.get<double>();
            else if (key == "nmi_scale_mode") {
                const auto s = v.get<std::string>();
                if (s != "auto" && s != "fixed") throw ConfigError("config: nmi_scale_mode must be auto or fixed");
                c.align.nmi_scale_mode = s == "auto" ? NmiScaleMode::Auto : NmiScaleMode::Fixed;
            }
            else if (key == "nmi_scale") c.align.nmi_scale = v.get<double>();
            else if (key == "max_shift") c.align.max_shift = v.get<double>();
            else if (key == "nmi_bins") c.align.parzen.bins = v.get<int>();
            else if (key == "nmi_sigma") c.align.parzen.sigma = v.get<double>();
            else if (key == "iterations") c.reg.iterations = v.get<int>();
            else if (key == "chain_iterations") c.reg.chain_iterations = v.get<int>();
            else if (key == "lr") c.reg.lr = v.get<double>();
            else if (key == "batch_sax") c.reg.batch_sax = v.get<int>();
            else if (key == "batch_4ch") c.reg.batch_4ch = v.get<int>();
            else if (key == "alpha_fg") c.reg.alpha_fg = v.get<double>();
            else if (key == "alpha_bg") c.reg.alpha_bg = v.get<double>();
            else if (key == "alpha_uniform") c.reg.alpha_uniform = v.get<double>();
            else if (key == "use_4ch") c.reg.use_4ch = v.get<bool>();
            else if (key == "jac_mode") c.reg.jac_mode = jacobian_mode_from_string(v.get<std::string>());
            else if (key == "warm_start") c.reg.warm_start = v.get<bool>();
            else if (key == "seed") { c.reg.seed = v.get<std::uint64_t>(); c.align.seed = c.reg.seed; }
            else if (key == "hidden_width") c.reg.network.hidden_width = v.get<int>();
            else if (key == "hidden_layers") c.reg.network.hidden_layers = v.get<int>();
            else if (key == "omega0") c.reg.network.omega0 = v.get<double>();
            else if (key == "roi_dilation") c.reg.roi_dilation = v.get<int>();
            else if (key == "rv_band_foreground") c.reg.rv_band_foreground = v.get<bool>();
            else if (key == "jobs") c.reg.jobs = v.get<int>();
            else if (key == "do_align") c.do_align = v.get<bool>();
            else if (key == "do_upsample") c.do_upsample = v.get<bool>();
            else if (key == "upsample_factor") c.upsample.factor = v.get<int>();
            else if (key == "upsample_method") c.upsample.method = v.get<std::string>();
            else if (key == "strain_tensor") {
                const auto s = v.get<std::string>();
                if (s == "green_lagrange") c.tensor = StrainTensor::GreenLagrange;
                else if (s == "engineering") c.tensor = StrainTensor::Engineering;
                else throw ConfigError("config: strain_tensor must be green_lagrange or engineering");
            }
            else if (key == "rv_smoothing") c.rv_smoothing = v.get<double>();
            else if (!foreign.count(key)) throw ConfigError("config: unknown key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(key, e.what());
        }
    }
}

nlohmann::json RunManifest::to_json() const
{
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seed"] = seed;
    j["deterministic"] = deterministic;
    j["versions"] = {{"inrstrain", version_string},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    j["timings"] = timings;
    j["exit_status"] = exit_status;
    if (!error.empty()) {
        j["error"] = error;
    }
    return j;
}

void RunManifest::write(const fs::path& path) const
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    auto out = open_out(path);
    out << to_json().dump(2) << '\n';
}

} // namespace inrstrain
