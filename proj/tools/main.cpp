#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "inrstrain/errors.hpp"
#include "inrstrain/metrics.hpp"
#include "inrstrain/phantom.hpp"
#include "inrstrain/pipeline.hpp"
#include "inrstrain/report.hpp"
#include "inrstrain/stats.hpp"
#include "inrstrain/viewset_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace inrstrain;

namespace {

const std::vector<std::string> phantom_keys = {"dims",         "spacing",     "r_in",        "r_out",
                                               "c_max",        "taper_radius", "phases",     "texture_seed",
                                               "rv_enable",    "apex_taper",  "lax_spacing", "with_ch2",
                                               "noise_sigma",  "misalign",    "misalign_seed"};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One flag per flat config key. Values given on the command line become
// a JSON overlay applied after the config file.
class KeyFlags {
public:
    void add(CLI::App* app, const json& defaults, const std::vector<std::string>& keys)
    {
        for (const auto& key : keys) {
            auto& slot = values_[key];
            std::string flag = "--" + key;
            for (auto& ch : flag) {
                if (ch == '_') ch = '-';
            }
            auto* opt = app->add_option(flag, slot, "config key '" + key + "'");
            const json& d = defaults.at(key);
            opt->default_str(d.is_string() ? d.get<std::string>() : d.dump());
            opt->type_name(d.is_boolean()        ? "BOOL"
                           : d.is_number_float() ? "FLOAT"
                           : d.is_number()       ? "INT"
                           : d.is_array()        ? "A,B,C"
                                                 : "TEXT");
            entries_.push_back({key, opt, d.type()});
        }
    }

    json overlay() const
    {
        json j = json::object();
        for (const auto& e : entries_) {
            if (e.opt->count() == 0) continue;
            const std::string& s = values_.at(e.key);
            try {
                switch (e.type) {
                case json::value_t::boolean:
                    if (s == "true" || s == "1") j[e.key] = true;
                    else if (s == "false" || s == "0") j[e.key] = false;
                    else throw UsageError("");
                    break;
                case json::value_t::number_integer:
                    j[e.key] = std::stoll(s);
                    break;
                case json::value_t::number_unsigned:
                    j[e.key] = std::stoull(s);
                    break;
                case json::value_t::number_float:
                    j[e.key] = std::stod(s);
                    break;
                case json::value_t::array:
                    j[e.key] = json::parse(s.starts_with('[') ? s : "[" + s + "]");
                    if (!j[e.key].is_array()) throw UsageError("");
                    break;
                default:
                    j[e.key] = s;
                }
            } catch (const std::exception&) {
                throw UsageError("invalid value '" + s + "' for --" + e.key);
            }
        }
        return j;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* opt;
        json::value_t type;
    };
    std::map<std::string, std::string> values_;
    std::vector<Entry> entries_;
};

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.filename().string(), e.what());
    }
}

std::vector<std::string> keys_of(const json& j)
{
    std::vector<std::string> out;
    for (const auto& [k, v] : j.items()) out.push_back(k);
    return out;
}

json phantom_defaults()
{
    json j = to_json(PhantomConfig{});
    j["misalign"] = 0.0;
    j["misalign_seed"] = std::uint64_t{0};
    return j;
}

std::vector<std::string> align_keys()
{
    return {"align_iterations", "align_lr", "nmi_scale_mode", "nmi_scale", "max_shift", "nmi_bins", "nmi_sigma"};
}

std::vector<std::string> reg_keys()
{
    return {"iterations",    "chain_iterations", "lr",          "batch_sax",    "batch_4ch",
            "alpha_fg",      "alpha_bg",         "alpha_uniform", "use_4ch",    "jac_mode",
            "warm_start",    "hidden_width",     "hidden_layers", "omega0",     "roi_dilation",
            "rv_band_foreground"};
}

struct Common {
    std::string config;
    std::string in;
    std::string out;
    std::uint64_t seed = 0;
    bool deterministic = false;
    int jobs = 1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
};

void add_common(CLI::App* app, Common& c, bool needs_in)
{
    app->add_option("--config", c.config, "JSON config with flat keys; flags override it");
    if (needs_in) {
        app->add_option("--in", c.in, "input directory")->required();
    }
    const char* env_out = std::getenv("INRSTRAIN_OUT");
    auto* out = app->add_option("--out", c.out, "output directory (default: $INRSTRAIN_OUT)");
    if (env_out && *env_out) {
        c.out = env_out;
    } else {
        out->required();
    }
    c.seed_opt = app->add_option("--seed", c.seed, "random seed")->default_val(0);
    app->add_flag("--deterministic", c.deterministic, "ordered reductions; byte-identical reruns");
    c.jobs_opt = app->add_option("--jobs", c.jobs, "worker count for independent pairs")->default_val(1);
}

PipelineConfig resolve_pipeline(const Common& c, const KeyFlags& flags, json& snapshot)
{
    PipelineConfig cfg;
    if (!c.config.empty()) {
        apply_config(read_json_file(c.config), cfg, phantom_keys);
    }
    json overlay = flags.overlay();
    if (c.seed_opt && c.seed_opt->count()) overlay["seed"] = c.seed;
    if (c.jobs_opt && c.jobs_opt->count()) overlay["jobs"] = c.jobs;
    if (c.deterministic) overlay["jobs"] = 1;
    apply_config(overlay, cfg);
    cfg.align.validate();
    cfg.upsample.validate();
    cfg.reg.validate();
    snapshot = to_json(cfg);
    return cfg;
}

double elapsed(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_eval_outputs(const ViewSet& views, const std::vector<RegResult>& results, const fs::path& out,
                        std::vector<std::string>& outputs)
{
    for (const auto& r : results) {
        char name[32];
        std::snprintf(name, sizeof name, "metrics_t%02d.csv", r.moving_index);
        write_metrics_csv(evaluate_pair(views, r.moving_index, &r), out / name);
        outputs.push_back((out / name).string());
    }
    for (const auto& r : results) {
        if (r.moving_index == views.sax.es_index) {
            write_metrics_csv(evaluate_pair(views, r.moving_index, &r), out / "metrics.csv");
            write_metrics_csv(evaluate_pair(views, r.moving_index, nullptr), out / "metrics_baseline.csv");
            outputs.push_back((out / "metrics.csv").string());
            outputs.push_back((out / "metrics_baseline.csv").string());
        }
    }
}

std::vector<double> read_csv_column(const fs::path& path, const std::string& column)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.filename().string(), "empty file");
    }
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    const auto header = split(line);
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) {
        throw ParseError(column, "column not found in " + path.string());
    }
    const auto col = static_cast<std::size_t>(it - header.begin());
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (col >= cells.size()) {
            throw ParseError(column, "short row in " + path.string());
        }
        try {
            values.push_back(std::stod(cells[col]));
        } catch (const std::exception&) {
            throw ParseError(column, "not a number: '" + cells[col] + "'");
        }
    }
    return values;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cine MR registration with sine-activated coordinate networks and analytic strain"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    const json pdefaults = to_json(PipelineConfig{});
    const json phdefaults = phantom_defaults();

    Common c_phantom, c_align, c_up, c_reg, c_strain, c_eval, c_pipe;
    KeyFlags f_phantom, f_align, f_up, f_reg, f_strain, f_pipe;

    auto* phantom = app.add_subcommand("phantom", "generate the synthetic cine phantom");
    add_common(phantom, c_phantom, false);
    f_phantom.add(phantom, phdefaults,
                  {"dims", "spacing", "r_in", "r_out", "c_max", "taper_radius", "phases", "rv_enable", "apex_taper", "lax_spacing",
                   "with_ch2", "noise_sigma", "misalign", "misalign_seed"});

    auto* align = app.add_subcommand("align", "align SAX slices to the long-axis views");
    add_common(align, c_align, true);
    f_align.add(align, pdefaults, align_keys());

    auto* up = app.add_subcommand("upsample", "through-plane upsampling of the SAX series");
    add_common(up, c_up, true);
    f_up.add(up, pdefaults, {"upsample_factor", "upsample_method"});

    auto* reg = app.add_subcommand("register", "register every frame to ED");
    add_common(reg, c_reg, true);
    f_reg.add(reg, pdefaults, reg_keys());

    std::string params_dir;
    auto* strain = app.add_subcommand("strain", "strain curves from trained registrations");
    add_common(strain, c_strain, true);
    strain->add_option("--params", params_dir, "directory with pair_*.params")->required();
    f_strain.add(strain, pdefaults, {"strain_tensor", "rv_smoothing"});

    std::string eval_params;
    auto* evaluate = app.add_subcommand("evaluate", "overlap, Hausdorff and Jacobian metrics");
    add_common(evaluate, c_eval, true);
    evaluate->add_option("--params", eval_params, "directory with pair_*.params")->required();

    std::vector<std::string> groups;
    std::string column = "peak", stats_out;
    auto* stats = app.add_subcommand("stats", "Kruskal-Wallis test across CSV groups");
    stats->add_option("--groups", groups, "one CSV per group")->required()->expected(2, -1);
    stats->add_option("--column", column, "column to compare")->default_val("peak");
    stats->add_option("--out", stats_out, "JSON result path");

    auto* pipe = app.add_subcommand("pipeline", "align, upsample, register, strain and evaluate");
    add_common(pipe, c_pipe, true);
    {
        std::vector<std::string> all = keys_of(pdefaults);
        all.erase(std::remove_if(all.begin(), all.end(), [](const std::string& k) { return k == "seed" || k == "jobs"; }),
                  all.end());
        f_pipe.add(pipe, pdefaults, all);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    RunManifest manifest;
    fs::path manifest_path;
    const auto t0 = std::chrono::steady_clock::now();
    auto fail = [&](int code, const std::string& msg) {
        std::cerr << "error: " << msg << '\n';
        manifest.exit_status = code;
        manifest.error = msg;
        if (!manifest_path.empty()) {
            try {
                manifest.write(manifest_path);
            } catch (const std::exception&) {
            }
        }
        return code;
    };

    try {
        if (*phantom) {
            manifest.subcommand = "phantom";
            const fs::path out = c_phantom.out;
            manifest_path = out / "run_manifest.json";
            json cfgj = phdefaults;
            if (!c_phantom.config.empty()) {
                const json file = read_json_file(c_phantom.config);
                for (const auto& [k, v] : file.items()) {
                    if (phdefaults.contains(k)) cfgj[k] = v;
                    else if (!pdefaults.contains(k)) throw ConfigError("config: unknown key '" + k + "'");
                }
            }
            cfgj.update(f_phantom.overlay());
            if (c_phantom.seed_opt->count()) cfgj["texture_seed"] = c_phantom.seed;
            PhantomConfig pc = phantom_config_from_json(cfgj);
            Phantom ph = make_phantom(pc);
            const double misalign = cfgj.at("misalign").get<double>();
            if (misalign > 0.0) {
                auto [series, shifts] = inject_misalignment(ph.views.sax, cfgj.at("misalign_seed").get<std::uint64_t>(),
                                                            misalign);
                ph.views.sax = std::move(series);
                ph.truth.shifts = shifts;
            }
            write_viewset(ph.views, out);
            write_ground_truth(ph.truth, out);
            manifest.config = cfgj;
            manifest.seed = pc.texture_seed;
            manifest.outputs = {out.string()};
        } else if (*stats) {
            manifest.subcommand = "stats";
            std::vector<std::vector<double>> data;
            for (const auto& g : groups) {
                data.push_back(read_csv_column(g, column));
                manifest.inputs.push_back(g);
            }
            const KruskalWallis kw = kruskal_wallis(data);
            std::printf("H = %.6f\np = %.6g\ndf = %d\n", kw.h, kw.p, kw.df);
            manifest.config = {{"column", column}};
            if (!stats_out.empty()) {
                const fs::path out = stats_out;
                manifest_path = out.parent_path() / "run_manifest.json";
                if (out.has_parent_path()) fs::create_directories(out.parent_path());
                std::ofstream f(out);
                if (!f) throw DataError("cannot write " + out.string());
                f << json{{"H", kw.h}, {"p", kw.p}, {"df", kw.df}, {"column", column}, {"groups", groups}}.dump(2)
                  << '\n';
                manifest.outputs = {out.string()};
            }
        } else {
            Common* c = nullptr;
            KeyFlags* f = nullptr;
            KeyFlags none;
            if (*align) { c = &c_align; f = &f_align; manifest.subcommand = "align"; }
            else if (*up) { c = &c_up; f = &f_up; manifest.subcommand = "upsample"; }
            else if (*reg) { c = &c_reg; f = &f_reg; manifest.subcommand = "register"; }
            else if (*strain) { c = &c_strain; f = &f_strain; manifest.subcommand = "strain"; }
            else if (*evaluate) { c = &c_eval; f = &none; manifest.subcommand = "evaluate"; }
            else { c = &c_pipe; f = &f_pipe; manifest.subcommand = "pipeline"; }
            const fs::path in = c->in, out = c->out;
            manifest_path = out / "run_manifest.json";
            manifest.inputs = {in.string()};
            manifest.deterministic = c->deterministic;
            json snapshot;
            const PipelineConfig cfg = resolve_pipeline(*c, *f, snapshot);
            manifest.config = snapshot;
            manifest.seed = cfg.reg.seed;
            fs::create_directories(out);
            const ViewSet views = read_viewset(in);

            if (*align) {
                AlignResult ar;
                const ViewSet aligned = align_views(views, cfg.align, &ar);
                write_viewset(aligned, out);
                write_shifts_csv(ar.translations, out / "shifts.csv");
                manifest.outputs = {out.string(), (out / "shifts.csv").string()};
            } else if (*up) {
                write_viewset(upsample_views(views, cfg.upsample), out);
                manifest.outputs = {out.string()};
            } else if (*reg) {
                const auto results = register_sequence(views, cfg.reg);
                for (const auto& r : results) {
                    char name[32];
                    std::snprintf(name, sizeof name, "pair_%02d.params", r.moving_index);
                    write_reg_result(r, out / name);
                    manifest.outputs.push_back((out / name).string());
                }
                write_loss_trace_csv(results, out / "loss_trace.csv");
                manifest.outputs.push_back((out / "loss_trace.csv").string());
            } else if (*strain) {
                const auto results = read_reg_results(params_dir);
                manifest.inputs.push_back(params_dir);
                std::vector<std::string> warnings;
                const auto curves = sequence_strain(results, views.sax, cfg.tensor, cfg.rv_smoothing, &warnings);
                for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
                write_strain_curves_csv(curves, out / "strain_curves.csv");
                write_peaks_csv(curves, out / "peak_strain.csv");
                manifest.outputs = {(out / "strain_curves.csv").string(), (out / "peak_strain.csv").string()};
            } else if (*evaluate) {
                const auto results = read_reg_results(eval_params);
                manifest.inputs.push_back(eval_params);
                write_eval_outputs(views, results, out, manifest.outputs);
            } else {
                const PipelineResult result = run_pipeline(views, cfg);
                for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
                write_pipeline_outputs(result, out);
                manifest.outputs = {out.string()};
                manifest.timings = {{"align", result.times.align},
                                    {"upsample", result.times.upsample},
                                    {"register", result.times.register_seq},
                                    {"strain", result.times.strain},
                                    {"evaluate", result.times.evaluate}};
                for (const auto& m : result.metrics.structures) {
                    std::printf("%-4s dsc_sax %.4f  baseline %.4f  |det-1| %.4f  hd %.2f mm\n", m.structure.c_str(),
                                m.dsc_sax,
                                [&] {
                                    for (const auto& b : result.baseline.structures)
                                        if (b.structure == m.structure) return b.dsc_sax;
                                    return 0.0;
                                }(),
                                m.jac_abs_dev, m.hd_mm);
                }
            }
        }
    } catch (const UsageError& e) {
        return fail(1, e.what());
    } catch (const NumericalError& e) {
        return fail(3, e.what());
    } catch (const DataError& e) {
        return fail(2, e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(2, e.what());
    } catch (const std::exception& e) {
        return fail(3, e.what());
    }
    manifest.timings["total"] = elapsed(t0);
    if (!manifest_path.empty()) {
        manifest.write(manifest_path);
    }
    return 0;
}
