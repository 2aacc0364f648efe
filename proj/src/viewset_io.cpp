#include "inrstrain/viewset_io.hpp"

#include <cstdio>
#include <fstream>

#include "inrstrain/errors.hpp"
#include "inrstrain/mha_io.hpp"

namespace inrstrain {

namespace fs = std::filesystem;

namespace {

std::string frame_name(const std::string& view, const char* kind, int t)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%s_%02d.mha", view.c_str(), kind, t);
    return buf;
}

void write_series(const CineSeries& s, const std::string& view, const fs::path& dir)
{
    for (int t = 0; t < s.time_points(); ++t) {
        write_mha(s.images[t], dir / frame_name(view, "img", t));
        write_mha(s.masks[t], dir / frame_name(view, "seg", t));
    }
}

CineSeries read_series(const std::string& view, const fs::path& dir, int time_points, int ed, int es)
{
    CineSeries s;
    for (int t = 0; t < time_points; ++t) {
        s.images.push_back(read_mha_volume(dir / frame_name(view, "img", t)));
        s.masks.push_back(read_mha_mask(dir / frame_name(view, "seg", t)));
    }
    s.ed_index = ed;
    s.es_index = es;
    return s;
}

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.filename().string(), e.what());
    }
}

void write_json(const nlohmann::json& j, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

} // namespace

void write_viewset(const ViewSet& views, const fs::path& dir)
{
    views.validate();
    fs::create_directories(dir);
    write_series(views.sax, "sax", dir);
    write_series(views.ch4, "ch4", dir);
    nlohmann::json names = {"sax", "ch4"};
    if (views.ch2) {
        write_series(*views.ch2, "ch2", dir);
        names.push_back("ch2");
    }
    write_json({{"time_points", views.sax.time_points()},
                {"ed_index", views.sax.ed_index},
                {"es_index", views.sax.es_index},
                {"views", names}},
               dir / "viewset.json");
}

ViewSet read_viewset(const fs::path& dir)
{
    const auto j = read_json(dir / "viewset.json");
    int T = 0, ed = 0, es = 0;
    std::vector<std::string> names;
    try {
        T = j.at("time_points").get<int>();
        ed = j.at("ed_index").get<int>();
        es = j.at("es_index").get<int>();
        names = j.at("views").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("viewset.json", e.what());
    }
    ViewSet v;
    v.sax = read_series("sax", dir, T, ed, es);
    v.ch4 = read_series("ch4", dir, T, ed, es);
    if (std::find(names.begin(), names.end(), "ch2") != names.end()) {
        v.ch2 = read_series("ch2", dir, T, ed, es);
    }
    v.validate();
    return v;
}

void write_ground_truth(const GroundTruth& gt, const fs::path& dir)
{
    fs::create_directories(dir);
    write_json(gt.to_json(), dir / "ground_truth.json");
}

std::optional<GroundTruth> read_ground_truth(const fs::path& dir)
{
    if (!fs::exists(dir / "ground_truth.json")) {
        return std::nullopt;
    }
    return GroundTruth::from_json(read_json(dir / "ground_truth.json"));
}

} // namespace inrstrain
