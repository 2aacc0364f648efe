#include "inrstrain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "inrstrain/distance_transform.hpp"
#include "inrstrain/errors.hpp"

namespace inrstrain {

namespace {

void require_same_grid(const LabelMask& a, const LabelMask& b, const char* who)
{
    if (a.geom.dims != b.geom.dims || !a.geom.same_as(b.geom)) {
        throw DataError(std::string(who) + ": mask geometries differ");
    }
}

std::vector<std::uint8_t> select(const LabelMask& m, std::uint8_t code)
{
    std::vector<std::uint8_t> out(m.size());
    for (std::size_t n = 0; n < m.size(); ++n) {
        out[n] = m.data[n] == code ? 1 : 0;
    }
    return out;
}

// Largest distance from a boundary voxel of `from` to the boundary of `to`.
double directed(const std::vector<std::uint8_t>& from_boundary, const std::vector<double>& dist2_to)
{
    double worst = 0.0;
    for (std::size_t n = 0; n < from_boundary.size(); ++n) {
        if (from_boundary[n]) {
            worst = std::max(worst, dist2_to[n]);
        }
    }
    return std::sqrt(worst);
}

} // namespace

double dice(const LabelMask& a, const LabelMask& b, std::uint8_t code)
{
    require_same_grid(a, b, "dice");
    long na = 0, nb = 0, both = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const bool in_a = a.data[n] == code;
        const bool in_b = b.data[n] == code;
        na += in_a;
        nb += in_b;
        both += in_a && in_b;
    }
    if (na + nb == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double hausdorff(const LabelMask& a, const LabelMask& b, std::uint8_t code)
{
    require_same_grid(a, b, "hausdorff");
    const auto sa = select(a, code);
    const auto sb = select(b, code);
    if (std::none_of(sa.begin(), sa.end(), [](auto v) { return v; }) ||
        std::none_of(sb.begin(), sb.end(), [](auto v) { return v; })) {
        throw DataError("hausdorff: label " + std::to_string(code) + " is empty in one of the masks");
    }
    const auto ba = region_boundary(a.geom, sa);
    const auto bb = region_boundary(b.geom, sb);
    const auto da = squared_distance_transform(a.geom, ba);
    const auto db = squared_distance_transform(b.geom, bb);
    return std::max(directed(ba, db), directed(bb, da));
}

double jacobian_stats(const std::vector<double>& dets, const LabelMask& mask, std::uint8_t code)
{
    if (dets.size() != mask.size()) {
        throw DataError("jacobian_stats: determinant count does not match the mask");
    }
    double sum = 0.0;
    long count = 0;
    for (std::size_t n = 0; n < dets.size(); ++n) {
        if (mask.data[n] == code) {
            sum += std::abs(dets[n] - 1.0);
            ++count;
        }
    }
    if (count == 0) {
        throw DataError("jacobian_stats: label " + std::to_string(code) + " is empty");
    }
    return sum / static_cast<double>(count);
}

MetricReport evaluate_metrics(const MetricInputs& in)
{
    if (!in.warped_sax || !in.fixed_sax) {
        throw DataError("evaluate_metrics: SAX masks are required");
    }
    static const std::pair<const char*, std::uint8_t> structures[] = {
        {"LV", label::lv_pool}, {"MYO", label::myocardium}, {"RV", label::rv_pool}};
    MetricReport report;
    double hd_sum = 0.0;
    for (const auto& [name, code] : structures) {
        StructureMetrics m;
        m.structure = name;
        m.code = code;
        m.voxels = std::count(in.fixed_sax->data.begin(), in.fixed_sax->data.end(), code);
        const long moving_voxels = std::count(in.warped_sax->data.begin(), in.warped_sax->data.end(), code);
        if (m.voxels == 0 && moving_voxels == 0) {
            continue;
        }
        m.dsc_sax = dice(*in.warped_sax, *in.fixed_sax, code);
        m.dsc_4ch = std::numeric_limits<double>::quiet_NaN();
        if (in.warped_4ch && in.fixed_4ch) {
            m.dsc_4ch = dice(*in.warped_4ch, *in.fixed_4ch, code);
        }
        m.jac_abs_dev = std::numeric_limits<double>::quiet_NaN();
        if (in.dets && m.voxels > 0) {
            m.jac_abs_dev = jacobian_stats(*in.dets, *in.fixed_sax, code);
        }
        m.hd_mm = std::numeric_limits<double>::quiet_NaN();
        if (m.voxels > 0 && moving_voxels > 0) {
            m.hd_mm = hausdorff(*in.warped_sax, *in.fixed_sax, code);
        }
        report.structures.push_back(m);
    }
    int hd_count = 0;
    for (const auto& m : report.structures) {
        if (std::isfinite(m.hd_mm)) {
            hd_sum += m.hd_mm;
            ++hd_count;
        }
    }
    report.hd_avg = hd_count ? hd_sum / hd_count : std::numeric_limits<double>::quiet_NaN();
    return report;
}

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "structure,dsc_sax,dsc_4ch,jac_abs_dev,hd_mm\n";
    const auto num = [](double v) {
        if (!std::isfinite(v)) {
            return std::string("nan");
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& m : report.structures) {
        out << m.structure << ',' << num(m.dsc_sax) << ',' << num(m.dsc_4ch) << ',' << num(m.jac_abs_dev) << ','
            << num(m.hd_mm) << '\n';
    }
}

} // namespace inrstrain
