#include "inrstrain/slice_align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "inrstrain/adam.hpp"
#include "inrstrain/errors.hpp"

namespace inrstrain {

namespace {

struct Bilinear {
    double value = 0.0;
    bool inside = false;
    double dx = 0.0; // per index unit
    double dy = 0.0;
};

bool bracket(double x, int n, int& i0, double& f)
{
    if (!(x >= -1e-9 && x <= (n - 1) + 1e-9)) {
        return false;
    }
    if (n == 1) {
        i0 = 0;
        f = 0.0;
        return true;
    }
    const double c = std::clamp(x, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(c)), n - 2);
    f = c - i0;
    return true;
}

template <typename T>
Bilinear bilinear(const ImageGrid<T>& vol, int k, double x, double y)
{
    const auto& d = vol.geom.dims;
    int i0, j0;
    double fx, fy;
    if (!bracket(x, d[0], i0, fx) || !bracket(y, d[1], j0, fy)) {
        return {};
    }
    const int i1 = d[0] == 1 ? i0 : i0 + 1;
    const int j1 = d[1] == 1 ? j0 : j0 + 1;
    const double v00 = vol.at(i0, j0, k), v10 = vol.at(i1, j0, k);
    const double v01 = vol.at(i0, j1, k), v11 = vol.at(i1, j1, k);
    Bilinear b;
    b.inside = true;
    b.value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
    b.dx = d[0] == 1 ? 0.0 : (1 - fy) * (v10 - v00) + fy * (v11 - v01);
    b.dy = d[1] == 1 ? 0.0 : (1 - fx) * (v01 - v00) + fx * (v11 - v10);
    return b;
}

std::vector<LaxReference> reference_views(const ViewSet& views)
{
    if (!views.ch2) {
        throw ConfigError("align: the 2CH view is required for slice alignment");
    }
    const int ed = views.sax.ed_index;
    return {{&views.ch2->images[ed], &views.ch2->masks[ed]}, {&views.ch4.images[ed], &views.ch4.masks[ed]}};
}

} // namespace

void AlignConfig::validate() const
{
    if (iterations < 1) {
        throw ConfigError("align: iterations must be >= 1");
    }
    if (!(lr > 0.0)) {
        throw ConfigError("align: learning rate must be > 0");
    }
    if (!(max_shift > 0.0)) {
        throw ConfigError("align: max_shift must be > 0");
    }
    if (parzen.bins < 2 || !(parzen.sigma > 0.0)) {
        throw ConfigError("align: nmi bins must be >= 2 and sigma > 0");
    }
}

StackWarp warp_stack_to_lax(const Volume3D& sax, const SliceTranslations& trans, const Geometry& lax_plane,
                            bool with_grad)
{
    const auto& g = sax.geom;
    if (trans.size() != g.dims[2]) {
        throw DataError("warp: one translation per SAX slice is required");
    }
    const std::size_t n = lax_plane.voxel_count();
    StackWarp w;
    w.values.assign(n, 0.0);
    w.inside.assign(n, 0);
    w.slice0.assign(n, -1);
    w.slice1.assign(n, -1);
    if (with_grad) {
        w.d_t0.assign(n, Eigen::Vector2d::Zero());
        w.d_t1.assign(n, Eigen::Vector2d::Zero());
    }
    const double sx = g.spacing[0], sy = g.spacing[1];
    for (std::size_t p = 0; p < n; ++p) {
        const Index3 ij = lax_plane.unravel(p);
        const Vec3 world = voxel_to_world(lax_plane, Vec3(ij[0], ij[1], ij[2]));
        const Vec3 idx = world_to_voxel(g, world);
        int k0;
        double fk;
        if (!bracket(idx[2], g.dims[2], k0, fk)) {
            continue;
        }
        const int k1 = g.dims[2] == 1 ? k0 : k0 + 1;
        const Eigen::Vector2d& t0 = trans.shifts[k0];
        const Eigen::Vector2d& t1 = trans.shifts[k1];
        const Bilinear b0 = bilinear(sax, k0, idx[0] - t0[0] / sx, idx[1] - t0[1] / sy);
        const Bilinear b1 = bilinear(sax, k1, idx[0] - t1[0] / sx, idx[1] - t1[1] / sy);
        if (!b0.inside || !b1.inside) {
            continue;
        }
        w.values[p] = (1.0 - fk) * b0.value + fk * b1.value;
        w.inside[p] = 1;
        w.slice0[p] = k0;
        w.slice1[p] = k1;
        if (with_grad) {
            w.d_t0[p] = -(1.0 - fk) * Eigen::Vector2d(b0.dx / sx, b0.dy / sy);
            w.d_t1[p] = -fk * Eigen::Vector2d(b1.dx / sx, b1.dy / sy);
        }
    }
    return w;
}

AlignLoss alignment_loss(const SliceTranslations& trans, const Volume3D& sax, const LabelMask& sax_mask,
                         const std::vector<LaxReference>& views, double nmi_scale, const ParzenOptions& parzen)
{
    const Volume3D lv = indicator(sax_mask, label::lv_pool);
    AlignLoss out;
    out.grad.assign(trans.size(), Eigen::Vector2d::Zero());
    const auto scatter = [&](const StackWarp& w, std::size_t p, double dl_dv) {
        out.grad[w.slice0[p]] += dl_dv * w.d_t0[p];
        out.grad[w.slice1[p]] += dl_dv * w.d_t1[p];
    };

    for (const auto& view : views) {
        const Volume3D& lax = *view.image;
        const LabelMask& lax_mask = *view.mask;
        const StackWarp wi = warp_stack_to_lax(sax, trans, lax.geom);
        const StackWarp wl = warp_stack_to_lax(lv, trans, lax.geom);

        std::vector<std::size_t> pix;
        std::vector<double> a, b;
        bool any_myo = false;
        for (std::size_t p = 0; p < lax_mask.size(); ++p) {
            if (lax_mask.data[p] != label::myocardium) {
                continue;
            }
            any_myo = true;
            if (!wi.inside[p]) {
                continue;
            }
            pix.push_back(p);
            a.push_back(lax.data[p]);
            b.push_back(wi.values[p]);
        }
        if (!any_myo) {
            throw ConfigError("align: reference view has an empty MYO mask");
        }
        if (pix.size() < 2) {
            throw DegenerateInputError("align: MYO mask does not overlap the SAX stack");
        }
        AlignViewTerms terms;
        const LossValueGrad c = ncc(a, b);
        const LossValueGrad m = nmi_parzen(a, b, parzen);
        terms.ncc = c.value;
        terms.nmi = m.value;
        for (std::size_t q = 0; q < pix.size(); ++q) {
            scatter(wi, pix[q], -c.grad_b[q] - nmi_scale * m.grad_b[q]);
        }

        std::vector<double> warped(lax_mask.size()), ref(lax_mask.size());
        for (std::size_t p = 0; p < lax_mask.size(); ++p) {
            warped[p] = wl.values[p];
            ref[p] = lax_mask.data[p] == label::lv_pool ? 1.0 : 0.0;
        }
        const LossValueGrad d = soft_dice(warped, ref);
        terms.dice = d.value;
        for (std::size_t p = 0; p < lax_mask.size(); ++p) {
            if (wl.inside[p]) {
                scatter(wl, p, -d.grad_a[p]);
            }
        }
        out.total += -terms.ncc - nmi_scale * terms.nmi + (1.0 - terms.dice);
        out.views.push_back(terms);
    }
    return out;
}

AlignResult align_stack(const Volume3D& sax, const LabelMask& sax_mask, const std::vector<LaxReference>& views,
                        const AlignConfig& cfg)
{
    cfg.validate();
    AlignResult result;
    result.translations = SliceTranslations::zeros(sax.geom.dims[2]);
    auto& t = result.translations;

    double scale = cfg.nmi_scale;
    if (cfg.nmi_scale_mode == NmiScaleMode::Auto) {
        // Balance image terms at the starting point, then freeze the scale.
        const AlignLoss probe = alignment_loss(t, sax, sax_mask, views, 1.0, cfg.parzen);
        double ncc_mag = 0.0, nmi_mag = 0.0;
        for (const auto& v : probe.views) {
            ncc_mag += std::abs(v.ncc);
            nmi_mag += std::abs(v.nmi);
        }
        scale = ncc_mag / (nmi_mag + 1e-12);
    }
    result.nmi_scale = scale;

    FlatAdam adam(2 * t.shifts.size());
    std::vector<double> flat(2 * t.shifts.size()), grad(flat.size());
    for (int it = 0; it < cfg.iterations; ++it) {
        const AlignLoss loss = alignment_loss(t, sax, sax_mask, views, scale, cfg.parzen);
        if (!std::isfinite(loss.total)) {
            throw NumericalError("align: non-finite loss at iteration " + std::to_string(it));
        }
        result.loss_trace.push_back(loss.total);
        for (std::size_t s = 0; s < t.shifts.size(); ++s) {
            flat[2 * s] = t.shifts[s][0];
            flat[2 * s + 1] = t.shifts[s][1];
            grad[2 * s] = loss.grad[s][0];
            grad[2 * s + 1] = loss.grad[s][1];
        }
        try {
            adam.step(flat, grad, cfg.lr);
        } catch (const NumericalError&) {
            throw NumericalError("align: non-finite gradient at iteration " + std::to_string(it));
        }
        for (std::size_t s = 0; s < t.shifts.size(); ++s) {
            Eigen::Vector2d v(flat[2 * s], flat[2 * s + 1]);
            const double norm = v.norm();
            if (norm > cfg.max_shift) {
                v *= cfg.max_shift / norm;
            }
            t.shifts[s] = v;
        }
    }
    return result;
}

AlignResult align_stack(const ViewSet& views, const AlignConfig& cfg)
{
    const int ed = views.sax.ed_index;
    return align_stack(views.sax.images[ed], views.sax.masks[ed], reference_views(views), cfg);
}

Volume3D apply_translations(const Volume3D& sax, const SliceTranslations& trans)
{
    const auto& g = sax.geom;
    if (trans.size() != g.dims[2]) {
        throw DataError("apply_translations: one translation per slice is required");
    }
    Volume3D out(g, 0.0f);
    for (int k = 0; k < g.dims[2]; ++k) {
        const double ox = trans.shifts[k][0] / g.spacing[0];
        const double oy = trans.shifts[k][1] / g.spacing[1];
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const Bilinear b = bilinear(sax, k, i - ox, j - oy);
                out.at(i, j, k) = b.inside ? static_cast<float>(b.value) : 0.0f;
            }
        }
    }
    return out;
}

LabelMask apply_translations(const LabelMask& sax, const SliceTranslations& trans)
{
    const auto& g = sax.geom;
    if (trans.size() != g.dims[2]) {
        throw DataError("apply_translations: one translation per slice is required");
    }
    LabelMask out(g, label::background);
    for (int k = 0; k < g.dims[2]; ++k) {
        const double ox = trans.shifts[k][0] / g.spacing[0];
        const double oy = trans.shifts[k][1] / g.spacing[1];
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const int si = static_cast<int>(std::lround(i - ox));
                const int sj = static_cast<int>(std::lround(j - oy));
                if (g.contains(si, sj, k)) {
                    out.at(i, j, k) = sax.at(si, sj, k);
                }
            }
        }
    }
    return out;
}

void write_shifts_csv(const SliceTranslations& trans, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << "slice_index,tx_mm,ty_mm\n";
    char buf[96];
    for (int s = 0; s < trans.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", s, trans.shifts[s][0], trans.shifts[s][1]);
        out << buf;
    }
}

SliceTranslations read_shifts_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::string line;
    std::getline(in, line);
    if (line.rfind("slice_index,tx_mm,ty_mm", 0) != 0) {
        throw ParseError("slice_index", "unexpected shifts header");
    }
    SliceTranslations t;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
            throw ParseError("tx_mm", "malformed shifts row");
        }
        if (std::stoi(a) != t.size()) {
            throw ParseError("slice_index", "rows must be consecutive from 0");
        }
        t.shifts.emplace_back(std::stod(b), std::stod(c));
    }
    return t;
}

} // namespace inrstrain
