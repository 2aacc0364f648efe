#include "inrstrain/volume.hpp"

#include <algorithm>
#include <cmath>

#include "inrstrain/errors.hpp"

namespace inrstrain {

namespace {

constexpr double lattice_tol = 1e-9;

struct AxisCell {
    int i0 = 0;
    int i1 = 0;
    double frac = 0.0;
};

// Splits a continuous index into the bracketing lattice pair. Returns
// false when the index is outside [0, n-1].
bool axis_cell(double idx, int n, AxisCell& cell)
{
    if (!(idx >= -lattice_tol && idx <= (n - 1) + lattice_tol)) {
        return false;
    }
    if (n == 1) {
        cell = {0, 0, 0.0};
        return true;
    }
    const double clamped = std::clamp(idx, 0.0, static_cast<double>(n - 1));
    int i0 = static_cast<int>(std::floor(clamped));
    i0 = std::min(i0, n - 2);
    cell = {i0, i0 + 1, clamped - i0};
    return true;
}

} // namespace

void validate(const Volume3D& vol)
{
    vol.geom.validate();
    if (vol.data.size() != vol.geom.voxel_count()) {
        throw DataError("volume: data length does not match dims");
    }
    for (float v : vol.data) {
        if (!std::isfinite(v)) {
            throw DataError("volume: non-finite intensity");
        }
    }
}

void validate(const LabelMask& mask)
{
    mask.geom.validate();
    if (mask.data.size() != mask.geom.voxel_count()) {
        throw DataError("mask: data length does not match dims");
    }
    for (auto v : mask.data) {
        if (v > label::max_code) {
            throw DataError("mask: label value outside {0,1,2,3}");
        }
    }
}

Volume3D indicator(const LabelMask& mask, std::uint8_t code)
{
    Volume3D out(mask.geom, 0.0f);
    for (std::size_t n = 0; n < mask.size(); ++n) {
        out.data[n] = mask.data[n] == code ? 1.0f : 0.0f;
    }
    return out;
}

SampleGrad sample_trilinear_index(const Volume3D& vol, const Vec3& idx)
{
    const auto& d = vol.geom.dims;
    AxisCell cx, cy, cz;
    if (!axis_cell(idx[0], d[0], cx) || !axis_cell(idx[1], d[1], cy) || !axis_cell(idx[2], d[2], cz)) {
        return {};
    }
    const double wx[2] = {1.0 - cx.frac, cx.frac};
    const double wy[2] = {1.0 - cy.frac, cy.frac};
    const double wz[2] = {1.0 - cz.frac, cz.frac};
    const int ix[2] = {cx.i0, cx.i1};
    const int iy[2] = {cy.i0, cy.i1};
    const int iz[2] = {cz.i0, cz.i1};

    double c[2][2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e)
                c[a][b][e] = vol.at(ix[a], iy[b], iz[e]);

    SampleGrad s;
    s.inside = true;
    Vec3 g_idx = Vec3::Zero();
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            for (int e = 0; e < 2; ++e) {
                const double v = c[a][b][e];
                s.value += wx[a] * wy[b] * wz[e] * v;
                const double sx = a ? 1.0 : -1.0;
                const double sy = b ? 1.0 : -1.0;
                const double sz = e ? 1.0 : -1.0;
                g_idx[0] += sx * wy[b] * wz[e] * v;
                g_idx[1] += wx[a] * sy * wz[e] * v;
                g_idx[2] += wx[a] * wy[b] * sz * v;
            }
        }
    }
    // Degenerate axes carry no derivative.
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 1) {
            g_idx[a] = 0.0;
        }
    }
    s.grad_world = world_to_voxel_jacobian(vol.geom).transpose() * g_idx;
    return s;
}

SampleGrad sample_trilinear_grad(const Volume3D& vol, const Vec3& p)
{
    return sample_trilinear_index(vol, world_to_voxel(vol.geom, p));
}

Sample sample_trilinear(const Volume3D& vol, const Vec3& p)
{
    const Vec3 idx = world_to_voxel(vol.geom, p);
    const auto& d = vol.geom.dims;
    AxisCell cx, cy, cz;
    if (!axis_cell(idx[0], d[0], cx) || !axis_cell(idx[1], d[1], cy) || !axis_cell(idx[2], d[2], cz)) {
        return {};
    }
    const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    const auto v = [&](int i, int j, int k) { return static_cast<double>(vol.at(i, j, k)); };
    const double c00 = lerp(v(cx.i0, cy.i0, cz.i0), v(cx.i1, cy.i0, cz.i0), cx.frac);
    const double c10 = lerp(v(cx.i0, cy.i1, cz.i0), v(cx.i1, cy.i1, cz.i0), cx.frac);
    const double c01 = lerp(v(cx.i0, cy.i0, cz.i1), v(cx.i1, cy.i0, cz.i1), cx.frac);
    const double c11 = lerp(v(cx.i0, cy.i1, cz.i1), v(cx.i1, cy.i1, cz.i1), cx.frac);
    const double c0 = lerp(c00, c10, cy.frac);
    const double c1 = lerp(c01, c11, cy.frac);
    return {lerp(c0, c1, cz.frac), true};
}

SampleGrad sample_plane_projected(const Volume3D& plane, const Vec3& p)
{
    Vec3 idx = world_to_voxel(plane.geom, p);
    idx[2] = 0.0;
    return sample_trilinear_index(plane, idx);
}

std::uint8_t sample_nearest(const LabelMask& mask, const Vec3& p)
{
    const Vec3 idx = world_to_voxel(mask.geom, p);
    const int i = static_cast<int>(std::lround(idx[0]));
    const int j = static_cast<int>(std::lround(idx[1]));
    const int k = static_cast<int>(std::lround(idx[2]));
    if (!mask.geom.contains(i, j, k)) {
        return label::background;
    }
    return mask.at(i, j, k);
}

std::uint8_t sample_nearest_projected(const LabelMask& plane, const Vec3& p)
{
    const Vec3 idx = world_to_voxel(plane.geom, p);
    const int i = static_cast<int>(std::lround(idx[0]));
    const int j = static_cast<int>(std::lround(idx[1]));
    if (!plane.geom.contains(i, j, 0)) {
        return label::background;
    }
    return plane.at(i, j, 0);
}

PlaneImage resample_to_plane(const Volume3D& vol, const Geometry& plane)
{
    PlaneImage out{Volume3D(plane, 0.0f), std::vector<std::uint8_t>(plane.voxel_count(), 0)};
    for (int k = 0; k < plane.dims[2]; ++k) {
        for (int j = 0; j < plane.dims[1]; ++j) {
            for (int i = 0; i < plane.dims[0]; ++i) {
                const Vec3 p = voxel_to_world(plane, Vec3(i, j, k));
                const Sample s = sample_trilinear(vol, p);
                const std::size_t n = plane.linear_index(i, j, k);
                out.image.data[n] = static_cast<float>(s.value);
                out.inside[n] = s.inside ? 1 : 0;
            }
        }
    }
    return out;
}

LabelMask resample_nearest(const LabelMask& mask, const Geometry& target)
{
    LabelMask out(target, label::background);
    for (int k = 0; k < target.dims[2]; ++k)
        for (int j = 0; j < target.dims[1]; ++j)
            for (int i = 0; i < target.dims[0]; ++i)
                out.at(i, j, k) = sample_nearest(mask, voxel_to_world(target, Vec3(i, j, k)));
    return out;
}

void CineSeries::validate() const
{
    if (images.size() < 2) {
        throw DataError("cine series: at least two time points are required");
    }
    if (masks.size() != images.size()) {
        throw DataError("cine series: one mask per time point is required");
    }
    const int n = time_points();
    if (ed_index < 0 || ed_index >= n || es_index < 0 || es_index >= n) {
        throw DataError("cine series: ed/es index out of range");
    }
    const Geometry& g = images.front().geom;
    for (std::size_t t = 0; t < images.size(); ++t) {
        inrstrain::validate(images[t]);
        inrstrain::validate(masks[t]);
        if (!images[t].geom.same_as(g) || !masks[t].geom.same_as(g)) {
            throw DataError("cine series: frames do not share one geometry");
        }
    }
}

void ViewSet::validate() const
{
    sax.validate();
    ch4.validate();
    const auto check = [&](const CineSeries& s) {
        if (s.time_points() != sax.time_points() || s.ed_index != sax.ed_index || s.es_index != sax.es_index) {
            throw DataError("view set: views disagree on time points or ed/es indices");
        }
    };
    check(ch4);
    if (ch2) {
        ch2->validate();
        check(*ch2);
    }
}

} // namespace inrstrain
