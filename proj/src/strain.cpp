#include "inrstrain/strain.hpp"

#include <algorithm>
#include <cmath>

#include "inrstrain/distance_transform.hpp"
#include "inrstrain/errors.hpp"

namespace inrstrain {

std::string to_string(Structure s)
{
    return s == Structure::LV ? "LV" : "RV";
}

std::string to_string(StrainComponent c)
{
    return c == StrainComponent::Radial ? "radial" : "circumferential";
}

std::string to_string(Segment s)
{
    switch (s) {
    case Segment::Basal: return "basal";
    case Segment::Mid: return "mid";
    case Segment::Apical: return "apical";
    case Segment::Global: return "global";
    }
    return "global";
}

Mat3 deformation_gradient(const MlpParams& params, const NormalizedFrame& frame, const Vec3& x_mm)
{
    return DisplacementModel(params, frame).deformation_gradients({x_mm}).front();
}

Mat3 green_lagrange(const Mat3& F)
{
    return 0.5 * (F.transpose() * F - Mat3::Identity());
}

Mat3 engineering_strain(const Mat3& F)
{
    return 0.5 * (F + F.transpose()) - Mat3::Identity();
}

Mat3 strain_tensor(const Mat3& F, StrainTensor kind)
{
    return kind == StrainTensor::GreenLagrange ? green_lagrange(F) : engineering_strain(F);
}

DirectionField lv_polar_dirs(const LabelMask& mask)
{
    const auto& g = mask.geom;
    const Vec3 normal = g.direction.col(2);
    DirectionField out;
    for (int k = 0; k < g.dims[2]; ++k) {
        Vec3 centroid = Vec3::Zero();
        int pool = 0;
        bool has_myo = false;
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto v = mask.at(i, j, k);
                if (v == label::lv_pool) {
                    centroid += Vec3(i, j, k);
                    ++pool;
                } else if (v == label::myocardium) {
                    has_myo = true;
                }
            }
        }
        if (!has_myo) {
            continue;
        }
        if (pool == 0) {
            ++out.skipped_slices;
            continue;
        }
        const Vec3 c = voxel_to_world(g, centroid / pool);
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                if (mask.at(i, j, k) != label::myocardium) {
                    continue;
                }
                const Vec3 p = voxel_to_world(g, Vec3(i, j, k));
                Vec3 r = p - c;
                r -= r.dot(normal) * normal;
                const double len = r.norm();
                if (len < 1e-12) {
                    continue;
                }
                const Vec3 e_r = r / len;
                out.voxels.push_back(g.linear_index(i, j, k));
                out.points.push_back(p);
                out.slice.push_back(k);
                out.e_r.push_back(e_r);
                out.e_c.push_back(normal.cross(e_r));
            }
        }
    }
    return out;
}

std::vector<double> signed_distance_in_plane(const Geometry& g, const std::vector<std::uint8_t>& region)
{
    std::vector<std::uint8_t> outside(region.size());
    for (std::size_t n = 0; n < region.size(); ++n) {
        outside[n] = region[n] ? 0 : 1;
    }
    const auto to_inside = squared_distance_transform(g, region, true);
    const auto to_outside = squared_distance_transform(g, outside, true);
    std::vector<double> sdf(region.size());
    for (std::size_t n = 0; n < region.size(); ++n) {
        sdf[n] = region[n] ? -std::sqrt(to_outside[n]) : std::sqrt(to_inside[n]);
        if (!std::isfinite(sdf[n])) {
            sdf[n] = 0.0;
        }
    }
    return sdf;
}

namespace {

// Separable in-plane Gaussian blur of one slice with clamped borders.
void blur_slice(const Geometry& g, std::vector<double>& img, int k, double sigma)
{
    if (sigma <= 0.0) {
        return;
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int r = -radius; r <= radius; ++r) {
        kernel[r + radius] = std::exp(-0.5 * r * r / (sigma * sigma));
        total += kernel[r + radius];
    }
    for (auto& w : kernel) w /= total;
    const int nx = g.dims[0], ny = g.dims[1];
    std::vector<double> tmp(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double acc = 0.0;
            for (int r = -radius; r <= radius; ++r) {
                acc += kernel[r + radius] * img[g.linear_index(std::clamp(i + r, 0, nx - 1), j, k)];
            }
            tmp[static_cast<std::size_t>(j) * nx + i] = acc;
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double acc = 0.0;
            for (int r = -radius; r <= radius; ++r) {
                acc += kernel[r + radius] * tmp[static_cast<std::size_t>(std::clamp(j + r, 0, ny - 1)) * nx + i];
            }
            img[g.linear_index(i, j, k)] = acc;
        }
    }
}

} // namespace

DirectionField rv_dirs(const LabelMask& mask, double smoothing_sigma)
{
    const auto& g = mask.geom;
    std::vector<std::uint8_t> rv(mask.size());
    bool any = false;
    for (std::size_t n = 0; n < mask.size(); ++n) {
        rv[n] = mask.data[n] == label::rv_pool ? 1 : 0;
        any = any || rv[n];
    }
    if (!any) {
        throw DataError("rv_dirs: the mask has no RV blood pool");
    }
    auto sdf = signed_distance_in_plane(g, rv);
    const auto band = region_boundary(g, rv, true);
    const Vec3 normal = g.direction.col(2);
    DirectionField out;
    for (int k = 0; k < g.dims[2]; ++k) {
        blur_slice(g, sdf, k, smoothing_sigma);
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const std::size_t n = g.linear_index(i, j, k);
                if (!band[n]) {
                    continue;
                }
                const auto at = [&](int a, int b) {
                    return sdf[g.linear_index(std::clamp(a, 0, g.dims[0] - 1), std::clamp(b, 0, g.dims[1] - 1), k)];
                };
                const double gx = (at(i + 1, j) - at(i - 1, j)) / (2.0 * g.spacing[0]);
                const double gy = (at(i, j + 1) - at(i, j - 1)) / (2.0 * g.spacing[1]);
                Vec3 grad = g.direction.col(0) * gx + g.direction.col(1) * gy;
                const double len = grad.norm();
                if (len < 1e-12) {
                    continue;
                }
                const Vec3 e_r = grad / len;
                out.voxels.push_back(n);
                out.points.push_back(voxel_to_world(g, Vec3(i, j, k)));
                out.slice.push_back(k);
                out.e_r.push_back(e_r);
                out.e_c.push_back(normal.cross(e_r));
            }
        }
    }
    return out;
}

std::vector<std::optional<Segment>> segment_slices(const LabelMask& mask)
{
    const auto& g = mask.geom;
    std::vector<int> myo_slices;
    std::vector<long> lv_area(g.dims[2], 0);
    for (int k = 0; k < g.dims[2]; ++k) {
        bool has_myo = false;
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto v = mask.at(i, j, k);
                has_myo = has_myo || v == label::myocardium;
                lv_area[k] += v == label::lv_pool;
            }
        }
        if (has_myo) {
            myo_slices.push_back(k);
        }
    }
    const int n = static_cast<int>(myo_slices.size());
    if (n < 3) {
        throw DataError("segment_slices: MYO present on fewer than 3 slices");
    }
    const int end = n / 3;
    long low_area = 0, high_area = 0;
    for (int s = 0; s < end; ++s) {
        low_area += lv_area[myo_slices[s]];
        high_area += lv_area[myo_slices[n - 1 - s]];
    }
    const bool base_low = low_area >= high_area;
    std::vector<std::optional<Segment>> out(g.dims[2]);
    for (int s = 0; s < n; ++s) {
        Segment seg = Segment::Mid;
        if (s < end) {
            seg = base_low ? Segment::Basal : Segment::Apical;
        } else if (s >= n - end) {
            seg = base_low ? Segment::Apical : Segment::Basal;
        }
        out[myo_slices[s]] = seg;
    }
    return out;
}

std::vector<StrainCurve> strain_curves(int time_points, const GradientProvider& gradients,
                                       const std::vector<StrainField>& fields,
                                       const std::vector<std::optional<Segment>>& segments, StrainTensor tensor)
{
    static constexpr Segment order[] = {Segment::Basal, Segment::Mid, Segment::Apical, Segment::Global};
    static constexpr StrainComponent comps[] = {StrainComponent::Radial, StrainComponent::Circumferential};
    std::vector<StrainCurve> curves;
    for (const auto& sf : fields) {
        const DirectionField& f = *sf.field;
        const std::size_t first = curves.size();
        for (auto c : comps) {
            for (auto s : order) {
                StrainCurve curve;
                curve.structure = sf.structure;
                curve.component = c;
                curve.segment = s;
                curves.push_back(curve);
            }
        }
        for (int t = 0; t < time_points; ++t) {
            const std::vector<Mat3> F = gradients(t, f.points);
            if (F.size() != f.size()) {
                throw DataError("strain: gradient provider returned the wrong number of tensors");
            }
            double sum[2][4] = {};
            long count[4] = {};
            for (std::size_t v = 0; v < f.size(); ++v) {
                const int k = f.slice[v];
                if (k < 0 || k >= static_cast<int>(segments.size()) || !segments[k]) {
                    continue;
                }
                const int seg = static_cast<int>(*segments[k]);
                const Mat3 E = strain_tensor(F[v], tensor);
                const double er = project_strain(E, f.e_r[v]);
                const double ec = project_strain(E, f.e_c[v]);
                sum[0][seg] += er;
                sum[1][seg] += ec;
                sum[0][3] += er;
                sum[1][3] += ec;
                ++count[seg];
                ++count[3];
            }
            for (int c = 0; c < 2; ++c) {
                for (int s = 0; s < 4; ++s) {
                    StrainCurve& curve = curves[first + c * 4 + s];
                    curve.time_indices.push_back(t);
                    curve.values.push_back(count[s] ? sum[c][s] / static_cast<double>(count[s]) : 0.0);
                }
            }
        }
    }
    return curves;
}

std::vector<StrainCurve> strain_curves(const std::vector<RegResult>& results, int time_points,
                                       const std::vector<StrainField>& fields,
                                       const std::vector<std::optional<Segment>>& segments, StrainTensor tensor)
{
    std::vector<const RegResult*> by_time(time_points, nullptr);
    for (const auto& r : results) {
        if (r.moving_index < 0 || r.moving_index >= time_points) {
            throw DataError("strain: registration result has no valid time index");
        }
        by_time[r.moving_index] = &r;
    }
    const GradientProvider provider = [&](int t, const std::vector<Vec3>& pts) {
        if (!by_time[t]) {
            return std::vector<Mat3>(pts.size(), Mat3::Identity());
        }
        return DisplacementModel(by_time[t]->params, by_time[t]->frame).deformation_gradients(pts);
    };
    return strain_curves(time_points, provider, fields, segments, tensor);
}

PeakStrain peak_strain(const StrainCurve& curve)
{
    if (curve.values.empty()) {
        throw DataError("peak_strain: empty curve");
    }
    const bool radial = curve.component == StrainComponent::Radial;
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.values.size(); ++i) {
        if (radial ? curve.values[i] > curve.values[best] : curve.values[i] < curve.values[best]) {
            best = i;
        }
    }
    const int t = curve.time_indices.empty() ? static_cast<int>(best) : curve.time_indices[best];
    return {curve.values[best], t};
}

} // namespace inrstrain
