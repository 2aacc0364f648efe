#include "inrstrain/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "inrstrain/errors.hpp"
#include "inrstrain/random.hpp"

namespace inrstrain {

namespace {

constexpr double edge_width = 0.75; // mm, intensity transition between tissue classes
constexpr int wave_count = 24;
constexpr double rv_gap = 2.0;
constexpr double rv_thickness = 8.0;
constexpr double rv_half_angle = 1.2;

double smooth(double d)
{
    return 0.5 * (1.0 + std::tanh(d / edge_width));
}

double quintic(double u)
{
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double quintic_derivative(double u)
{
    if (u <= 0.0 || u >= 1.0) {
        return 0.0;
    }
    return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

} // namespace

void PhantomConfig::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1 || !(spacing[a] > 0.0)) {
            throw ConfigError("phantom: dims and spacing must be positive");
        }
    }
    if (!(r_in > 0.0 && r_in < r_out && r_out < taper_radius)) {
        throw ConfigError("phantom: need 0 < r_in < r_out < taper_radius");
    }
    if (phases < 3) {
        throw ConfigError("phantom: need at least 3 phases");
    }
    const double narrow = 1.0 - apex_taper;
    if (apex_taper < 0.0 || apex_taper >= 1.0) {
        throw ConfigError("phantom: apex_taper must lie in [0, 1)");
    }
    if (!(c_max >= 0.0 && c_max < r_in * r_in * narrow * narrow)) {
        throw ConfigError("phantom: c_max must be below the squared endocardial radius");
    }
    if (!(lax_spacing > 0.0) || noise_sigma < 0.0) {
        throw ConfigError("phantom: invalid long-axis spacing or noise level");
    }
}

nlohmann::json to_json(const PhantomConfig& cfg)
{
    return {{"dims", {cfg.dims[0], cfg.dims[1], cfg.dims[2]}},
            {"spacing", {cfg.spacing[0], cfg.spacing[1], cfg.spacing[2]}},
            {"r_in", cfg.r_in},
            {"r_out", cfg.r_out},
            {"c_max", cfg.c_max},
            {"taper_radius", cfg.taper_radius},
            {"phases", cfg.phases},
            {"texture_seed", cfg.texture_seed},
            {"rv_enable", cfg.rv_enable},
            {"apex_taper", cfg.apex_taper},
            {"lax_spacing", cfg.lax_spacing},
            {"with_ch2", cfg.with_ch2},
            {"noise_sigma", cfg.noise_sigma}};
}

PhantomConfig phantom_config_from_json(const nlohmann::json& j)
{
    PhantomConfig c;
    try {
        if (j.contains("dims")) {
            for (int a = 0; a < 3; ++a) c.dims[a] = j.at("dims").at(a).get<int>();
        }
        if (j.contains("spacing")) {
            for (int a = 0; a < 3; ++a) c.spacing[a] = j.at("spacing").at(a).get<double>();
        }
        c.r_in = j.value("r_in", c.r_in);
        c.r_out = j.value("r_out", c.r_out);
        c.c_max = j.value("c_max", c.c_max);
        c.taper_radius = j.value("taper_radius", c.taper_radius);
        c.phases = j.value("phases", c.phases);
        c.texture_seed = j.value("texture_seed", c.texture_seed);
        c.rv_enable = j.value("rv_enable", c.rv_enable);
        c.apex_taper = j.value("apex_taper", c.apex_taper);
        c.lax_spacing = j.value("lax_spacing", c.lax_spacing);
        c.with_ch2 = j.value("with_ch2", c.with_ch2);
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("phantom", e.what());
    }
    return c;
}

double GroundTruth::blend(double R) const
{
    return 1.0 - quintic((R - config.r_out) / (config.taper_radius - config.r_out));
}

double GroundTruth::blend_derivative(double R) const
{
    const double w = config.taper_radius - config.r_out;
    return -quintic_derivative((R - config.r_out) / w) / w;
}

double GroundTruth::lv_scale(double z) const
{
    if (config.apex_taper == 0.0 || config.dims[2] < 2) {
        return 1.0;
    }
    const double z0 = -0.5 * (config.dims[2] - 1) * config.spacing[2];
    const double length = (config.dims[2] - 1) * config.spacing[2];
    const double u = std::clamp((z - z0) / length, 0.0, 1.0);
    return 1.0 - config.apex_taper * u;
}

Vec3 GroundTruth::to_spatial(const Vec3& X, int t) const
{
    const double R = std::hypot(X[0], X[1]);
    const double r2 = R * R - c.at(t) * blend(R);
    if (R == 0.0 || r2 <= 0.0) {
        return Vec3(0.0, 0.0, X[2]);
    }
    const double s = std::sqrt(r2) / R;
    return Vec3(X[0] * s, X[1] * s, X[2]);
}

Vec3 GroundTruth::to_material(const Vec3& x, int t) const
{
    const double r = std::hypot(x[0], x[1]);
    const double ct = c.at(t);
    if (ct == 0.0) {
        return x;
    }
    // Solve R^2 - c b(R) = r^2; the left side is increasing in R.
    double lo = r, hi = std::sqrt(r * r + ct);
    double R = hi;
    if (R > config.r_out) {
        for (int it = 0; it < 100; ++it) {
            const double g = R * R - ct * blend(R) - r * r;
            if (std::abs(g) < 1e-13 * std::max(1.0, r * r)) {
                break;
            }
            if (g > 0.0) hi = R; else lo = R;
            const double dg = 2.0 * R - ct * blend_derivative(R);
            double next = R - g / dg;
            if (!(next > lo && next < hi)) {
                next = 0.5 * (lo + hi);
            }
            R = next;
        }
    }
    if (r == 0.0) {
        return Vec3(R, 0.0, x[2]);
    }
    const double s = R / r;
    return Vec3(x[0] * s, x[1] * s, x[2]);
}

Mat3 GroundTruth::deformation_gradient(const Vec3& X, int t) const
{
    const double R = std::hypot(X[0], X[1]);
    Mat3 F = Mat3::Identity();
    const double ct = c.at(t);
    if (R == 0.0 || ct == 0.0) {
        return F;
    }
    const double r = std::sqrt(std::max(R * R - ct * blend(R), 0.0));
    if (r == 0.0) {
        throw NumericalError("phantom: deformation gradient undefined at the collapsed axis");
    }
    const double drdR = (2.0 * R - ct * blend_derivative(R)) / (2.0 * r);
    const Eigen::Vector2d e(X[0] / R, X[1] / R);
    const Eigen::Matrix2d P = e * e.transpose();
    const Eigen::Matrix2d inplane = (r / R) * (Eigen::Matrix2d::Identity() - P) + drdR * P;
    F.topLeftCorner<2, 2>() = inplane;
    return F;
}

std::uint8_t GroundTruth::material_label(const Vec3& X) const
{
    const double R = std::hypot(X[0], X[1]);
    const double f = lv_scale(X[2]);
    if (R < config.r_in * f) {
        return label::lv_pool;
    }
    if (R < config.r_out * f) {
        return label::myocardium;
    }
    if (config.rv_enable) {
        const double inner = config.r_out + rv_gap;
        const double angle = std::abs(std::atan2(X[1], -X[0]));
        if (R >= inner && R < inner + rv_thickness && angle < rv_half_angle) {
            return label::rv_pool;
        }
    }
    return label::background;
}

double GroundTruth::material_intensity(const Vec3& X) const
{
    const double R = std::hypot(X[0], X[1]);
    const double f = lv_scale(X[2]);
    double tex = 0.0;
    for (const auto& w : waves_) {
        tex += std::cos(w.k.dot(X) + w.phase);
    }
    tex *= std::sqrt(2.0 / wave_count);
    const double pool = smooth(config.r_in * f - R);
    const double inside_epi = smooth(config.r_out * f - R);
    const double myo = inside_epi - pool;
    double rv = 0.0;
    if (config.rv_enable) {
        const double inner = config.r_out + rv_gap;
        const double angle = std::abs(std::atan2(X[1], -X[0]));
        rv = smooth(R - inner) * smooth(inner + rv_thickness - R) * smooth((rv_half_angle - angle) * R);
    }
    const double bg = std::max(0.0, 1.0 - inside_epi - rv);
    return pool * 1.0 + rv * 1.0 + myo * (0.4 + 0.15 * tex) + bg * (0.7 + 0.2 * tex);
}

LabelMask GroundTruth::label_volume(const Geometry& g, int t) const
{
    LabelMask m(g);
    for (std::size_t n = 0; n < m.size(); ++n) {
        const auto idx = g.unravel(n);
        const Vec3 x = voxel_to_world(g, Vec3(idx[0], idx[1], idx[2]));
        m.data[n] = material_label(to_material(x, t));
    }
    return m;
}

Volume3D GroundTruth::intensity_volume(const Geometry& g, int t) const
{
    Volume3D v(g);
    for (std::size_t n = 0; n < v.size(); ++n) {
        const auto idx = g.unravel(n);
        const Vec3 x = voxel_to_world(g, Vec3(idx[0], idx[1], idx[2]));
        v.data[n] = static_cast<float>(material_intensity(to_material(x, t)));
    }
    return v;
}

void GroundTruth::build_texture()
{
    std::mt19937_64 rng(mix_seed(config.texture_seed, 0x7e47));
    waves_.clear();
    const double kz_max = 2.0 * std::numbers::pi / 32.0;
    for (int w = 0; w < wave_count; ++w) {
        const double lambda = 8.0 + 12.0 * unit_uniform(rng);
        const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
        const double kz = kz_max * (2.0 * unit_uniform(rng) - 1.0);
        const double phase = 2.0 * std::numbers::pi * unit_uniform(rng);
        const double k = 2.0 * std::numbers::pi / lambda;
        waves_.push_back({Vec3(k * std::cos(theta), k * std::sin(theta), kz), phase});
    }
}

nlohmann::json GroundTruth::to_json() const
{
    nlohmann::json j;
    j["config"] = inrstrain::to_json(config);
    j["c"] = c;
    j["ed_index"] = ed_index;
    j["es_index"] = es_index;
    if (shifts) {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& v : shifts->shifts) {
            s.push_back({v[0], v[1]});
        }
        j["shifts"] = s;
    }
    return j;
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j)
{
    GroundTruth gt;
    try {
        gt.config = phantom_config_from_json(j.at("config"));
        gt.c = j.at("c").get<std::vector<double>>();
        gt.ed_index = j.at("ed_index").get<int>();
        gt.es_index = j.at("es_index").get<int>();
        if (j.contains("shifts")) {
            SliceTranslations s;
            for (const auto& v : j.at("shifts")) {
                s.shifts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
            }
            gt.shifts = s;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("ground_truth", e.what());
    }
    gt.build_texture();
    return gt;
}

std::pair<double, double> analytic_strain(const GroundTruth& gt, int t, const Vec3& X)
{
    const double R = std::hypot(X[0], X[1]);
    const double f = gt.lv_scale(X[2]);
    const double tol = 1e-9;
    if (R < gt.config.r_in * f - tol || R > gt.config.r_out * f + tol) {
        throw DataError("analytic_strain: point lies outside the LV wall");
    }
    const double r2 = R * R - gt.c.at(t);
    const double q = R * R / r2;
    return {0.5 * (q - 1.0), 0.5 * (1.0 / q - 1.0)};
}

Geometry phantom_sax_geometry(const PhantomConfig& cfg)
{
    Geometry g;
    g.dims = cfg.dims;
    g.spacing = cfg.spacing;
    for (int a = 0; a < 3; ++a) {
        g.origin[a] = -0.5 * (cfg.dims[a] - 1) * cfg.spacing[a];
    }
    return g;
}

namespace {

Geometry lax_plane(const PhantomConfig& cfg, const Vec3& in_plane, const Vec3& normal, int in_plane_axis)
{
    const Geometry sax = phantom_sax_geometry(cfg);
    const double width = (cfg.dims[in_plane_axis] - 1) * cfg.spacing[in_plane_axis];
    const double height = (cfg.dims[2] - 1) * cfg.spacing[2];
    Geometry g;
    g.dims = {static_cast<int>(std::floor(width / cfg.lax_spacing + 1e-9)) + 1,
              static_cast<int>(std::floor(height / cfg.lax_spacing + 1e-9)) + 1, 1};
    g.spacing = Vec3(cfg.lax_spacing, cfg.lax_spacing, cfg.lax_spacing);
    g.direction.col(0) = in_plane;
    g.direction.col(1) = Vec3::UnitZ();
    g.direction.col(2) = normal;
    g.origin = in_plane * (-0.5 * (g.dims[0] - 1) * cfg.lax_spacing) + Vec3::UnitZ() * sax.origin[2];
    return g;
}

void add_noise(Volume3D& v, double sigma, std::uint64_t seed)
{
    if (sigma <= 0.0) {
        return;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& x : v.data) {
        x = static_cast<float>(x + normal(rng));
    }
}

} // namespace

Geometry phantom_ch4_geometry(const PhantomConfig& cfg)
{
    return lax_plane(cfg, Vec3::UnitX(), -Vec3::UnitY(), 0);
}

Geometry phantom_ch2_geometry(const PhantomConfig& cfg)
{
    return lax_plane(cfg, Vec3::UnitY(), Vec3::UnitX(), 1);
}

Phantom make_phantom(const PhantomConfig& cfg)
{
    cfg.validate();
    Phantom ph;
    GroundTruth& gt = ph.truth;
    gt.config = cfg;
    gt.build_texture();
    const int T = cfg.phases;
    gt.c.resize(T);
    for (int t = 0; t < T; ++t) {
        const double s = std::sin(std::numbers::pi * t / (T - 1));
        gt.c[t] = cfg.c_max * s * s;
    }
    gt.c[0] = 0.0;
    gt.c[T - 1] = 0.0;
    gt.ed_index = T - 1;
    gt.es_index = static_cast<int>(std::max_element(gt.c.begin(), gt.c.end()) - gt.c.begin());

    const Geometry sax = phantom_sax_geometry(cfg);
    const Geometry ch4 = phantom_ch4_geometry(cfg);
    const Geometry ch2 = phantom_ch2_geometry(cfg);
    auto make_series = [&](const Geometry& g, std::uint64_t view) {
        CineSeries s;
        for (int t = 0; t < T; ++t) {
            s.images.push_back(gt.intensity_volume(g, t));
            add_noise(s.images.back(), cfg.noise_sigma, mix_seed(cfg.texture_seed, view * 4096 + t));
            s.masks.push_back(gt.label_volume(g, t));
        }
        s.ed_index = gt.ed_index;
        s.es_index = gt.es_index;
        return s;
    };
    ph.views.sax = make_series(sax, 1);
    ph.views.ch4 = make_series(ch4, 2);
    if (cfg.with_ch2) {
        ph.views.ch2 = make_series(ch2, 3);
    }
    return ph;
}

std::pair<CineSeries, SliceTranslations> inject_misalignment(const CineSeries& sax, std::uint64_t seed,
                                                            double max_shift)
{
    if (max_shift < 0.0) {
        throw ConfigError("inject_misalignment: max_shift must be >= 0");
    }
    const int nz = sax.geometry().dims[2];
    auto shifts = SliceTranslations::zeros(nz);
    if (max_shift == 0.0) {
        return {sax, shifts};
    }
    std::mt19937_64 rng(mix_seed(seed, 0x5a11));
    for (auto& s : shifts.shifts) {
        s[0] = max_shift * (2.0 * unit_uniform(rng) - 1.0);
        s[1] = max_shift * (2.0 * unit_uniform(rng) - 1.0);
    }
    CineSeries out = sax;
    for (int t = 0; t < sax.time_points(); ++t) {
        out.images[t] = apply_translations(sax.images[t], shifts);
        out.masks[t] = apply_translations(sax.masks[t], shifts);
    }
    return {out, shifts};
}

namespace {

template <typename T>
ImageGrid<T> decimate_grid(const ImageGrid<T>& v, int k)
{
    if (k < 1) {
        throw ConfigError("decimate: factor must be >= 1");
    }
    const int nz = v.geom.dims[2];
    const int kept = (nz - 1) / k + 1;
    if (kept < 2) {
        throw DataError("decimate: fewer than 2 slices would remain");
    }
    Geometry g = v.geom;
    g.dims[2] = kept;
    g.spacing[2] *= k;
    ImageGrid<T> out(g);
    const std::size_t plane = static_cast<std::size_t>(g.dims[0]) * g.dims[1];
    for (int s = 0; s < kept; ++s) {
        std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(plane * s * k), plane,
                    out.data.begin() + static_cast<std::ptrdiff_t>(plane * s));
    }
    return out;
}

} // namespace

Volume3D decimate(const Volume3D& vol, int k)
{
    return decimate_grid(vol, k);
}

LabelMask decimate(const LabelMask& mask, int k)
{
    return decimate_grid(mask, k);
}

} // namespace inrstrain
