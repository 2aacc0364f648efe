#include "inrstrain/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <string>

#include "inrstrain/adam.hpp"
#include "inrstrain/distance_transform.hpp"
#include "inrstrain/errors.hpp"
#include "inrstrain/losses.hpp"
#include "inrstrain/random.hpp"

namespace inrstrain {

std::string to_string(JacobianMode mode)
{
    switch (mode) {
    case JacobianMode::Weighted: return "weighted";
    case JacobianMode::Uniform: return "uniform";
    case JacobianMode::Off: return "off";
    }
    return "weighted";
}

JacobianMode jacobian_mode_from_string(const std::string& s)
{
    if (s == "weighted") return JacobianMode::Weighted;
    if (s == "uniform") return JacobianMode::Uniform;
    if (s == "off") return JacobianMode::Off;
    throw ConfigError("unknown jacobian mode '" + s + "' (expected weighted, uniform or off)");
}

void RegConfig::validate() const
{
    if (iterations < 1 || chain_iterations < 0) {
        throw ConfigError("register: iterations must be >= 1");
    }
    if (batch_sax < 1 || batch_4ch < 1) {
        throw ConfigError("register: batch sizes must be >= 1");
    }
    if (alpha_fg < 0.0 || alpha_bg < 0.0 || alpha_uniform < 0.0) {
        throw ConfigError("register: regularization weights must be >= 0");
    }
    if (!(lr > 0.0)) {
        throw ConfigError("register: learning rate must be > 0");
    }
    if (roi_dilation < 0) {
        throw ConfigError("register: roi dilation must be >= 0");
    }
    if (network.hidden_width < 1 || network.hidden_layers < 1 || !(network.omega0 > 0.0)) {
        throw ConfigError("register: invalid network shape");
    }
}

double RegConfig::weight_fg() const
{
    switch (jac_mode) {
    case JacobianMode::Weighted: return alpha_fg;
    case JacobianMode::Uniform: return alpha_uniform;
    case JacobianMode::Off: return 0.0;
    }
    return 0.0;
}

double RegConfig::weight_bg() const
{
    switch (jac_mode) {
    case JacobianMode::Weighted: return alpha_bg;
    case JacobianMode::Uniform: return alpha_uniform;
    case JacobianMode::Off: return 0.0;
    }
    return 0.0;
}

double weighted_total(const LossTerms& t, double w_fg, double w_bg)
{
    return t.ncc_sax + t.ncc_4ch + w_fg * t.jfg_sax + w_bg * t.jbg_sax + w_fg * t.jfg_4ch + w_bg * t.jbg_4ch;
}

SamplingDomain SamplingDomain::build(const LabelMask& mask, int dilation, bool rv_band_foreground)
{
    SamplingDomain d;
    d.geom = mask.geom;
    const auto& g = mask.geom;
    Index3 lo{g.dims[0], g.dims[1], g.dims[2]};
    Index3 hi{-1, -1, -1};
    for (std::size_t n = 0; n < mask.size(); ++n) {
        if (mask.data[n] != label::myocardium) {
            continue;
        }
        const Index3 ijk = g.unravel(n);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], ijk[a]);
            hi[a] = std::max(hi[a], ijk[a]);
        }
    }
    if (hi[0] < 0) {
        throw ConfigError("register: the fixed mask has no MYO voxels");
    }
    for (int a = 0; a < 3; ++a) {
        d.lo[a] = std::max(0, lo[a] - dilation);
        d.hi[a] = std::min(g.dims[a] - 1, hi[a] + dilation);
    }
    d.foreground.assign(mask.size(), 0);
    for (std::size_t n = 0; n < mask.size(); ++n) {
        d.foreground[n] = mask.data[n] == label::myocardium ? 1 : 0;
    }
    if (rv_band_foreground) {
        std::vector<std::uint8_t> rv(mask.size());
        for (std::size_t n = 0; n < mask.size(); ++n) {
            rv[n] = mask.data[n] == label::rv_pool ? 1 : 0;
        }
        const auto band = region_boundary(g, rv, true);
        for (std::size_t n = 0; n < mask.size(); ++n) {
            d.foreground[n] |= band[n];
        }
    }
    return d;
}

CoordBatch sample_coords(const SamplingDomain& domain, const NormalizedFrame& frame, int n, std::mt19937_64& rng)
{
    if (n < 1) {
        throw ConfigError("sample_coords: n must be >= 1");
    }
    CoordBatch b;
    b.world.resize(3, n);
    b.canonical.resize(3, n);
    b.fg.resize(n);
    const auto& g = domain.geom;
    for (int s = 0; s < n; ++s) {
        Vec3 idx;
        for (int a = 0; a < 3; ++a) {
            const double span = domain.hi[a] - domain.lo[a];
            idx[a] = domain.lo[a] + span * unit_uniform(rng);
        }
        const Vec3 p = voxel_to_world(g, idx);
        b.world.col(s) = p;
        b.canonical.col(s) = frame.to_canonical(p);
        const int i = static_cast<int>(std::lround(idx[0]));
        const int j = static_cast<int>(std::lround(idx[1]));
        const int k = static_cast<int>(std::lround(idx[2]));
        b.fg[s] = domain.foreground[g.linear_index(i, j, k)];
    }
    return b;
}

CoordBatch sample_coords(const LabelMask& mask, const NormalizedFrame& frame, int n, std::mt19937_64& rng,
                         int dilation)
{
    return sample_coords(SamplingDomain::build(mask, dilation, false), frame, n, rng);
}

Mat3 canonical_to_mm_gradient(const Mat3& jac_canonical, const NormalizedFrame& frame)
{
    // u_mm = H u(q), q = H^-1 (x - c)  =>  du_mm/dx = H J H^-1
    return frame.half_extent.asDiagonal() * jac_canonical * frame.half_extent.cwiseInverse().asDiagonal();
}

namespace {

Mat3 cofactor(const Mat3& F)
{
    Mat3 c;
    c(0, 0) = F(1, 1) * F(2, 2) - F(1, 2) * F(2, 1);
    c(0, 1) = F(1, 2) * F(2, 0) - F(1, 0) * F(2, 2);
    c(0, 2) = F(1, 0) * F(2, 1) - F(1, 1) * F(2, 0);
    c(1, 0) = F(0, 2) * F(2, 1) - F(0, 1) * F(2, 2);
    c(1, 1) = F(0, 0) * F(2, 2) - F(0, 2) * F(2, 0);
    c(1, 2) = F(0, 1) * F(2, 0) - F(0, 0) * F(2, 1);
    c(2, 0) = F(0, 1) * F(1, 2) - F(0, 2) * F(1, 1);
    c(2, 1) = F(0, 2) * F(1, 0) - F(0, 0) * F(1, 2);
    c(2, 2) = F(0, 0) * F(1, 1) - F(0, 1) * F(1, 0);
    return c;
}

Mat3 unpack_jacobian(const Matrix9X& jac, Eigen::Index n)
{
    Mat3 j;
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k < 3; ++k)
            j(a, k) = jac(3 * a + k, n);
    return j;
}

struct ViewTerms {
    double ncc = 0.0;
    double jfg = 0.0;
    double jbg = 0.0;
};

// One view's NCC and Jacobian terms; accumulates parameter gradients.
ViewTerms view_terms(const SirenEvaluator& ev, const Volume3D& fixed, const Volume3D& moving, bool plane,
                     const NormalizedFrame& frame, const CoordBatch& batch, double w_fg, double w_bg,
                     bool with_grad, MlpGrads& grads, const char* view_name)
{
    const Eigen::Index n = batch.size();
    const bool with_jac = w_fg > 0.0 || w_bg > 0.0;
    Matrix3X u;
    Matrix9X jac;
    if (with_jac) {
        ev.forward_jacobian(batch.canonical, u, jac);
    } else {
        u = ev.forward(batch.canonical);
    }
    const Vec3& half = frame.half_extent;

    std::vector<double> f, m;
    std::vector<Eigen::Index> used;
    std::vector<Vec3> grad_world;
    f.reserve(n);
    m.reserve(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const Vec3 x = batch.world.col(s);
        const Vec3 phi = x + half.cwiseProduct(u.col(s));
        const SampleGrad ms = plane ? sample_plane_projected(moving, phi) : sample_trilinear_grad(moving, phi);
        if (!ms.inside) {
            continue;
        }
        const SampleGrad fs = plane ? sample_plane_projected(fixed, x) : sample_trilinear_grad(fixed, x);
        if (!fs.inside) {
            continue;
        }
        f.push_back(fs.value);
        m.push_back(ms.value);
        used.push_back(s);
        grad_world.push_back(ms.grad_world);
    }
    if (used.size() < 2) {
        throw DegenerateInputError(std::string("register: all ") + view_name
                                   + " samples fall outside the moving image");
    }
    ViewTerms t;
    const LossValueGrad c = ncc(f, m);
    t.ncc = 1.0 - c.value;

    Matrix3X gu;
    Matrix9X gj;
    if (with_grad) {
        gu = Matrix3X::Zero(3, n);
        for (std::size_t q = 0; q < used.size(); ++q) {
            gu.col(used[q]) = -c.grad_b[q] * half.cwiseProduct(grad_world[q]);
        }
    }
    if (with_jac) {
        std::size_t n_fg = 0;
        for (auto v : batch.fg) n_fg += v;
        const std::size_t n_bg = static_cast<std::size_t>(n) - n_fg;
        if (with_grad) {
            gj = Matrix9X::Zero(9, n);
        }
        double sum_fg = 0.0, sum_bg = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
            const Mat3 F = Mat3::Identity() + canonical_to_mm_gradient(unpack_jacobian(jac, s), frame);
            const double det = F.determinant();
            const double dev = std::abs(det - 1.0);
            const bool fg = batch.fg[s] != 0;
            (fg ? sum_fg : sum_bg) += dev;
            if (with_grad) {
                const double count = static_cast<double>(fg ? n_fg : n_bg);
                const double weight = (fg ? w_fg : w_bg) / count;
                const double sign = det > 1.0 ? 1.0 : (det < 1.0 ? -1.0 : 0.0);
                const Mat3 d_f = weight * sign * cofactor(F);
                for (int a = 0; a < 3; ++a)
                    for (int k = 0; k < 3; ++k)
                        gj(3 * a + k, s) = d_f(a, k) * half[a] / half[k];
            }
        }
        t.jfg = n_fg ? sum_fg / static_cast<double>(n_fg) : 0.0;
        t.jbg = n_bg ? sum_bg / static_cast<double>(n_bg) : 0.0;
    }
    if (with_grad) {
        ev.backward(batch.canonical, gu, with_jac ? gj : Matrix9X(9, 0), grads);
    }
    return t;
}

} // namespace

LossEval registration_loss(const MlpParams& params, const RegistrationPair& pair, const NormalizedFrame& frame,
                  const CoordBatch& sax_batch, const CoordBatch* ch4_batch, const RegConfig& cfg, bool with_grad)
{
    if (sax_batch.size() < 1) {
        throw ConfigError("register: empty SAX batch");
    }
    const double w_fg = cfg.weight_fg();
    const double w_bg = cfg.weight_bg();
    SirenEvaluator ev(params);
    LossEval out;
    out.grads = MlpGrads::zeros_like(params);
    const ViewTerms sax = view_terms(ev, *pair.fixed_sax, *pair.moving_sax, false, frame, sax_batch, w_fg, w_bg,
                                     with_grad, out.grads, "SAX");
    out.terms.ncc_sax = sax.ncc;
    out.terms.jfg_sax = sax.jfg;
    out.terms.jbg_sax = sax.jbg;
    if (cfg.use_4ch && ch4_batch) {
        if (!pair.has_4ch()) {
            throw ConfigError("register: 4CH terms requested without 4CH frames");
        }
        const ViewTerms ch4 = view_terms(ev, *pair.fixed_4ch, *pair.moving_4ch, true, frame, *ch4_batch, w_fg, w_bg,
                                         with_grad, out.grads, "4CH");
        out.terms.ncc_4ch = ch4.ncc;
        out.terms.jfg_4ch = ch4.jfg;
        out.terms.jbg_4ch = ch4.jbg;
    }
    out.terms.total = weighted_total(out.terms, w_fg, w_bg);
    return out;
}

namespace {

const char* first_nonfinite_term(const LossTerms& t)
{
    if (!std::isfinite(t.ncc_sax)) return "ncc_sax";
    if (!std::isfinite(t.ncc_4ch)) return "ncc_4ch";
    if (!std::isfinite(t.jfg_sax)) return "jfg_sax";
    if (!std::isfinite(t.jbg_sax)) return "jbg_sax";
    if (!std::isfinite(t.jfg_4ch)) return "jfg_4ch";
    if (!std::isfinite(t.jbg_4ch)) return "jbg_4ch";
    if (!std::isfinite(t.total)) return "total";
    return nullptr;
}

} // namespace

RegResult register_pair(const RegistrationPair& pair, const NormalizedFrame& frame, const RegConfig& cfg,
                        const MlpParams* init, std::uint64_t pair_seed, int iterations)
{
    cfg.validate();
    frame.validate();
    if (!pair.fixed_sax || !pair.moving_sax || !pair.fixed_sax_mask) {
        throw ConfigError("register: SAX fixed/moving frames and fixed mask are required");
    }
    if (!pair.fixed_sax->geom.same_as(pair.fixed_sax_mask->geom)) {
        throw DataError("register: fixed SAX image and mask geometries differ");
    }
    const bool use_4ch = cfg.use_4ch && pair.has_4ch();
    const auto start = std::chrono::steady_clock::now();

    RegResult result;
    result.config = cfg;
    result.seed = pair_seed;
    result.frame = frame;
    result.params = init ? *init : init_siren(pair_seed, cfg.network);
    if (init) {
        const MlpParams shape = init_siren(0, cfg.network);
        if (init->sizes != shape.sizes) {
            throw ConfigError("register: initial parameters do not match the configured network shape");
        }
    }
    const SamplingDomain sax_domain = SamplingDomain::build(*pair.fixed_sax_mask, cfg.roi_dilation,
                                                            cfg.rv_band_foreground);
    result.roi_lo = sax_domain.lo;
    result.roi_hi = sax_domain.hi;
    SamplingDomain ch4_domain;
    if (use_4ch) {
        ch4_domain = SamplingDomain::build(*pair.fixed_4ch_mask, cfg.roi_dilation, cfg.rv_band_foreground);
    }

    AdamState adam = AdamState::for_params(result.params);
    const int n_iter = iterations > 0 ? iterations : cfg.iterations;
    result.trace.reserve(n_iter);
    for (int it = 0; it < n_iter; ++it) {
        std::mt19937_64 rng(mix_seed(pair_seed, static_cast<std::uint64_t>(it)));
        const CoordBatch sax_batch = sample_coords(sax_domain, frame, cfg.batch_sax, rng);
        CoordBatch ch4_batch;
        if (use_4ch) {
            ch4_batch = sample_coords(ch4_domain, frame, cfg.batch_4ch, rng);
        }
        LossEval eval;
        try {
            eval = registration_loss(result.params, pair, frame, sax_batch, use_4ch ? &ch4_batch : nullptr, cfg);
        } catch (const DegenerateInputError& e) {
            throw DegenerateInputError(std::string(e.what()) + " (iteration " + std::to_string(it) + ")");
        }
        if (const char* bad = first_nonfinite_term(eval.terms)) {
            throw NumericalError("register: non-finite loss term '" + std::string(bad) + "' at iteration "
                                 + std::to_string(it));
        }
        result.trace.push_back(eval.terms);
        try {
            adam_step(result.params, eval.grads, adam, cfg.lr);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at iteration " + std::to_string(it));
        }
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::vector<RegResult> register_sequence(const ViewSet& views, const RegConfig& cfg)
{
    cfg.validate();
    const CineSeries& sax = views.sax;
    if (sax.time_points() < 2) {
        throw DataError("register: a sequence needs at least two time points");
    }
    const int ed = sax.ed_index;
    const NormalizedFrame frame = NormalizedFrame::from_geometry(sax.geometry());
    const bool use_4ch = cfg.use_4ch && views.ch4.time_points() == sax.time_points();

    std::vector<int> moving;
    for (int t = 0; t < sax.time_points(); ++t) {
        if (t != ed) {
            moving.push_back(t);
        }
    }
    const auto make_pair = [&](int t) {
        RegistrationPair p;
        p.fixed_sax = &sax.images[ed];
        p.moving_sax = &sax.images[t];
        p.fixed_sax_mask = &sax.masks[ed];
        if (use_4ch) {
            p.fixed_4ch = &views.ch4.images[ed];
            p.moving_4ch = &views.ch4.images[t];
            p.fixed_4ch_mask = &views.ch4.masks[ed];
        }
        return p;
    };
    const auto run = [&](std::size_t i, const MlpParams* init, int iterations) {
        const int t = moving[i];
        RegResult r = register_pair(make_pair(t), frame, cfg, init, cfg.seed + i, iterations);
        r.moving_index = t;
        r.fixed_index = ed;
        return r;
    };

    std::vector<RegResult> results;
    results.reserve(moving.size());
    if (cfg.warm_start) {
        for (std::size_t i = 0; i < moving.size(); ++i) {
            if (i == 0) {
                results.push_back(run(i, nullptr, cfg.iterations));
            } else {
                const MlpParams init = results.back().params;
                results.push_back(run(i, &init, cfg.chain_iterations > 0 ? cfg.chain_iterations : cfg.iterations));
            }
        }
        return results;
    }
    // Cold starts are independent; run up to `jobs` at a time.
    const std::size_t jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
    for (std::size_t i = 0; i < moving.size(); i += jobs) {
        std::vector<std::future<RegResult>> pending;
        for (std::size_t j = i; j < std::min(moving.size(), i + jobs); ++j) {
            pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                         [&, j] { return run(j, nullptr, cfg.iterations); }));
        }
        for (auto& f : pending) {
            results.push_back(f.get());
        }
    }
    return results;
}

DisplacementModel::DisplacementModel(const MlpParams& params, const NormalizedFrame& frame)
    : eval_(params), frame_(frame)
{
}

std::vector<Vec3> DisplacementModel::map(const std::vector<Vec3>& x_mm) const
{
    Matrix3X q(3, static_cast<Eigen::Index>(x_mm.size()));
    for (std::size_t n = 0; n < x_mm.size(); ++n) {
        q.col(n) = frame_.to_canonical(x_mm[n]);
    }
    const Matrix3X u = eval_.forward(q);
    std::vector<Vec3> out(x_mm.size());
    for (std::size_t n = 0; n < x_mm.size(); ++n) {
        out[n] = x_mm[n] + frame_.half_extent.cwiseProduct(u.col(n));
    }
    return out;
}

std::vector<Mat3> DisplacementModel::deformation_gradients(const std::vector<Vec3>& x_mm) const
{
    Matrix3X q(3, static_cast<Eigen::Index>(x_mm.size()));
    for (std::size_t n = 0; n < x_mm.size(); ++n) {
        q.col(n) = frame_.to_canonical(x_mm[n]);
    }
    Matrix3X u;
    Matrix9X jac;
    eval_.forward_jacobian(q, u, jac);
    std::vector<Mat3> out(x_mm.size());
    for (std::size_t n = 0; n < x_mm.size(); ++n) {
        out[n] = Mat3::Identity() + canonical_to_mm_gradient(unpack_jacobian(jac, static_cast<Eigen::Index>(n)), frame_);
    }
    return out;
}

std::vector<Vec3> voxel_centers(const Geometry& g)
{
    std::vector<Vec3> out(g.voxel_count());
    for (std::size_t n = 0; n < out.size(); ++n) {
        const Index3 ijk = g.unravel(n);
        out[n] = voxel_to_world(g, Vec3(ijk[0], ijk[1], ijk[2]));
    }
    return out;
}

Volume3D warp_volume(const Volume3D& moving, const MlpParams& params, const NormalizedFrame& frame,
                     const Geometry& fixed_grid)
{
    const auto phi = DisplacementModel(params, frame).map(voxel_centers(fixed_grid));
    Volume3D out(fixed_grid, 0.0f);
    for (std::size_t n = 0; n < phi.size(); ++n) {
        out.data[n] = static_cast<float>(sample_trilinear(moving, phi[n]).value);
    }
    return out;
}

Volume3D warp_volume(const Volume3D& moving, const MlpParams& params, const NormalizedFrame& frame)
{
    return warp_volume(moving, params, frame, moving.geom);
}

LabelMask warp_mask(const LabelMask& moving, const MlpParams& params, const NormalizedFrame& frame,
                    const Geometry& fixed_grid)
{
    const auto phi = DisplacementModel(params, frame).map(voxel_centers(fixed_grid));
    LabelMask out(fixed_grid, label::background);
    for (std::size_t n = 0; n < phi.size(); ++n) {
        out.data[n] = sample_nearest(moving, phi[n]);
    }
    return out;
}

LabelMask warp_mask(const LabelMask& moving, const MlpParams& params, const NormalizedFrame& frame)
{
    return warp_mask(moving, params, frame, moving.geom);
}

LabelMask warp_plane_mask(const LabelMask& moving_plane, const MlpParams& params, const NormalizedFrame& frame)
{
    const auto phi = DisplacementModel(params, frame).map(voxel_centers(moving_plane.geom));
    LabelMask out(moving_plane.geom, label::background);
    for (std::size_t n = 0; n < phi.size(); ++n) {
        out.data[n] = sample_nearest_projected(moving_plane, phi[n]);
    }
    return out;
}

std::vector<double> jac_det_grid(const MlpParams& params, const NormalizedFrame& frame,
                                 const std::vector<Vec3>& points_mm)
{
    const auto F = DisplacementModel(params, frame).deformation_gradients(points_mm);
    std::vector<double> det(F.size());
    for (std::size_t n = 0; n < F.size(); ++n) {
        det[n] = F[n].determinant();
    }
    return det;
}

} // namespace inrstrain
