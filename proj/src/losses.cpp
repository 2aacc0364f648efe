#include "inrstrain/losses.hpp"

#include <algorithm>
#include <cmath>

#include "inrstrain/errors.hpp"

namespace inrstrain {

namespace {

void check_sizes(std::size_t a, std::size_t b, std::size_t min_size, const char* what)
{
    if (a != b) {
        throw DataError(std::string(what) + ": input lengths differ");
    }
    if (a < min_size) {
        throw DataError(std::string(what) + ": too few samples");
    }
}

constexpr double probability_floor = 1e-12;

} // namespace

LossValueGrad ncc(std::span<const double> a, std::span<const double> b)
{
    check_sizes(a.size(), b.size(), 2, "ncc");
    const std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    // A variance this small relative to the data is a constant signal.
    const auto scale = [&](std::span<const double> x, double m) {
        double s = 0.0;
        for (double v : x) s = std::max(s, std::abs(v));
        return std::max(s, std::abs(m)) + 1.0;
    };
    const double floor_a = 1e-24 * n * scale(a, mean_a) * scale(a, mean_a);
    const double floor_b = 1e-24 * n * scale(b, mean_b) * scale(b, mean_b);
    if (saa <= floor_a && sbb <= floor_b) {
        throw DegenerateInputError("ncc: both inputs are constant");
    }
    saa = std::max(saa, floor_a);
    sbb = std::max(sbb, floor_b);

    LossValueGrad out;
    const double denom = std::sqrt(saa * sbb);
    out.value = sab / denom;
    out.grad_a.resize(n);
    out.grad_b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        out.grad_a[i] = db / denom - out.value * da / saa;
        out.grad_b[i] = da / denom - out.value * db / sbb;
    }
    return out;
}

LossValueGrad nmi_parzen(std::span<const double> a, std::span<const double> b, const ParzenOptions& opt)
{
    check_sizes(a.size(), b.size(), 2, "nmi");
    if (opt.bins < 2 || !(opt.sigma > 0.0)) {
        throw ConfigError("nmi: bins must be >= 2 and sigma > 0");
    }
    const std::size_t n = a.size();
    const int nb = opt.bins;
    double lo = a[0], hi = a[0];
    for (std::size_t i = 0; i < n; ++i) {
        lo = std::min({lo, a[i], b[i]});
        hi = std::max({hi, a[i], b[i]});
    }
    if (!(hi - lo > 1e-12 * (std::abs(hi) + std::abs(lo) + 1.0))) {
        throw DegenerateInputError("nmi: joint distribution is constant");
    }
    const double range = hi - lo;
    const double width = 1.0 / (nb - 1);
    const double kernel_sd = opt.sigma * width;
    const double inv_var = 1.0 / (kernel_sd * kernel_sd);

    // Normalized kernel weights per sample and their derivative w.r.t.
    // the raw (unscaled) sample value.
    const auto weights = [&](std::span<const double> x, std::vector<double>& w, std::vector<double>& dw) {
        w.assign(n * nb, 0.0);
        dw.assign(n * nb, 0.0);
        std::vector<double> dlog(nb);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = (x[i] - lo) / range;
            double* wi = &w[i * nb];
            double total = 0.0;
            for (int j = 0; j < nb; ++j) {
                const double d = v - j * width;
                wi[j] = std::exp(-0.5 * d * d * inv_var);
                dlog[j] = -d * inv_var;
                total += wi[j];
            }
            double mean_dlog = 0.0;
            for (int j = 0; j < nb; ++j) {
                wi[j] /= total;
                mean_dlog += wi[j] * dlog[j];
            }
            for (int j = 0; j < nb; ++j) {
                dw[i * nb + j] = wi[j] * (dlog[j] - mean_dlog) / range;
            }
        }
    };
    std::vector<double> wa, dwa, wb, dwb;
    weights(a, wa, dwa);
    weights(b, wb, dwb);

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> joint(nb * nb, 0.0), pa(nb, 0.0), pb(nb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < nb; ++j) {
            const double waj = wa[i * nb + j];
            pa[j] += waj;
            pb[j] += wb[i * nb + j];
            for (int k = 0; k < nb; ++k) {
                joint[j * nb + k] += waj * wb[i * nb + k];
            }
        }
    }
    for (auto& p : joint) p *= inv_n;
    for (auto& p : pa) p *= inv_n;
    for (auto& p : pb) p *= inv_n;

    const auto entropy = [](const std::vector<double>& p, std::vector<double>& dh) {
        double h = 0.0;
        dh.resize(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double lp = std::log(std::max(p[j], probability_floor));
            h -= p[j] * lp;
            dh[j] = -(lp + 1.0);
        }
        return h;
    };
    std::vector<double> dha, dhb, dhab;
    const double ha = entropy(pa, dha);
    const double hb = entropy(pb, dhb);
    const double hab = entropy(joint, dhab);
    if (!(hab > 0.0)) {
        throw DegenerateInputError("nmi: joint entropy is zero");
    }

    LossValueGrad out;
    out.value = (ha + hb) / hab;
    // dNMI = (dHa + dHb)/Hab - NMI dHab/Hab
    const double inv_hab = 1.0 / hab;
    out.grad_a.assign(n, 0.0);
    out.grad_b.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double ga = 0.0, gb = 0.0;
        for (int j = 0; j < nb; ++j) {
            ga += dha[j] * dwa[i * nb + j] * inv_hab;
            gb += dhb[j] * dwb[i * nb + j] * inv_hab;
            double row_a = 0.0; // sum_k dHab/dp(j,k) wb_k
            double col_b = 0.0; // sum_k dHab/dp(k,j) wa_k
            for (int k = 0; k < nb; ++k) {
                row_a += dhab[j * nb + k] * wb[i * nb + k];
                col_b += dhab[k * nb + j] * wa[i * nb + k];
            }
            ga -= out.value * inv_hab * row_a * dwa[i * nb + j];
            gb -= out.value * inv_hab * col_b * dwb[i * nb + j];
        }
        out.grad_a[i] = ga * inv_n;
        out.grad_b[i] = gb * inv_n;
    }
    // The rescale depends on the samples holding the joint min and max.
    double d_lo = 0.0, d_hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d_lo += out.grad_a[i] * (a[i] - hi) + out.grad_b[i] * (b[i] - hi);
        d_hi -= out.grad_a[i] * (a[i] - lo) + out.grad_b[i] * (b[i] - lo);
    }
    const auto credit = [&](double target, double amount) {
        for (std::size_t i = 0; i < n; ++i) {
            if (a[i] == target) {
                out.grad_a[i] += amount / range;
                return;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (b[i] == target) {
                out.grad_b[i] += amount / range;
                return;
            }
        }
    };
    credit(lo, d_lo);
    credit(hi, d_hi);
    return out;
}

LossValueGrad soft_dice(std::span<const double> p, std::span<const double> q)
{
    check_sizes(p.size(), q.size(), 1, "soft_dice");
    double inter = 0.0, sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] * q[i];
        sp += p[i];
        sq += q[i];
    }
    const double denom = sp + sq + dice_epsilon;
    LossValueGrad out;
    out.value = 2.0 * inter / denom;
    out.grad_a.resize(p.size());
    out.grad_b.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        out.grad_a[i] = (2.0 * q[i] - out.value) / denom;
        out.grad_b[i] = (2.0 * p[i] - out.value) / denom;
    }
    return out;
}

} // namespace inrstrain
