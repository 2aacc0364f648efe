#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "support.hpp"

#include "inrstrain/errors.hpp"
#include "inrstrain/losses.hpp"

using namespace inrstrain;
using namespace testing;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        sab += a[i] * b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
    }
    return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

// Soft joint histogram written out term by term.
double nmi_oracle(const std::vector<double>& a, const std::vector<double>& b, int bins, double sigma)
{
    const double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
    const double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
    const double sd = sigma / (bins - 1);
    auto soft = [&](double x) {
        std::vector<double> w(bins);
        double total = 0;
        for (int j = 0; j < bins; ++j) {
            const double d = (x - lo) / (hi - lo) - static_cast<double>(j) / (bins - 1);
            w[j] = std::exp(-d * d / (2 * sd * sd));
            total += w[j];
        }
        for (auto& v : w) v /= total;
        return w;
    };
    std::vector<double> P(bins * bins, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto wa = soft(a[i]), wb = soft(b[i]);
        for (int j = 0; j < bins; ++j)
            for (int k = 0; k < bins; ++k) P[j * bins + k] += wa[j] * wb[k] / a.size();
    }
    double ha = 0, hb = 0, hab = 0;
    for (int j = 0; j < bins; ++j) {
        double pa = 0, pb = 0;
        for (int k = 0; k < bins; ++k) {
            pa += P[j * bins + k];
            pb += P[k * bins + j];
            const double p = P[j * bins + k];
            hab -= p * std::log(std::max(p, 1e-12));
        }
        ha -= pa * std::log(std::max(pa, 1e-12));
        hb -= pb * std::log(std::max(pb, 1e-12));
    }
    return (ha + hb) / hab;
}

std::vector<double> normal_samples(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return v;
}

} // namespace

TEST_SUITE("losses")
{
    TEST_CASE("ncc examples")
    {
        const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{-1, -2, -3, -4};
        CHECK(ncc(a, a).value == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(ncc(a, c).value == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(ncc(a, b).value == doctest::Approx(1.0).epsilon(1e-14));
        const std::vector<double> k{2, 2, 2, 2};
        CHECK_THROWS_AS(ncc(k, k), DegenerateInputError);
        CHECK_THROWS_AS(ncc(std::vector<double>{1.0}, std::vector<double>{2.0}), DataError);
    }

    TEST_CASE("ncc value and gradients against oracles")
    {
        std::mt19937_64 rng(1);
        const auto a = normal_samples(rng, 16);
        auto b = normal_samples(rng, 16);
        for (int i = 0; i < 16; ++i) b[i] += 0.5 * a[i];
        const auto r = ncc(a, b);
        CHECK(std::abs(r.value - pearson(a, b)) < 1e-10);
        const double h = 1e-4;
        for (int i = 0; i < 16; ++i) {
            auto ap = a, am = a, bp = b, bm = b;
            ap[i] += h;
            am[i] -= h;
            bp[i] += h;
            bm[i] -= h;
            const double fa = (pearson(ap, b) - pearson(am, b)) / (2 * h);
            const double fb = (pearson(a, bp) - pearson(a, bm)) / (2 * h);
            CHECK(rel_err(r.grad_a[i], fa, 1e-6) < 1e-6);
            CHECK(rel_err(r.grad_b[i], fb, 1e-6) < 1e-6);
        }
    }

    TEST_CASE("ncc is invariant to positive affine rescaling")
    {
        std::mt19937_64 rng(2);
        const auto a = normal_samples(rng, 50), b = normal_samples(rng, 50);
        std::vector<double> s(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) s[i] = 3.7 * a[i] - 12.0;
        CHECK(std::abs(ncc(s, b).value - ncc(a, b).value) < 1e-10);
    }

    TEST_CASE("nmi of identical two-cluster signals approaches 2")
    {
        std::vector<double> a;
        for (int i = 0; i < 40; ++i) a.push_back(i % 2 ? 1.0 : 0.0);
        ParzenOptions o;
        o.bins = 2;
        o.sigma = 0.05;
        CHECK(nmi_parzen(a, a, o).value == doctest::Approx(2.0).epsilon(1e-6));
    }

    TEST_CASE("nmi separates dependent from independent samples")
    {
        std::mt19937_64 rng(3);
        std::vector<double> a(2000);
        for (auto& x : a) x = unit_uniform(rng);
        auto perm = a;
        std::shuffle(perm.begin(), perm.end(), rng);
        const double same = nmi_parzen(a, a).value;
        const double indep = nmi_parzen(a, perm).value;
        CHECK(same - indep > 0.3);
        CHECK(indep < 1.1);
    }

    TEST_CASE("nmi matches a hand-built soft histogram")
    {
        const std::vector<double> a{0.0, 0.2, 0.9, 1.0, 0.4, 0.7, 0.1, 0.6};
        const std::vector<double> b{0.3, 0.1, 0.8, 0.9, 0.5, 0.2, 0.0, 1.0};
        ParzenOptions o;
        o.bins = 2;
        o.sigma = 1.0;
        CHECK(std::abs(nmi_parzen(a, b, o).value - nmi_oracle(a, b, 2, 1.0)) < 1e-8);
        CHECK(std::abs(nmi_parzen(a, b).value - nmi_oracle(a, b, 32, 1.0)) < 1e-8);
    }

    TEST_CASE("nmi(a,a) dominates nmi(a,b)")
    {
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 10; ++trial) {
            const auto a = normal_samples(rng, 200);
            auto b = normal_samples(rng, 200);
            for (std::size_t i = 0; i < b.size(); ++i) b[i] += trial * 0.2 * a[i];
            CHECK(nmi_parzen(a, a).value >= nmi_parzen(a, b).value);
        }
    }

    TEST_CASE("nmi gradients match finite differences")
    {
        std::mt19937_64 rng(5);
        auto a = normal_samples(rng, 30), b = normal_samples(rng, 30);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.7 * a[i];
        const auto r = nmi_parzen(a, b);
        const double h = 1e-6;
        int checked = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            auto ap = a, am = a, bp = b, bm = b;
            ap[i] += h;
            am[i] -= h;
            bp[i] += h;
            bm[i] -= h;
            const double fa = (nmi_parzen(ap, b).value - nmi_parzen(am, b).value) / (2 * h);
            const double fb = (nmi_parzen(a, bp).value - nmi_parzen(a, bm).value) / (2 * h);
            CHECK(rel_err(r.grad_a[i], fa, 1e-4) < 1e-5);
            CHECK(rel_err(r.grad_b[i], fb, 1e-4) < 1e-5);
            ++checked;
        }
        CHECK(checked == 30);
    }

    TEST_CASE("nmi rejects constant input")
    {
        const std::vector<double> k(5, 1.0);
        CHECK_THROWS_AS(nmi_parzen(k, k), DegenerateInputError);
    }

    TEST_CASE("soft dice examples")
    {
        const std::vector<double> p{1, 1, 1, 1, 0, 0, 0, 0};
        const std::vector<double> q{0, 0, 1, 1, 1, 1, 0, 0};
        const std::vector<double> d{0, 0, 0, 0, 1, 1, 1, 1};
        CHECK(soft_dice(p, p).value == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(soft_dice(p, d).value == 0.0);
        CHECK(soft_dice(p, q).value == doctest::Approx(0.5).epsilon(1e-7));
        const std::vector<double> z(4, 0.0);
        CHECK(soft_dice(z, z).value == 0.0);
    }

    TEST_CASE("soft dice symmetry and gradients")
    {
        std::mt19937_64 rng(6);
        std::vector<double> p(20), q(20);
        for (auto& v : p) v = unit_uniform(rng);
        for (auto& v : q) v = unit_uniform(rng);
        const auto r = soft_dice(p, q);
        CHECK(r.value == soft_dice(q, p).value);
        const double h = 1e-4;
        for (int i = 0; i < 20; ++i) {
            auto pp = p, pm = p, qp = q, qm = q;
            pp[i] += h;
            pm[i] -= h;
            qp[i] += h;
            qm[i] -= h;
            CHECK(rel_err(r.grad_a[i], (soft_dice(pp, q).value - soft_dice(pm, q).value) / (2 * h), 1e-6) < 1e-5);
            CHECK(rel_err(r.grad_b[i], (soft_dice(p, qp).value - soft_dice(p, qm).value) / (2 * h), 1e-6) < 1e-5);
        }
    }
}
