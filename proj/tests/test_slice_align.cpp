#include <chrono>
#include <fstream>

#include "doctest.h"
#include "support.hpp"

#include "inrstrain/errors.hpp"
#include "inrstrain/slice_align.hpp"

using namespace inrstrain;
using namespace testing;

namespace {

std::vector<LaxReference> references(const ViewSet& v)
{
    std::vector<LaxReference> refs;
    const int ed = v.ch4.ed_index;
    refs.push_back({&v.ch4.images[ed], &v.ch4.masks[ed]});
    if (v.ch2) refs.push_back({&v.ch2->images[ed], &v.ch2->masks[ed]});
    return refs;
}

SliceTranslations random_shifts(std::mt19937_64& rng, int n, double amp)
{
    auto t = SliceTranslations::zeros(n);
    for (auto& s : t.shifts) s = Eigen::Vector2d(uniform(rng, -amp, amp), uniform(rng, -amp, amp));
    return t;
}

} // namespace

TEST_SUITE("slice-align")
{
    TEST_CASE("zero translation is the identity")
    {
        std::mt19937_64 rng(1);
        Geometry g;
        g.dims = {9, 7, 4};
        const auto v = random_volume(rng, g);
        const auto out = apply_translations(v, SliceTranslations::zeros(4));
        CHECK(out.data == v.data);
        CHECK_THROWS_AS(apply_translations(v, SliceTranslations::zeros(3)), DataError);
    }

    TEST_CASE("whole-pixel translation moves content by +t")
    {
        Geometry g;
        g.dims = {10, 10, 2};
        g.spacing = Vec3(2.0, 1.5, 8.0);
        Volume3D v(g, 0.0f);
        LabelMask m(g, 0);
        v.at(3, 4, 1) = 5.0f;
        m.at(3, 4, 1) = label::myocardium;
        auto t = SliceTranslations::zeros(2);
        t.shifts[1] = Eigen::Vector2d(4.0, -3.0); // +2 px in x, -2 px in y
        const auto out = apply_translations(v, t);
        CHECK(out.at(5, 2, 1) == 5.0f);
        CHECK(out.at(3, 4, 1) == 0.0f);
        const auto mo = apply_translations(m, t);
        CHECK(mo.at(5, 2, 1) == label::myocardium);
    }

    TEST_CASE("stack warp gradient matches finite differences")
    {
        const auto ph = make_phantom(small_phantom());
        const auto& sax = ph.views.sax.images[ph.views.sax.ed_index];
        const auto& plane = ph.views.ch4.images[0].geom;
        std::mt19937_64 rng(2);
        auto t = random_shifts(rng, sax.geom.dims[2], 3.0);
        const auto w = warp_stack_to_lax(sax, t, plane);
        const double h = 1e-5;
        int checked = 0;
        for (int s : {1, 4}) {
            for (int axis = 0; axis < 2; ++axis) {
                auto tp = t, tm = t;
                tp.shifts[s][axis] += h;
                tm.shifts[s][axis] -= h;
                const auto wp = warp_stack_to_lax(sax, tp, plane, false);
                const auto wm = warp_stack_to_lax(sax, tm, plane, false);
                for (std::size_t n = 0; n < w.values.size(); n += 7) {
                    if (!w.inside[n] || !wp.inside[n] || !wm.inside[n]) continue;
                    const double fd = (wp.values[n] - wm.values[n]) / (2 * h);
                    double an = 0.0;
                    if (w.slice0[n] == s) an += w.d_t0[n][axis];
                    if (w.slice1[n] == s) an += w.d_t1[n][axis];
                    if (std::abs(fd) < 1e-6 && std::abs(an) < 1e-6) continue;
                    // Bilinear kinks make a few samples disagree; count agreements instead.
                    if (rel_err(an, fd, 1e-3) < 1e-3) ++checked;
                }
            }
        }
        CHECK(checked > 50);
    }

    TEST_CASE("alignment loss gradient matches finite differences")
    {
        const auto ph = make_phantom(small_phantom());
        const auto& v = ph.views;
        const int ed = v.sax.ed_index;
        std::mt19937_64 rng(3);
        const auto t = random_shifts(rng, v.sax.geometry().dims[2], 2.0);
        const auto refs = references(v);
        const auto loss = alignment_loss(t, v.sax.images[ed], v.sax.masks[ed], refs, 0.5);
        CHECK(loss.views.size() == 2);
        CHECK(std::isfinite(loss.total));
        const double h = 1e-4;
        int good = 0, total = 0;
        for (int s = 0; s < t.size(); ++s) {
            for (int axis = 0; axis < 2; ++axis) {
                auto tp = t, tm = t;
                tp.shifts[s][axis] += h;
                tm.shifts[s][axis] -= h;
                const double fd = (alignment_loss(tp, v.sax.images[ed], v.sax.masks[ed], refs, 0.5).total -
                                   alignment_loss(tm, v.sax.images[ed], v.sax.masks[ed], refs, 0.5).total) /
                                  (2 * h);
                ++total;
                if (rel_err(loss.grad[s][axis], fd, 1e-4) < 2e-2) ++good;
            }
        }
        CHECK(good >= total - 1);
    }

    TEST_CASE("misaligned phantom slices are recovered")
    {
        PhantomConfig cfg;
        cfg.phases = 3;
        const auto ph = make_phantom(cfg);
        auto views = ph.views;
        const auto [moved, truth] = inject_misalignment(views.sax, 11, 4.0);
        views.sax = moved;
        AlignConfig ac;
        const auto r = align_stack(views, ac);
        REQUIRE(r.translations.size() == truth.size());
        double before = 0.0, after = 0.0;
        for (int s = 0; s < truth.size(); ++s) {
            before += truth.shifts[s].norm();
            after += (r.translations.shifts[s] + truth.shifts[s]).norm();
        }
        before /= truth.size();
        after /= truth.size();
        MESSAGE("mean residual " << after << " mm (was " << before << ")");
        CHECK(after < 1.0);
        CHECK(r.loss_trace.size() == 2000u);
        CHECK(r.loss_trace.back() < r.loss_trace.front());
        CHECK(r.nmi_scale > 0.0);
    }

    TEST_CASE("alignment is deterministic")
    {
        auto cfg = small_phantom();
        cfg.phases = 3;
        const auto ph = make_phantom(cfg);
        AlignConfig ac;
        ac.iterations = 30;
        const auto a = align_stack(ph.views, ac);
        const auto b = align_stack(ph.views, ac);
        CHECK(a.loss_trace == b.loss_trace);
        for (int s = 0; s < a.translations.size(); ++s) CHECK(a.translations.shifts[s] == b.translations.shifts[s]);
    }

    TEST_CASE("config validation")
    {
        AlignConfig c;
        c.iterations = -1;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.lr = 0.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.parzen.bins = 1;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    TEST_CASE("shifts csv round trip")
    {
        const auto dir = temp_dir("shifts");
        std::mt19937_64 rng(4);
        const auto t = random_shifts(rng, 6, 5.0);
        write_shifts_csv(t, dir / "shifts.csv");
        const auto r = read_shifts_csv(dir / "shifts.csv");
        REQUIRE(r.size() == 6);
        for (int s = 0; s < 6; ++s) CHECK((r.shifts[s] - t.shifts[s]).norm() < 1e-7);
        {
            std::ofstream out(dir / "bad.csv");
            out << "index,x,y\n0,1,2\n";
        }
        CHECK_THROWS_AS(read_shifts_csv(dir / "bad.csv"), ParseError);
    }
}
