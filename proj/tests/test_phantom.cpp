#include "doctest.h"
#include "support.hpp"

#include "inrstrain/errors.hpp"
#include "inrstrain/metrics.hpp"
#include "inrstrain/strain.hpp"
#include "inrstrain/upsample.hpp"

using namespace inrstrain;
using namespace testing;

namespace {

const Phantom& default_phantom()
{
    static const Phantom ph = make_phantom(PhantomConfig{});
    return ph;
}

Vec3 wall_point(std::mt19937_64& rng, const PhantomConfig& c)
{
    const double R = uniform(rng, c.r_in, c.r_out);
    const double a = uniform(rng, 0, 2 * std::numbers::pi);
    return Vec3(R * std::cos(a), R * std::sin(a), uniform(rng, -40, 40));
}

} // namespace

TEST_SUITE("phantom")
{
    TEST_CASE("cycle timing")
    {
        const auto& gt = default_phantom().truth;
        REQUIRE(gt.c.size() == 10u);
        CHECK(gt.c[0] == 0.0);
        CHECK(gt.c[9] == 0.0);
        CHECK(gt.ed_index == 9);
        CHECK(gt.es_index == 4);
        CHECK(gt.c[4] == doctest::Approx(80.0 * std::pow(std::sin(4 * std::numbers::pi / 9), 2)));
    }

    TEST_CASE("the ED map is the identity")
    {
        const auto& gt = default_phantom().truth;
        std::mt19937_64 rng(1);
        for (int i = 0; i < 100; ++i) {
            const Vec3 X(uniform(rng, -60, 60), uniform(rng, -60, 60), uniform(rng, -40, 40));
            CHECK(gt.to_spatial(X, gt.ed_index) == X);
            CHECK(gt.to_material(X, 0) == X);
        }
        const auto& v = default_phantom().views;
        CHECK(v.sax.images[0].data == v.sax.images[9].data);
    }

    TEST_CASE("the motion preserves volume inside the wall")
    {
        const auto& gt = default_phantom().truth;
        std::mt19937_64 rng(2);
        for (int i = 0; i < 200; ++i) {
            const Vec3 X = wall_point(rng, gt.config);
            for (int t : {2, 4, 7}) CHECK(std::abs(gt.deformation_gradient(X, t).determinant() - 1.0) < 1e-10);
        }
    }

    TEST_CASE("analytic deformation gradient matches finite differences")
    {
        const auto& gt = default_phantom().truth;
        std::mt19937_64 rng(3);
        const double h = 1e-5;
        for (int i = 0; i < 50; ++i) {
            // Taper band included: F must follow the blended map there too.
            const double R = uniform(rng, 10, 40);
            const double a = uniform(rng, 0, 6.28);
            const Vec3 X(R * std::cos(a), R * std::sin(a), 3.0);
            const Mat3 F = gt.deformation_gradient(X, 4);
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e[k] = h;
                const Vec3 fd = (gt.to_spatial(X + e, 4) - gt.to_spatial(X - e, 4)) / (2 * h);
                CHECK((F.col(k) - fd).norm() < 1e-6);
            }
        }
    }

    TEST_CASE("material and spatial maps invert each other")
    {
        const auto& gt = default_phantom().truth;
        std::mt19937_64 rng(4);
        for (int i = 0; i < 500; ++i) {
            const double R = uniform(rng, gt.config.r_in, 60);
            const double a = uniform(rng, 0, 6.28);
            const Vec3 X(R * std::cos(a), R * std::sin(a), uniform(rng, -40, 40));
            for (int t = 0; t < 10; ++t) CHECK((gt.to_material(gt.to_spatial(X, t), t) - X).norm() < 1e-9);
        }
    }

    TEST_CASE("analytic strain examples")
    {
        auto gt = default_phantom().truth;
        gt.c[3] = 36.0;
        const auto [err, ecc] = analytic_strain(gt, 3, Vec3(20, 0, 0));
        CHECK(err == doctest::Approx((400.0 / 364.0 - 1.0) / 2).epsilon(1e-12));
        CHECK(err == doctest::Approx(0.04945).epsilon(1e-3));
        CHECK(ecc == doctest::Approx(-0.045).epsilon(1e-12));
        const auto [e0r, e0c] = analytic_strain(gt, 0, Vec3(0, 18, 0));
        CHECK(e0r == 0.0);
        CHECK(e0c == 0.0);
        CHECK_THROWS_AS(analytic_strain(gt, 3, Vec3(5, 0, 0)), DataError);
        CHECK_THROWS_AS(analytic_strain(gt, 3, Vec3(30, 0, 0)), DataError);
    }

    TEST_CASE("analytic strain agrees with the deformation gradient")
    {
        const auto& gt = default_phantom().truth;
        std::mt19937_64 rng(5);
        for (int i = 0; i < 100; ++i) {
            const Vec3 X = wall_point(rng, gt.config);
            const Vec3 er = Vec3(X.x(), X.y(), 0).normalized();
            const Vec3 ec = Vec3::UnitZ().cross(er);
            const Mat3 E = green_lagrange(gt.deformation_gradient(X, gt.es_index));
            const auto [rr, cc] = analytic_strain(gt, gt.es_index, X);
            CHECK(std::abs(project_strain(E, er) - rr) < 1e-10);
            CHECK(std::abs(project_strain(E, ec) - cc) < 1e-10);
            CHECK(rr > 0.0);
            CHECK(cc < 0.0);
        }
    }

    TEST_CASE("views have the expected layout")
    {
        const auto& v = default_phantom().views;
        v.validate();
        CHECK(v.sax.time_points() == 10);
        CHECK(v.sax.geometry().dims == Index3{64, 64, 12});
        REQUIRE(v.ch2.has_value());
        CHECK(v.ch4.geometry().dims[2] == 1);
        const auto& ed = v.sax.masks[v.sax.ed_index];
        for (std::uint8_t code : {label::lv_pool, label::myocardium, label::rv_pool})
            CHECK(std::count(ed.data.begin(), ed.data.end(), code) > 100);
        // The 4CH plane passes through the LV axis: its center column is pool.
        const auto& m4 = v.ch4.masks[v.sax.ed_index];
        CHECK(m4.at(m4.geom.dims[0] / 2, m4.geom.dims[1] / 2, 0) == label::lv_pool);
        const auto es_pool = std::count(v.sax.masks[v.sax.es_index].data.begin(),
                                        v.sax.masks[v.sax.es_index].data.end(), label::lv_pool);
        CHECK(es_pool < std::count(ed.data.begin(), ed.data.end(), label::lv_pool));
    }

    TEST_CASE("masks follow the map")
    {
        const auto& gt = default_phantom().truth;
        Geometry g;
        g.dims = {200, 200, 1};
        g.spacing = Vec3(0.3, 0.3, 1.0);
        g.origin = Vec3(-29.85, -29.85, 0.0);
        const int t = gt.es_index;
        const auto frame_t = gt.label_volume(g, t);
        const auto ed = gt.label_volume(g, gt.ed_index);
        LabelMask pulled(g, 0);
        for (int j = 0; j < 200; ++j)
            for (int i = 0; i < 200; ++i) {
                const Vec3 x = voxel_to_world(g, Vec3(i, j, 0));
                pulled.at(i, j, 0) = sample_nearest(ed, gt.to_material(x, t));
            }
        const double d = dice(pulled, frame_t, label::myocardium);
        MESSAGE("MYO Dice " << d);
        CHECK(d >= 0.97);
    }

    TEST_CASE("apex taper narrows the LV")
    {
        PhantomConfig c;
        c.apex_taper = 0.3;
        c.phases = 3;
        GroundTruth gt;
        gt.config = c;
        CHECK(gt.lv_scale(phantom_sax_geometry(c).origin.z()) == doctest::Approx(1.0));
        const auto ph = make_phantom(c);
        const auto& m = ph.views.sax.masks[0];
        auto pool = [&](int k) {
            long n = 0;
            for (int j = 0; j < 64; ++j)
                for (int i = 0; i < 64; ++i) n += m.at(i, j, k) == label::lv_pool;
            return n;
        };
        CHECK(pool(0) > pool(11));
        CHECK(segment_slices(m)[0] == Segment::Basal);
    }

    TEST_CASE("misalignment injection")
    {
        const auto& sax = default_phantom().views.sax;
        const auto [same, zero] = inject_misalignment(sax, 3, 0.0);
        CHECK(same.images[2].data == sax.images[2].data);
        for (const auto& s : zero.shifts) CHECK(s.isZero());
        const auto [moved, shifts] = inject_misalignment(sax, 3, 4.0);
        REQUIRE(shifts.size() == 12);
        bool any = false;
        for (const auto& s : shifts.shifts) {
            CHECK(s.cwiseAbs().maxCoeff() <= 4.0);
            any = any || !s.isZero();
        }
        CHECK(any);
        CHECK(moved.images[5].data == apply_translations(sax.images[5], shifts).data);
        CHECK_THROWS_AS(inject_misalignment(sax, 3, -1.0), ConfigError);
    }

    TEST_CASE("decimation")
    {
        Geometry g;
        g.dims = {4, 3, 85};
        g.spacing = Vec3(2, 2, 8.0 / 6);
        std::mt19937_64 rng(6);
        const auto v = random_volume(rng, g);
        const auto d = decimate(v, 6);
        CHECK(d.geom.dims[2] == 15);
        CHECK(d.geom.spacing[2] == doctest::Approx(8.0));
        CHECK(d.at(1, 2, 3) == v.at(1, 2, 18));
        CHECK(decimate(v, 1).data == v.data);
        UpsampleSpec spec;
        spec.factor = 6;
        const auto u = upsample_through_plane(d, spec);
        CHECK(u.geom.dims == g.dims);
        CHECK(u.geom.same_as(g));
        CHECK_THROWS_AS(decimate(v, 100), DataError);
        CHECK_THROWS_AS(decimate(v, 0), ConfigError);
        const auto dm = decimate(LabelMask(g, 2), 6);
        CHECK(dm.geom.dims[2] == 15);
    }

    TEST_CASE("json round trips")
    {
        PhantomConfig c;
        c.r_in = 12.5;
        c.texture_seed = 99;
        c.with_ch2 = false;
        const auto back = phantom_config_from_json(to_json(c));
        CHECK(back.r_in == 12.5);
        CHECK(back.texture_seed == 99u);
        CHECK(!back.with_ch2);
        CHECK(back.dims == c.dims);

        auto gt = default_phantom().truth;
        gt.shifts = SliceTranslations::zeros(12);
        gt.shifts->shifts[3] = Eigen::Vector2d(1.5, -0.25);
        const auto g2 = GroundTruth::from_json(gt.to_json());
        CHECK(g2.c == gt.c);
        CHECK(g2.es_index == gt.es_index);
        REQUIRE(g2.shifts.has_value());
        CHECK(g2.shifts->shifts[3] == gt.shifts->shifts[3]);
        const Vec3 p(3.0, -7.0, 11.0);
        CHECK(g2.material_intensity(p) == gt.material_intensity(p));
        CHECK_THROWS_AS(phantom_config_from_json(nlohmann::json{{"r_in", "big"}}), ParseError);
    }

    TEST_CASE("config validation")
    {
        PhantomConfig c;
        c.r_in = 30;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.phases = 2;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.c_max = 400;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
}
