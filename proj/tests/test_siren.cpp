#include <fstream>

#include "doctest.h"
#include "support.hpp"

#include "inrstrain/adam.hpp"
#include "inrstrain/errors.hpp"

using namespace inrstrain;
using namespace testing;

namespace {

MlpParams small_net(std::uint64_t seed)
{
    SirenShape s;
    s.hidden_width = 16;
    s.hidden_layers = 2;
    s.omega0 = 30.0;
    auto p = init_siren(seed, s);
    std::mt19937_64 rng(seed + 100);
    // Non-zero biases and a larger last layer so every path matters.
    for (auto& l : p.layers) {
        for (int i = 0; i < l.bias.size(); ++i) l.bias[i] = static_cast<float>(uniform(rng, -0.05, 0.05));
    }
    p.layers.back().weight *= 50.0f;
    return p;
}

// Plain loop-by-loop evaluation.
Vec3 naive_forward(const MlpParams& p, const Vec3& x)
{
    std::vector<double> h{x[0], x[1], x[2]};
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        std::vector<double> out(L.weight.rows());
        for (int r = 0; r < L.weight.rows(); ++r) {
            double a = L.bias[r];
            for (int c = 0; c < L.weight.cols(); ++c) a += static_cast<double>(L.weight(r, c)) * h[c];
            out[r] = (l + 1 < p.layers.size()) ? std::sin(p.omega0 * a) : a;
        }
        h = out;
    }
    return Vec3(h[0], h[1], h[2]);
}

Matrix3X random_points(std::mt19937_64& rng, int n)
{
    Matrix3X x(3, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) x(k, i) = uniform(rng, -1, 1);
    return x;
}

} // namespace

TEST_SUITE("siren")
{
    TEST_CASE("initialisation bounds and shape")
    {
        const auto p = init_siren(3);
        CHECK(p.sizes == std::vector<int>{3, 256, 256, 256, 3});
        CHECK(p.parameter_count() == 3u * 256 + 256 + 2u * (256 * 256 + 256) + 256u * 3 + 3);
        CHECK(p.layers[0].weight.cwiseAbs().maxCoeff() <= 1.0f / 3.0f);
        const float hidden = static_cast<float>(std::sqrt(6.0 / 256) / 30.0);
        CHECK(p.layers[1].weight.cwiseAbs().maxCoeff() <= hidden);
        CHECK(p.layers[1].weight.cwiseAbs().maxCoeff() > 0.9f * hidden);
        const auto q = init_siren(3);
        CHECK(p.layers[2].weight == q.layers[2].weight);
        CHECK(init_siren(4).layers[2].weight != q.layers[2].weight);
        CHECK_THROWS_AS(init_siren(1, SirenShape{0, 3, 30.0}), ConfigError);
    }

    TEST_CASE("forward matches a naive evaluation")
    {
        const auto p = small_net(1);
        std::mt19937_64 rng(1);
        const auto x = random_points(rng, 50);
        const auto u = forward(p, x);
        for (int i = 0; i < 50; ++i) {
            const Vec3 ref = naive_forward(p, x.col(i));
            CHECK((u.col(i) - ref).norm() < 1e-9 * std::max(1.0, ref.norm()));
        }
    }

    TEST_CASE("zero last layer gives zero displacement and zero jacobian")
    {
        const auto p = zero_output(init_siren(5));
        std::mt19937_64 rng(2);
        const auto x = random_points(rng, 20);
        Matrix3X u;
        Matrix9X j;
        SirenEvaluator(p).forward_jacobian(x, u, j);
        CHECK(u.cwiseAbs().maxCoeff() == 0.0);
        CHECK(j.cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("results do not depend on batch composition")
    {
        const auto p = small_net(2);
        std::mt19937_64 rng(3);
        const auto x = random_points(rng, 300);
        const auto all = forward(p, x);
        for (int i : {0, 127, 128, 299}) {
            const Vec3 single = forward(p, Vec3(x.col(i)));
            CHECK(single == Vec3(all.col(i)));
        }
        const Matrix3X part = x.middleCols(100, 50);
        const auto sub = forward(p, part);
        for (int i = 0; i < 50; ++i) CHECK(Vec3(sub.col(i)) == Vec3(all.col(100 + i)));
    }

    TEST_CASE("spatial jacobian matches finite differences")
    {
        const auto p = small_net(3);
        std::mt19937_64 rng(4);
        const double h = 1e-5;
        for (int trial = 0; trial < 10; ++trial) {
            const Vec3 x(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
            const Mat3 J = spatial_jacobian(p, x);
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e[k] = h;
                const Vec3 fd = (naive_forward(p, x + e) - naive_forward(p, x - e)) / (2 * h);
                for (int a = 0; a < 3; ++a) CHECK(rel_err(J(a, k), fd[a], 1e-3) < 1e-5);
            }
        }
    }

    TEST_CASE("affine network has the expected jacobian")
    {
        Mat3 A;
        A << 1.0, 0.5, -0.25, 0.0, 2.0, 0.125, 0.75, 0.0, -1.0;
        const Vec3 b(0.5, -0.25, 1.0);
        const auto p = affine_network(A, b);
        const Vec3 x(0.3, -0.2, 0.9);
        CHECK((forward(p, x) - (A * x + b)).norm() < 1e-12);
        CHECK((spatial_jacobian(p, x) - A).norm() < 1e-12);
    }

    TEST_CASE("parameter gradients match finite differences")
    {
        auto p = small_net(4);
        std::mt19937_64 rng(5);
        const auto x = random_points(rng, 6);
        Matrix3X gu(3, 6);
        Matrix9X gj(9, 6);
        for (int i = 0; i < 6; ++i) {
            for (int k = 0; k < 3; ++k) gu(k, i) = uniform(rng, -1, 1);
            for (int k = 0; k < 9; ++k) gj(k, i) = uniform(rng, -1, 1);
        }
        auto objective = [&](const MlpParams& q) {
            Matrix3X u;
            Matrix9X j;
            SirenEvaluator(q).forward_jacobian(x, u, j);
            return (u.cwiseProduct(gu)).sum() + (j.cwiseProduct(gj)).sum();
        };
        auto grads = MlpGrads::zeros_like(p);
        SirenEvaluator(p).backward(x, gu, gj, grads);

        // Float parameters: perturb through a double-precision copy of one entry at a time.
        const float h = 1e-3f;
        int checked = 0;
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            for (int trial = 0; trial < 6; ++trial) {
                const int r = static_cast<int>(rng() % p.layers[l].weight.rows());
                const int c = static_cast<int>(rng() % p.layers[l].weight.cols());
                auto pp = p, pm = p;
                const float w = p.layers[l].weight(r, c);
                pp.layers[l].weight(r, c) = w + h;
                pm.layers[l].weight(r, c) = w - h;
                const double step = static_cast<double>(pp.layers[l].weight(r, c)) - pm.layers[l].weight(r, c);
                const double fd = (objective(pp) - objective(pm)) / step;
                CHECK(rel_err(grads.weight[l](r, c), fd, 1e-2) < 2e-3);
                ++checked;
            }
            const int r = static_cast<int>(rng() % p.layers[l].bias.size());
            auto pp = p, pm = p;
            pp.layers[l].bias[r] += h;
            pm.layers[l].bias[r] -= h;
            const double step = static_cast<double>(pp.layers[l].bias[r]) - pm.layers[l].bias[r];
            CHECK(rel_err(grads.bias[l][r], (objective(pp) - objective(pm)) / step, 1e-2) < 2e-3);
        }
        CHECK(checked == 18);
    }

    TEST_CASE("backward_params agrees with the evaluator")
    {
        const auto p = small_net(6);
        std::mt19937_64 rng(7);
        const auto x = random_points(rng, 10);
        const Matrix3X g = random_points(rng, 10);
        const auto a = backward_params(p, x, g);
        auto b = MlpGrads::zeros_like(p);
        SirenEvaluator(p).backward(x, g, Matrix9X(), b);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            CHECK((a.weight[l] - b.weight[l]).norm() < 1e-12);
            CHECK((a.bias[l] - b.bias[l]).norm() < 1e-12);
        }
        CHECK_THROWS_AS(backward_params(p, x, Matrix3X(3, 4)), DataError);
    }

    TEST_CASE("adam first step moves every parameter by lr against the gradient sign")
    {
        auto p = affine_network(Mat3::Identity());
        auto g = MlpGrads::zeros_like(p);
        g.weight[0] << 1, -2, 3, -4, 5, -6, 7, -8, 9;
        g.bias[0] << 0.5, -0.5, 0.0;
        auto state = AdamState::for_params(p);
        const auto before = p;
        adam_step(p, g, state, 0.01);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const double d = p.layers[0].weight(r, c) - before.layers[0].weight(r, c);
                CHECK(d == doctest::Approx(-0.01 * (g.weight[0](r, c) > 0 ? 1 : -1)).epsilon(1e-4));
            }
        CHECK(p.layers[0].bias[2] == 0.0f);
        CHECK(state.t == 1);

        g.weight[0](1, 1) = std::nan("");
        const auto frozen = p;
        CHECK_THROWS_AS(adam_step(p, g, state, 0.01), NumericalError);
        CHECK(p.layers[0].weight == frozen.layers[0].weight);
    }

    TEST_CASE("flat adam minimises a quadratic")
    {
        std::vector<double> x{3.0, -2.0};
        FlatAdam opt(2);
        for (int i = 0; i < 2000; ++i) {
            const std::vector<double> g{2 * (x[0] - 1.0), 2 * (x[1] + 0.5)};
            opt.step(x, g, 0.01);
        }
        CHECK(std::abs(x[0] - 1.0) < 1e-2);
        CHECK(std::abs(x[1] + 0.5) < 1e-2);
        CHECK(opt.steps() == 2000);
    }

    TEST_CASE("save and load round trip is bitwise")
    {
        const auto dir = temp_dir("siren");
        const auto p = small_net(8);
        save_params(p, dir / "a.params");
        const auto q = load_params(dir / "a.params");
        CHECK(q.sizes == p.sizes);
        CHECK(q.omega0 == p.omega0);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            CHECK(q.layers[l].weight == p.layers[l].weight);
            CHECK(q.layers[l].bias == p.layers[l].bias);
        }
        save_params(q, dir / "b.params");
        std::ifstream fa(dir / "a.params", std::ios::binary), fb(dir / "b.params", std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        CHECK(sa == sb);
    }

    TEST_CASE("load rejects damaged files")
    {
        const auto dir = temp_dir("siren_bad");
        const auto p = small_net(9);
        save_params(p, dir / "a.params");
        std::ifstream in(dir / "a.params", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        {
            std::ofstream out(dir / "trunc.params", std::ios::binary);
            out << bytes.substr(0, bytes.size() - 7);
        }
        CHECK_THROWS_AS(load_params(dir / "trunc.params"), LoadError);
        {
            std::ofstream out(dir / "junk.params", std::ios::binary);
            out << "not a header\n";
        }
        CHECK_THROWS_AS(load_params(dir / "junk.params"), LoadError);
        CHECK_THROWS_AS(load_params(dir / "missing.params"), LoadError);
    }
}
