#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "inrstrain/geometry.hpp"
#include "inrstrain/phantom.hpp"
#include "inrstrain/random.hpp"
#include "inrstrain/siren.hpp"
#include "inrstrain/volume.hpp"

namespace testing {

using namespace inrstrain;

inline double rel_err(double a, double b, double floor = 1e-8)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return lo + (hi - lo) * unit_uniform(rng);
}

inline Geometry random_geometry(std::mt19937_64& rng, Index3 dims = {7, 6, 5})
{
    Geometry g;
    g.dims = dims;
    g.spacing = Vec3(uniform(rng, 0.5, 3.0), uniform(rng, 0.5, 3.0), uniform(rng, 0.5, 10.0));
    g.origin = Vec3(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -50, 50));
    Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    g.direction = q.normalized().toRotationMatrix();
    return g;
}

inline Volume3D random_volume(std::mt19937_64& rng, const Geometry& g)
{
    Volume3D v(g);
    for (auto& x : v.data) x = static_cast<float>(uniform(rng, -1.0, 1.0));
    return v;
}

// Sizes {3,3}: u = A q + b in canonical units.
inline MlpParams affine_network(const Mat3& A, const Vec3& b = Vec3::Zero())
{
    MlpParams p;
    p.sizes = {3, 3};
    p.layers.resize(1);
    p.layers[0].weight = A.cast<float>();
    p.layers[0].bias = b.cast<float>();
    return p;
}

inline MlpParams zero_output(MlpParams p)
{
    p.layers.back().weight.setZero();
    p.layers.back().bias.setZero();
    return p;
}

// Small, quick phantom for tests that train networks.
inline PhantomConfig small_phantom()
{
    PhantomConfig c;
    c.dims = {40, 40, 8};
    c.spacing = Vec3(2.0, 2.0, 8.0);
    c.r_in = 10.0;
    c.r_out = 16.0;
    c.c_max = 40.0;
    c.taper_radius = 26.0;
    c.phases = 6;
    return c;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("inrstrain_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing
