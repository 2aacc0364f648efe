#include "inrstrain/distance_transform.hpp"

#include <limits>

namespace inrstrain {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) on a line of
// samples spaced `h` apart.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, double h, std::vector<int>& v,
            std::vector<double>& z)
{
    const int n = static_cast<int>(f.size());
    int k = -1;
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) {
            continue;
        }
        const double xq = q * h;
        while (k >= 0) {
            const double xv = v[k] * h;
            const double s = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : ((f[q] + xq * xq) - (f[v[k - 1]] + (v[k - 1] * h) * (v[k - 1] * h)))
                                   / (2.0 * (xq - v[k - 1] * h));
        z[k + 1] = inf;
    }
    d.assign(n, inf);
    if (k < 0) {
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = q * h;
        while (z[j + 1] < xq) {
            ++j;
        }
        const double dx = xq - v[j] * h;
        d[q] = dx * dx + f[v[j]];
    }
}

} // namespace

std::vector<double> squared_distance_transform(const Geometry& g, const std::vector<std::uint8_t>& seeds,
                                               bool in_plane)
{
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    std::vector<double> dist(g.voxel_count());
    for (std::size_t n = 0; n < dist.size(); ++n) {
        dist[n] = seeds[n] ? 0.0 : inf;
    }
    std::vector<double> f, d, z;
    std::vector<int> v;
    const auto pass = [&](int axis, int len, auto&& index_of, int outer_a, int outer_b) {
        f.resize(len);
        for (int b = 0; b < outer_b; ++b) {
            for (int a = 0; a < outer_a; ++a) {
                for (int q = 0; q < len; ++q) {
                    f[q] = dist[index_of(q, a, b)];
                }
                edt_1d(f, d, g.spacing[axis], v, z);
                for (int q = 0; q < len; ++q) {
                    dist[index_of(q, a, b)] = d[q];
                }
            }
        }
    };
    pass(0, nx, [&](int q, int a, int b) { return g.linear_index(q, a, b); }, ny, nz);
    pass(1, ny, [&](int q, int a, int b) { return g.linear_index(a, q, b); }, nx, nz);
    if (!in_plane) {
        pass(2, nz, [&](int q, int a, int b) { return g.linear_index(a, b, q); }, nx, ny);
    }
    return dist;
}

std::vector<std::uint8_t> region_boundary(const Geometry& g, const std::vector<std::uint8_t>& region,
                                          bool in_plane)
{
    std::vector<std::uint8_t> out(region.size(), 0);
    static constexpr int offsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const int neighbours = in_plane ? 4 : 6;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const std::size_t n = g.linear_index(i, j, k);
                if (!region[n]) {
                    continue;
                }
                for (int o = 0; o < neighbours; ++o) {
                    const int a = i + offsets[o][0], b = j + offsets[o][1], c = k + offsets[o][2];
                    if (!g.contains(a, b, c) || !region[g.linear_index(a, b, c)]) {
                        out[n] = 1;
                        break;
                    }
                }
            }
        }
    }
    return out;
}

} // namespace inrstrain
