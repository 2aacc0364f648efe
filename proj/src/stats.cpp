#include "inrstrain/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "inrstrain/errors.hpp"

namespace inrstrain {

double chi_square_sf(double x, int df)
{
    if (df < 1) {
        throw DataError("chi_square_sf: df must be >= 1");
    }
    if (x <= 0.0) {
        return 1.0;
    }
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups)
{
    if (groups.size() < 2) {
        throw DataError("kruskal_wallis: need at least two groups");
    }
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) {
            throw DataError("kruskal_wallis: empty group " + std::to_string(g));
        }
        for (double v : groups[g]) {
            if (!std::isfinite(v)) {
                throw DataError("kruskal_wallis: non-finite value");
            }
            all.emplace_back(v, g);
        }
    }
    const double n = static_cast<double>(all.size());
    if (all.size() < 3) {
        throw DataError("kruskal_wallis: need at least 3 values");
    }
    std::sort(all.begin(), all.end());
    std::vector<double> rank_sum(groups.size(), 0.0);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) {
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t m = i; m < j; ++m) {
            rank_sum[all[m].second] += avg_rank;
        }
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    KruskalWallis out;
    out.df = static_cast<int>(groups.size()) - 1;
    const double correction = 1.0 - tie_term / (n * n * n - n);
    if (correction <= 0.0) {
        return out; // all values identical
    }
    double h = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    h = std::max(0.0, h / correction);
    out.h = h;
    out.p = chi_square_sf(h, out.df);
    return out;
}

} // namespace inrstrain
