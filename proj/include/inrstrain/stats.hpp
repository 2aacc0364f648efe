#pragma once

#include <vector>

namespace inrstrain {

struct KruskalWallis {
    double h = 0.0;
    double p = 1.0;
    int df = 0;
};

// Rank test across groups with tie correction; p from the chi-square
// upper tail with k-1 degrees of freedom.
KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Upper tail of the chi-square distribution.
double chi_square_sf(double x, int df);

} // namespace inrstrain
