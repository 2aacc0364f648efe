#pragma once

#include <span>
#include <vector>

namespace inrstrain {

// A similarity value and its gradients w.r.t. both sample sets.
struct LossValueGrad {
    double value = 0.0;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

// Global Pearson correlation in [-1, 1]. Callers use -value as a loss.
// Throws DegenerateInputError when both inputs are constant.
LossValueGrad ncc(std::span<const double> a, std::span<const double> b);

struct ParzenOptions {
    int bins = 32;
    double sigma = 1.0; // kernel width in bin widths
};

// NMI = (H(A) + H(B)) / H(A,B) from a Gaussian-Parzen joint histogram.
// Both inputs are rescaled to [0,1] by their joint min/max; the gradient
// includes the dependence of that rescale on the extreme samples.
LossValueGrad nmi_parzen(std::span<const double> a, std::span<const double> b, const ParzenOptions& opt = {});

inline constexpr double dice_epsilon = 1e-7;

// 2 sum(pq) / (sum p + sum q + eps). Callers use 1 - value as a loss.
LossValueGrad soft_dice(std::span<const double> p, std::span<const double> q);

} // namespace inrstrain
