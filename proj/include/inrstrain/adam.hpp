#pragma once

#include <span>
#include <vector>

#include "inrstrain/siren.hpp"

namespace inrstrain {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment accumulators shaped like MlpParams.
struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long t = 0;
    AdamHyper hyper;

    static AdamState for_params(const MlpParams& p);
};

// One bias-corrected Adam update. Throws NumericalError naming the layer
// when a gradient is not finite; parameters are left untouched then.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr);

// Adam over a flat double vector (slice translations).
class FlatAdam {
public:
    explicit FlatAdam(std::size_t n, AdamHyper hyper = {}) : m_(n, 0.0), v_(n, 0.0), hyper_(hyper) {}
    void step(std::span<double> x, std::span<const double> grad, double lr);
    long steps() const noexcept { return t_; }

private:
    std::vector<double> m_, v_;
    long t_ = 0;
    AdamHyper hyper_;
};

} // namespace inrstrain
