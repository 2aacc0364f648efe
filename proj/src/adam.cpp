#include "inrstrain/adam.hpp"

#include <cmath>
#include <string>

#include "inrstrain/errors.hpp"

namespace inrstrain {

AdamState AdamState::for_params(const MlpParams& p)
{
    AdamState s;
    for (const auto& L : p.layers) {
        s.m_w.push_back(Eigen::MatrixXd::Zero(L.weight.rows(), L.weight.cols()));
        s.v_w.push_back(Eigen::MatrixXd::Zero(L.weight.rows(), L.weight.cols()));
        s.m_b.push_back(Eigen::VectorXd::Zero(L.bias.size()));
        s.v_b.push_back(Eigen::VectorXd::Zero(L.bias.size()));
    }
    return s;
}

namespace {

template <typename Param, typename Grad>
void update(Param& p, const Grad& g, Grad& m, Grad& v, const AdamHyper& h, double lr, double c1, double c2)
{
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double gi = g.data()[i];
        double& mi = m.data()[i];
        double& vi = v.data()[i];
        mi = h.beta1 * mi + (1.0 - h.beta1) * gi;
        vi = h.beta2 * vi + (1.0 - h.beta2) * gi * gi;
        const double step = lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps);
        p.data()[i] = static_cast<typename Param::Scalar>(p.data()[i] - step);
    }
}

} // namespace

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr)
{
    if (grads.weight.size() != params.layers.size() || state.m_w.size() != params.layers.size()) {
        throw DataError("adam: gradient/state shape does not match parameters");
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        if (grads.weight[l].rows() != params.layers[l].weight.rows()
            || grads.weight[l].cols() != params.layers[l].weight.cols()
            || grads.bias[l].size() != params.layers[l].bias.size()) {
            throw DataError("adam: gradient shape mismatch in layer " + std::to_string(l));
        }
        if (!grads.weight[l].allFinite() || !grads.bias[l].allFinite()) {
            throw NumericalError("adam: non-finite gradient in layer " + std::to_string(l));
        }
    }
    ++state.t;
    const auto& h = state.hyper;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grads.weight[l], state.m_w[l], state.v_w[l], h, lr, c1, c2);
        update(params.layers[l].bias, grads.bias[l], state.m_b[l], state.v_b[l], h, lr, c1, c2);
    }
}

void FlatAdam::step(std::span<double> x, std::span<const double> grad, double lr)
{
    if (x.size() != m_.size() || grad.size() != m_.size()) {
        throw DataError("adam: vector size mismatch");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) {
            throw NumericalError("adam: non-finite gradient");
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < x.size(); ++i) {
        m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * grad[i];
        v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * grad[i] * grad[i];
        x[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + hyper_.eps);
    }
}

} // namespace inrstrain
