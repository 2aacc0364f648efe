#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "inrstrain/geometry.hpp"

namespace inrstrain {

using Matrix3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Matrix9X = Eigen::Matrix<double, 9, Eigen::Dynamic>;

struct DenseLayer {
    Eigen::MatrixXf weight; // out x in
    Eigen::VectorXf bias;
};

// Weights of a sine-activated coordinate network mapping a canonical
// 3-vector to a canonical 3-vector displacement. Every layer but the
// last computes sin(omega0 * (W h + b)); the last is linear. Sizes {3, 3}
// give a plain affine map.
struct MlpParams {
    std::vector<int> sizes; // e.g. {3, 256, 256, 256, 3}
    std::vector<DenseLayer> layers;
    double omega0 = 30.0;

    void validate() const;
    std::size_t parameter_count() const;
    int sine_layers() const { return static_cast<int>(layers.size()) - 1; }
};

struct SirenShape {
    int hidden_width = 256;
    int hidden_layers = 3;
    double omega0 = 30.0;
};

// Parameter gradients, double precision, shaped like MlpParams.
struct MlpGrads {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    static MlpGrads zeros_like(const MlpParams& p);
    MlpGrads& operator+=(const MlpGrads& o);
    MlpGrads& operator*=(double s);
};

MlpParams init_siren(std::uint64_t seed, const SirenShape& shape = {});

// Double-precision copy of the parameters plus batched evaluation.
// Batches are processed in fixed-width column chunks, so a sample's
// result does not depend on the batch it is evaluated in.
class SirenEvaluator {
public:
    static constexpr int chunk = 128;

    explicit SirenEvaluator(const MlpParams& params);

    Matrix3X forward(const Matrix3X& x) const;
    Vec3 forward(const Vec3& x) const;

    // Displacement and its exact spatial Jacobian; jac column n holds
    // du_a/dx_k at row 3a+k.
    void forward_jacobian(const Matrix3X& x, Matrix3X& u, Matrix9X& jac) const;
    Mat3 spatial_jacobian(const Vec3& x) const;

    // Gradient of sum_n <gu_n, u(x_n)> + <gj_n, J(x_n)> w.r.t. every
    // parameter, accumulated into `grads`. gj may be empty (zero).
    void backward(const Matrix3X& x, const Matrix3X& gu, const Matrix9X& gj, MlpGrads& grads) const;

    const MlpParams& params() const noexcept { return *params_; }

private:
    struct Tape;
    void run_chunk(const Matrix3X& x, Tape& tape, bool with_jacobian) const;
    void backward_chunk(const Tape& tape, const Matrix3X& gu, const Matrix9X* gj, MlpGrads& grads) const;

    const MlpParams* params_;
    std::vector<Eigen::MatrixXd> w_;
    std::vector<Eigen::VectorXd> b_;
    double omega_;
};

Vec3 forward(const MlpParams& params, const Vec3& x);
Matrix3X forward(const MlpParams& params, const Matrix3X& x);
Mat3 spatial_jacobian(const MlpParams& params, const Vec3& x);
MlpGrads backward_params(const MlpParams& params, const Matrix3X& batch, const Matrix3X& upstream);

inline constexpr int params_format_version = 1;

// JSON header line followed by a little-endian float32 payload.
void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

} // namespace inrstrain
