#include "inrstrain/siren.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "inrstrain/errors.hpp"
#include "inrstrain/random.hpp"

namespace inrstrain {

void MlpParams::validate() const
{
    if (sizes.size() < 2 || sizes.front() != 3 || sizes.back() != 3) {
        throw DataError("siren: layer sizes must start and end with 3");
    }
    if (layers.size() + 1 != sizes.size()) {
        throw DataError("siren: layer count does not match sizes");
    }
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) {
        throw DataError("siren: omega0 must be positive");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.weight.rows() != sizes[l + 1] || L.weight.cols() != sizes[l] || L.bias.size() != sizes[l + 1]) {
            throw DataError("siren: layer " + std::to_string(l) + " has inconsistent shape");
        }
        if (!L.weight.allFinite() || !L.bias.allFinite()) {
            throw DataError("siren: layer " + std::to_string(l) + " has non-finite entries");
        }
    }
}

std::size_t MlpParams::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& L : layers) {
        n += static_cast<std::size_t>(L.weight.size() + L.bias.size());
    }
    return n;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p)
{
    MlpGrads g;
    for (const auto& L : p.layers) {
        g.weight.push_back(Eigen::MatrixXd::Zero(L.weight.rows(), L.weight.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(L.bias.size()));
    }
    return g;
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& o)
{
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] += o.weight[l];
        bias[l] += o.bias[l];
    }
    return *this;
}

MlpGrads& MlpGrads::operator*=(double s)
{
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] *= s;
        bias[l] *= s;
    }
    return *this;
}

MlpParams init_siren(std::uint64_t seed, const SirenShape& shape)
{
    if (shape.hidden_width < 1 || shape.hidden_layers < 1 || !(shape.omega0 > 0.0)) {
        throw ConfigError("siren: invalid network shape");
    }
    MlpParams p;
    p.omega0 = shape.omega0;
    p.sizes.push_back(3);
    for (int l = 0; l < shape.hidden_layers; ++l) {
        p.sizes.push_back(shape.hidden_width);
    }
    p.sizes.push_back(3);

    std::mt19937_64 rng(seed);
    const int n_layers = static_cast<int>(p.sizes.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
        const int fan_in = p.sizes[l];
        const int fan_out = p.sizes[l + 1];
        double bound = std::sqrt(6.0 / fan_in) / shape.omega0;
        if (l == 0) {
            bound = 1.0 / fan_in;
        } else if (l == n_layers - 1) {
            bound *= 1e-2;
        }
        DenseLayer layer;
        layer.weight.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                layer.weight(r, c) = static_cast<float>((2.0 * unit_uniform(rng) - 1.0) * bound);
            }
        }
        layer.bias = Eigen::VectorXf::Zero(fan_out);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

struct SirenEvaluator::Tape {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre_cos; // cos(a_l)
    std::vector<Eigen::MatrixXd> act;     // sin(a_l)
    std::vector<std::array<Eigen::MatrixXd, 3>> tangent_pre; // omega W_l t_{l-1,k}
    std::vector<std::array<Eigen::MatrixXd, 3>> tangent;     // cos(a_l) * tangent_pre
    Matrix3X u;
    std::array<Matrix3X, 3> jac_cols; // du/dx_k
    bool with_jacobian = false;
};

SirenEvaluator::SirenEvaluator(const MlpParams& params) : params_(&params), omega_(params.omega0)
{
    params.validate();
    for (const auto& L : params.layers) {
        w_.push_back(L.weight.cast<double>());
        b_.push_back(L.bias.cast<double>());
    }
}

void SirenEvaluator::run_chunk(const Matrix3X& x, Tape& tape, bool with_jacobian) const
{
    const int sine = static_cast<int>(w_.size()) - 1;
    const Eigen::Index cols = x.cols();
    tape.input = x;
    tape.with_jacobian = with_jacobian;
    tape.pre_cos.resize(sine);
    tape.act.resize(sine);
    tape.tangent_pre.resize(with_jacobian ? sine : 0);
    tape.tangent.resize(with_jacobian ? sine : 0);

    std::array<Eigen::MatrixXd, 3> unit;
    if (with_jacobian || sine == 0) {
        for (int k = 0; k < 3; ++k) {
            unit[k] = Eigen::MatrixXd::Zero(3, cols);
            unit[k].row(k).setOnes();
        }
    }
    for (int l = 0; l < sine; ++l) {
        Eigen::MatrixXd a(w_[l].rows(), cols);
        if (l == 0) {
            a.noalias() = w_[l] * x;
        } else {
            a.noalias() = w_[l] * tape.act[l - 1];
        }
        a.colwise() += b_[l];
        a *= omega_;
        tape.act[l] = a.array().sin().matrix();
        tape.pre_cos[l] = a.array().cos().matrix();
        if (with_jacobian) {
            for (int k = 0; k < 3; ++k) {
                Eigen::MatrixXd s(w_[l].rows(), cols);
                if (l == 0) {
                    s.noalias() = w_[l] * unit[k];
                } else {
                    s.noalias() = w_[l] * tape.tangent[l - 1][k];
                }
                s *= omega_;
                tape.tangent[l][k] = tape.pre_cos[l].cwiseProduct(s);
                tape.tangent_pre[l][k] = std::move(s);
            }
        }
    }
    tape.u.resize(3, cols);
    // Without sine layers the network is the affine map W x + b.
    tape.u.noalias() = w_.back() * (sine ? tape.act.back() : tape.input);
    tape.u.colwise() += b_.back();
    if (with_jacobian) {
        for (int k = 0; k < 3; ++k) {
            tape.jac_cols[k].resize(3, cols);
            tape.jac_cols[k].noalias() = w_.back() * (sine ? tape.tangent.back()[k] : unit[k]);
        }
    }
}

void SirenEvaluator::backward_chunk(const Tape& tape, const Matrix3X& gu, const Matrix9X* gj, MlpGrads& grads) const
{
    const int sine = static_cast<int>(w_.size()) - 1;
    const bool jac = gj != nullptr && tape.with_jacobian;

    grads.weight.back().noalias() += gu * (sine ? tape.act.back() : tape.input).transpose();
    grads.bias.back() += gu.rowwise().sum();
    Eigen::MatrixXd g_h = w_.back().transpose() * gu;
    std::array<Eigen::MatrixXd, 3> g_t;
    if (jac) {
        for (int k = 0; k < 3; ++k) {
            Matrix3X gk(3, gu.cols());
            for (int a = 0; a < 3; ++a) {
                gk.row(a) = gj->row(3 * a + k);
            }
            if (sine) {
                grads.weight.back().noalias() += gk * tape.tangent.back()[k].transpose();
            } else {
                grads.weight.back().col(k) += gk.rowwise().sum();
            }
            g_t[k] = w_.back().transpose() * gk;
        }
    }

    for (int l = sine - 1; l >= 0; --l) {
        const Eigen::MatrixXd& cosv = tape.pre_cos[l];
        const Eigen::MatrixXd& sinv = tape.act[l];
        Eigen::MatrixXd d_a = g_h.cwiseProduct(cosv);
        std::array<Eigen::MatrixXd, 3> d_s;
        if (jac) {
            for (int k = 0; k < 3; ++k) {
                d_a -= g_t[k].cwiseProduct(sinv).cwiseProduct(tape.tangent_pre[l][k]);
                d_s[k] = g_t[k].cwiseProduct(cosv);
            }
        }
        const Eigen::MatrixXd& h_prev = l == 0 ? tape.input : tape.act[l - 1];
        Eigen::MatrixXd dw = d_a * h_prev.transpose();
        if (jac) {
            for (int k = 0; k < 3; ++k) {
                if (l == 0) {
                    // Input tangent k is the unit vector e_k for every sample.
                    dw.col(k) += d_s[k].rowwise().sum();
                } else {
                    dw.noalias() += d_s[k] * tape.tangent[l - 1][k].transpose();
                }
            }
        }
        grads.weight[l] += omega_ * dw;
        grads.bias[l] += omega_ * d_a.rowwise().sum();
        if (l > 0) {
            g_h = omega_ * (w_[l].transpose() * d_a);
            if (jac) {
                for (int k = 0; k < 3; ++k) {
                    g_t[k] = omega_ * (w_[l].transpose() * d_s[k]);
                }
            }
        }
    }
}

namespace {

Matrix3X padded_chunk(const Matrix3X& x, Eigen::Index start, int chunk)
{
    Matrix3X c = Matrix3X::Zero(3, chunk);
    const Eigen::Index n = std::min<Eigen::Index>(chunk, x.cols() - start);
    c.leftCols(n) = x.middleCols(start, n);
    return c;
}

} // namespace

Matrix3X SirenEvaluator::forward(const Matrix3X& x) const
{
    Matrix3X u(3, x.cols());
    Tape tape;
    for (Eigen::Index s = 0; s < x.cols(); s += chunk) {
        const Eigen::Index n = std::min<Eigen::Index>(chunk, x.cols() - s);
        run_chunk(padded_chunk(x, s, chunk), tape, false);
        u.middleCols(s, n) = tape.u.leftCols(n);
    }
    return u;
}

Vec3 SirenEvaluator::forward(const Vec3& x) const
{
    Matrix3X m(3, 1);
    m.col(0) = x;
    return forward(m).col(0);
}

void SirenEvaluator::forward_jacobian(const Matrix3X& x, Matrix3X& u, Matrix9X& jac) const
{
    u.resize(3, x.cols());
    jac.resize(9, x.cols());
    Tape tape;
    for (Eigen::Index s = 0; s < x.cols(); s += chunk) {
        const Eigen::Index n = std::min<Eigen::Index>(chunk, x.cols() - s);
        run_chunk(padded_chunk(x, s, chunk), tape, true);
        u.middleCols(s, n) = tape.u.leftCols(n);
        for (int a = 0; a < 3; ++a)
            for (int k = 0; k < 3; ++k)
                jac.row(3 * a + k).segment(s, n) = tape.jac_cols[k].row(a).head(n);
    }
}

Mat3 SirenEvaluator::spatial_jacobian(const Vec3& x) const
{
    Matrix3X m(3, 1);
    m.col(0) = x;
    Matrix3X u;
    Matrix9X j;
    forward_jacobian(m, u, j);
    Mat3 out;
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k < 3; ++k)
            out(a, k) = j(3 * a + k, 0);
    return out;
}

void SirenEvaluator::backward(const Matrix3X& x, const Matrix3X& gu, const Matrix9X& gj, MlpGrads& grads) const
{
    const bool jac = gj.cols() > 0;
    if (gu.cols() != x.cols() || (jac && gj.cols() != x.cols())) {
        throw DataError("siren backward: upstream shape does not match batch");
    }
    Tape tape;
    for (Eigen::Index s = 0; s < x.cols(); s += chunk) {
        const Eigen::Index n = std::min<Eigen::Index>(chunk, x.cols() - s);
        run_chunk(padded_chunk(x, s, chunk), tape, jac);
        Matrix3X gu_c = Matrix3X::Zero(3, chunk);
        gu_c.leftCols(n) = gu.middleCols(s, n);
        if (jac) {
            Matrix9X gj_c = Matrix9X::Zero(9, chunk);
            gj_c.leftCols(n) = gj.middleCols(s, n);
            backward_chunk(tape, gu_c, &gj_c, grads);
        } else {
            backward_chunk(tape, gu_c, nullptr, grads);
        }
    }
}

Vec3 forward(const MlpParams& params, const Vec3& x)
{
    return SirenEvaluator(params).forward(x);
}

Matrix3X forward(const MlpParams& params, const Matrix3X& x)
{
    return SirenEvaluator(params).forward(x);
}

Mat3 spatial_jacobian(const MlpParams& params, const Vec3& x)
{
    return SirenEvaluator(params).spatial_jacobian(x);
}

MlpGrads backward_params(const MlpParams& params, const Matrix3X& batch, const Matrix3X& upstream)
{
    MlpGrads g = MlpGrads::zeros_like(params);
    SirenEvaluator(params).backward(batch, upstream, Matrix9X(9, 0), g);
    return g;
}

static_assert(std::endian::native == std::endian::little, "parameter payloads are little-endian");

void save_params(const MlpParams& params, const std::filesystem::path& path)
{
    params.validate();
    nlohmann::json header = {
        {"format", "inrstrain-siren"},
        {"version", params_format_version},
        {"sizes", params.sizes},
        {"omega0", params.omega0},
        {"payload_floats", params.parameter_count()},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << header.dump() << '\n';
    for (const auto& L : params.layers) {
        for (Eigen::Index r = 0; r < L.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < L.weight.cols(); ++c) {
                const float v = L.weight(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
        }
        out.write(reinterpret_cast<const char*>(L.bias.data()), static_cast<std::streamsize>(L.bias.size() * 4));
    }
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

MlpParams load_params(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw LoadError("load error: missing parameter header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("load error: bad parameter header: ") + e.what());
    }
    if (header.value("format", "") != "inrstrain-siren") {
        throw LoadError("load error: not a siren parameter file");
    }
    if (header.value("version", -1) != params_format_version) {
        throw LoadError("load error: unsupported parameter file version");
    }
    MlpParams p;
    try {
        p.sizes = header.at("sizes").get<std::vector<int>>();
        p.omega0 = header.at("omega0").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("load error: ") + e.what());
    }
    if (p.sizes.size() < 3 || p.sizes.front() != 3 || p.sizes.back() != 3) {
        throw LoadError("load error: shape mismatch in layer sizes");
    }
    for (int s : p.sizes) {
        if (s < 1) {
            throw LoadError("load error: shape mismatch in layer sizes");
        }
    }
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        DenseLayer L;
        L.weight.resize(p.sizes[l + 1], p.sizes[l]);
        L.bias.resize(p.sizes[l + 1]);
        p.layers.push_back(std::move(L));
    }
    if (header.value("payload_floats", std::size_t{0}) != p.parameter_count()) {
        throw LoadError("load error: payload size does not match layer sizes");
    }
    const auto read_floats = [&](float* dst, std::size_t n) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * 4));
        if (static_cast<std::size_t>(in.gcount()) != n * 4) {
            throw LoadError("load error: truncated parameter payload");
        }
    };
    for (auto& L : p.layers) {
        std::vector<float> row(L.weight.cols());
        for (Eigen::Index r = 0; r < L.weight.rows(); ++r) {
            read_floats(row.data(), row.size());
            for (Eigen::Index c = 0; c < L.weight.cols(); ++c) {
                L.weight(r, c) = row[c];
            }
        }
        read_floats(L.bias.data(), static_cast<std::size_t>(L.bias.size()));
    }
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw LoadError("load error: trailing bytes after parameter payload");
    }
    try {
        p.validate();
    } catch (const DataError& e) {
        throw LoadError(std::string("load error: ") + e.what());
    }
    return p;
}

} // namespace inrstrain
