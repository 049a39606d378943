// SPDX-License-Identifier: Apache-2.0

#include "vcd/tiny_denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vcd/tensor_io.hpp"

namespace vcd {

void TinyDenoiserParams::validate() const {
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto in = static_cast<Eigen::Index>(input_dim());
    const auto out = static_cast<Eigen::Index>(latent_size());
    if (hidden == 0 || latent_size() == 0 || token_dim == 0)
        throw std::invalid_argument("tiny denoiser dims must be >= 1");
    if (w1.rows() != h || w1.cols() != in || b1.size() != h || w2.rows() != out || w2.cols() != h || b2.size() != out)
        throw std::invalid_argument("tiny denoiser layer shapes are inconsistent");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
        throw std::invalid_argument("tiny denoiser has non-finite parameters");
}

bool TinyDenoiserParams::operator==(const TinyDenoiserParams& o) const {
    return channels == o.channels && height == o.height && width == o.width && token_dim == o.token_dim &&
           hidden == o.hidden && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
}

TinyDenoiserParams init_tiny_params(std::size_t channels, std::size_t height, std::size_t width,
                                    std::size_t token_dim, std::size_t hidden, const RngSpec& rng, double scale) {
    TinyDenoiserParams p;
    p.channels = channels;
    p.height = height;
    p.width = width;
    p.token_dim = token_dim;
    p.hidden = hidden;
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto in = static_cast<Eigen::Index>(p.input_dim());
    const auto out = static_cast<Eigen::Index>(p.latent_size());
    Rng r1(derive(rng, "tiny.w1"));
    Rng r2(derive(rng, "tiny.w2"));
    const double s1 = scale / std::sqrt(static_cast<double>(in));
    const double s2 = scale / std::sqrt(static_cast<double>(h));
    p.w1.resize(h, in);
    for (Eigen::Index i = 0; i < h; ++i)
        for (Eigen::Index j = 0; j < in; ++j)
            p.w1(i, j) = s1 * r1.normal();
    p.w2.resize(out, h);
    for (Eigen::Index i = 0; i < out; ++i)
        for (Eigen::Index j = 0; j < h; ++j)
            p.w2(i, j) = s2 * r2.normal();
    p.b1 = Eigen::VectorXd::Zero(h);
    p.b2 = Eigen::VectorXd::Zero(out);
    return p;
}

Eigen::VectorXd tiny_input(std::span<const double> frame, std::span<const double> pooled, int t, int T) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(frame.size() + pooled.size() + 1));
    Eigen::Index i = 0;
    for (double v : frame)
        x(i++) = v;
    for (double v : pooled)
        x(i++) = v;
    x(i) = static_cast<double>(t) / static_cast<double>(T);
    return x;
}

namespace {

void check_compatible(const VideoTensor& z_t, const ConditionEmbedding& c, const TinyDenoiserParams& p) {
    if (z_t.channels() != p.channels || z_t.height() != p.height || z_t.width() != p.width)
        throw std::invalid_argument("latent " + to_string(z_t.shape()) + " does not match tiny denoiser input (" +
                                    std::to_string(p.channels) + ", " + std::to_string(p.height) + ", " +
                                    std::to_string(p.width) + ")");
    if (c.dim() != p.token_dim)
        throw std::invalid_argument("condition token dim " + std::to_string(c.dim()) + " != " +
                                    std::to_string(p.token_dim));
}

Eigen::MatrixXd frame_inputs(const VideoTensor& z_t, const ConditionEmbedding& c, int t, int T) {
    const auto pooled = c.pooled();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(z_t.shape().frame_size() + pooled.size() + 1),
                      static_cast<Eigen::Index>(z_t.frames()));
    for (std::size_t f = 0; f < z_t.frames(); ++f)
        x.col(static_cast<Eigen::Index>(f)) = tiny_input(z_t.frame(f), pooled, t, T);
    return x;
}

}  // namespace

VideoTensor predict_eps_tiny(const VideoTensor& z_t, const ConditionEmbedding& c, int t, const DiffusionSchedule& s,
                             const TinyDenoiserParams& params) {
    check_compatible(z_t, c, params);
    if (t < 1 || t > s.steps())
        throw std::out_of_range("timestep out of range");
    const Eigen::MatrixXd x = frame_inputs(z_t, c, t, s.steps());
    const Eigen::MatrixXd hidden = ((params.w1 * x).colwise() + params.b1).array().tanh().matrix();
    const Eigen::MatrixXd y = (params.w2 * hidden).colwise() + params.b2;
    return VideoTensor(z_t.shape(), std::vector<double>(y.data(), y.data() + y.size()));
}

TinyDenoiser::TinyDenoiser(TinyDenoiserParams params) : m_params(std::move(params)) {
    m_params.validate();
}

VideoTensor TinyDenoiser::predict_eps(const VideoTensor& z_t, const ConditionEmbedding& c, int t,
                                      const DiffusionSchedule& s, const RegionContext&) const {
    return predict_eps_tiny(z_t, c, t, s, m_params);
}

TokenGradient grad_loss_wrt_embedding(const VideoTensor& z_t, const VideoTensor& eps_target,
                                      const ConditionEmbedding& c, int t, const DiffusionSchedule& s,
                                      const TinyDenoiserParams& params, const RegionMask& mask,
                                      std::size_t first_id_token) {
    check_compatible(z_t, c, params);
    if (eps_target.shape() != z_t.shape())
        throw std::invalid_argument("eps target shape does not match z_t");
    if (mask.frames() != z_t.frames() || mask.height() != z_t.height() || mask.width() != z_t.width())
        throw std::invalid_argument("mask shape does not match z_t");
    if (t < 1 || t > s.steps())
        throw std::out_of_range("timestep out of range");
    if (first_id_token > c.size())
        throw std::out_of_range("first identity token beyond condition length");
    const std::size_t sites = mask.count();
    if (sites == 0)
        throw std::invalid_argument("masked loss is undefined for an all-zero mask");

    const Eigen::MatrixXd x = frame_inputs(z_t, c, t, s.steps());
    const Eigen::MatrixXd hidden = ((params.w1 * x).colwise() + params.b1).array().tanh().matrix();
    const Eigen::MatrixXd y = (params.w2 * hidden).colwise() + params.b2;

    // dL/dy for L = sum_masked (y - eps)^2 / (sites * channels).
    const double norm = 1.0 / static_cast<double>(sites * z_t.channels());
    Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(y.rows(), y.cols());
    double loss = 0.0;
    for (std::size_t f = 0; f < z_t.frames(); ++f) {
        const auto col = static_cast<Eigen::Index>(f);
        for (std::size_t ch = 0; ch < z_t.channels(); ++ch)
            for (std::size_t yy = 0; yy < z_t.height(); ++yy)
                for (std::size_t xx = 0; xx < z_t.width(); ++xx) {
                    if (!mask.at(f, yy, xx))
                        continue;
                    const auto row = static_cast<Eigen::Index>((ch * z_t.height() + yy) * z_t.width() + xx);
                    const double diff = y(row, col) - eps_target.at(f, ch, yy, xx);
                    loss += diff * diff * norm;
                    dy(row, col) = 2.0 * diff * norm;
                }
    }

    const Eigen::MatrixXd dh = params.w2.transpose() * dy;
    const Eigen::MatrixXd da = dh.array() * (1.0 - hidden.array().square());
    const auto n = static_cast<Eigen::Index>(params.latent_size());
    const auto d = static_cast<Eigen::Index>(params.token_dim);
    // Pooled-condition rows of dL/dx, summed over frames sharing the condition.
    const Eigen::VectorXd dpooled = (params.w1.middleCols(n, d).transpose() * da).rowwise().sum();
    const Eigen::VectorXd dtoken = dpooled / static_cast<double>(c.size());

    TokenGradient out;
    out.loss = loss;
    for (std::size_t k = first_id_token; k < c.size(); ++k)
        out.tokens.emplace_back(dtoken.data(), dtoken.data() + dtoken.size());
    return out;
}

ParamGradient loss_and_param_grad(const TinyDenoiserParams& params, const Eigen::MatrixXd& inputs,
                                  const Eigen::MatrixXd& targets, const Eigen::MatrixXd& weights) {
    const Eigen::MatrixXd hidden = ((params.w1 * inputs).colwise() + params.b1).array().tanh().matrix();
    const Eigen::MatrixXd y = (params.w2 * hidden).colwise() + params.b2;
    const Eigen::ArrayXXd diff = (y - targets).array();

    ParamGradient out;
    out.loss = (weights.array() * diff.square()).sum();
    const Eigen::MatrixXd dy = (2.0 * weights.array() * diff).matrix();
    out.grad = params;
    out.grad.w2 = dy * hidden.transpose();
    out.grad.b2 = dy.rowwise().sum();
    const Eigen::MatrixXd da = (params.w2.transpose() * dy).array() * (1.0 - hidden.array().square());
    out.grad.w1 = da * inputs.transpose();
    out.grad.b1 = da.rowwise().sum();
    return out;
}

PretrainResult pretrain_tiny(std::span<const DenoiseExample> dataset, const DiffusionSchedule& s,
                             const PretrainHyper& hyper) {
    if (dataset.empty())
        throw std::invalid_argument("pretrain_tiny: empty dataset");
    const auto& first = dataset.front();
    return pretrain_tiny(dataset, s, hyper,
                         init_tiny_params(first.z0.channels(), first.z0.height(), first.z0.width(),
                                          first.condition.dim(), hyper.hidden, derive(hyper.rng, "pretrain.init"),
                                          hyper.init_scale));
}

PretrainResult pretrain_tiny(std::span<const DenoiseExample> dataset, const DiffusionSchedule& s,
                             const PretrainHyper& hyper, TinyDenoiserParams init) {
    if (dataset.empty())
        throw std::invalid_argument("pretrain_tiny: empty dataset");
    if (hyper.draws_per_example == 0 || hyper.steps < 0)
        throw std::invalid_argument("pretrain_tiny: need draws_per_example >= 1 and steps >= 0");
    init.validate();

    const std::size_t n = init.latent_size();
    const std::size_t columns = dataset.size() * hyper.draws_per_example;
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(init.input_dim()), static_cast<Eigen::Index>(columns));
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns));
    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns));

    Rng t_rng(derive(hyper.rng, "pretrain.t"));
    std::size_t col = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const DenoiseExample& ex = dataset[i];
        if (ex.z0.frames() != 1)
            throw std::invalid_argument("pretrain_tiny: examples must be single frames");
        check_compatible(ex.z0, ex.condition, init);
        if (ex.mask.frames() != 1 || ex.mask.height() != ex.z0.height() || ex.mask.width() != ex.z0.width())
            throw std::invalid_argument("pretrain_tiny: mask shape mismatch in example " + std::to_string(i));
        const std::size_t sites = ex.mask.count();
        if (sites == 0)
            throw std::invalid_argument("pretrain_tiny: example " + std::to_string(i) + " has an empty mask");
        const double w = 1.0 / (static_cast<double>(sites * ex.z0.channels()) * static_cast<double>(columns));
        const auto pooled = ex.condition.pooled();
        for (std::size_t j = 0; j < hyper.draws_per_example; ++j, ++col) {
            const int t = static_cast<int>(t_rng.uniform_int(1, s.steps()));
            const VideoTensor eps = sample_standard_normal(ex.z0.shape(), derive(hyper.rng, "pretrain.eps", i, j));
            const VideoTensor z_t = forward_diffuse(ex.z0, eps, t, s);
            const auto c = static_cast<Eigen::Index>(col);
            inputs.col(c) = tiny_input(z_t.frame(0), pooled, t, s.steps());
            for (std::size_t ch = 0; ch < ex.z0.channels(); ++ch)
                for (std::size_t y = 0; y < ex.z0.height(); ++y)
                    for (std::size_t x = 0; x < ex.z0.width(); ++x) {
                        const auto row = static_cast<Eigen::Index>((ch * ex.z0.height() + y) * ex.z0.width() + x);
                        targets(row, c) = eps.at(0, ch, y, x);
                        weights(row, c) = ex.mask.at(0, y, x) ? w : 0.0;
                    }
        }
    }

    PretrainResult result{std::move(init), {}};
    TinyDenoiserParams& p = result.params;
    for (int step = 0; step <= hyper.steps; ++step) {
        ParamGradient g = loss_and_param_grad(p, inputs, targets, weights);
        if (!std::isfinite(g.loss))
            throw std::runtime_error("pretrain_tiny diverged: non-finite loss at step " + std::to_string(step));
        result.loss_curve.push_back(g.loss);
        if (step == hyper.steps || hyper.lr == 0.0)
            continue;
        p.w1 -= hyper.lr * g.grad.w1;
        p.b1 -= hyper.lr * g.grad.b1;
        p.w2 -= hyper.lr * g.grad.w2;
        p.b2 -= hyper.lr * g.grad.b2;
    }
    return result;
}

std::vector<std::uint8_t> encode_params(const TinyDenoiserParams& p) {
    p.validate();
    ByteWriter w;
    w.magic(kParamsMagic);
    for (std::size_t v : {p.channels, p.height, p.width, p.token_dim, p.hidden, p.input_dim(), p.latent_size()})
        w.u32(static_cast<std::uint32_t>(v));
    auto put = [&w](const auto& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                w.f32(m(i, j));
    };
    put(p.w1);
    put(p.b1);
    put(p.w2);
    put(p.b2);
    return w.bytes();
}

TinyDenoiserParams decode_params(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kParamsMagic);
    TinyDenoiserParams p;
    p.channels = r.u32();
    p.height = r.u32();
    p.width = r.u32();
    p.token_dim = r.u32();
    p.hidden = r.u32();
    const std::size_t at = r.offset();
    const std::size_t in = r.u32();
    const std::size_t out = r.u32();
    if (p.hidden == 0 || p.latent_size() == 0 || p.token_dim == 0 || in != p.input_dim() || out != p.latent_size())
        throw FormatError("inconsistent layer shapes", at);
    const std::size_t expected = (p.hidden * in + p.hidden + out * p.hidden + out) * 4;
    if (r.remaining() != expected)
        throw FormatError("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                              std::to_string(expected),
                          r.offset());
    auto get = [&r](auto& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = r.f32();
    };
    p.w1.resize(static_cast<Eigen::Index>(p.hidden), static_cast<Eigen::Index>(in));
    p.b1.resize(static_cast<Eigen::Index>(p.hidden));
    p.w2.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(p.hidden));
    p.b2.resize(static_cast<Eigen::Index>(out));
    get(p.w1);
    get(p.b1);
    get(p.w2);
    get(p.b2);
    return p;
}

void save_params(const TinyDenoiserParams& p, const std::filesystem::path& path) {
    write_file_atomic(path, encode_params(p));
}

TinyDenoiserParams load_params(const std::filesystem::path& path) {
    return decode_params(read_file(path));
}

}  // namespace vcd
