// SPDX-License-Identifier: Apache-2.0

#include "vcd/id_module.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vcd/tensor_io.hpp"

namespace vcd {

double masked_loss(const VideoTensor& eps_hat, const VideoTensor& eps, const RegionMask& mask) {
    if (eps_hat.shape() != eps.shape())
        throw std::invalid_argument("masked_loss: shape mismatch " + to_string(eps_hat.shape()) + " vs " +
                                    to_string(eps.shape()));
    if (mask.frames() != eps.frames() || mask.height() != eps.height() || mask.width() != eps.width())
        throw std::invalid_argument("masked_loss: mask does not match tensor");
    const std::size_t sites = mask.count();
    if (sites == 0)
        throw std::invalid_argument("masked_loss: all-zero mask");
    double sum = 0.0;
    for (std::size_t f = 0; f < eps.frames(); ++f)
        for (std::size_t c = 0; c < eps.channels(); ++c)
            for (std::size_t y = 0; y < eps.height(); ++y)
                for (std::size_t x = 0; x < eps.width(); ++x) {
                    if (!mask.at(f, y, x))
                        continue;
                    const double d = eps_hat.at(f, c, y, x) - eps.at(f, c, y, x);
                    sum += d * d;
                }
    return sum / static_cast<double>(sites * eps.channels());
}

IdEmbedding::IdEmbedding(std::size_t k, std::size_t d, std::vector<double> values)
    : m_k(k), m_d(d), m_values(std::move(values)) {
    if (k == 0 || d == 0)
        throw std::invalid_argument("identity embedding needs k >= 1 and d >= 1");
    if (m_values.size() != k * d)
        throw std::invalid_argument("identity embedding has " + std::to_string(m_values.size()) +
                                    " values, expected k*d = " + std::to_string(k * d));
    for (double v : m_values) {
        if (!std::isfinite(v))
            throw std::invalid_argument("identity embedding contains non-finite values");
    }
}

ConditionEmbedding compose_condition(const ConditionEmbedding& prompt, const IdEmbedding& id) {
    return prompt.concat(id.as_condition());
}

std::vector<std::uint8_t> encode_embedding(const IdEmbedding& e) {
    ByteWriter w;
    w.magic(kEmbeddingMagic);
    w.u32(static_cast<std::uint32_t>(e.tokens()));
    w.u32(static_cast<std::uint32_t>(e.dim()));
    for (double v : e.values())
        w.f32(v);
    return w.bytes();
}

IdEmbedding decode_embedding(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kEmbeddingMagic);
    const std::size_t k = r.u32();
    const std::size_t at = r.offset();
    const std::size_t d = r.u32();
    if (k == 0 || d == 0)
        throw FormatError("token count and dimension must be >= 1", at);
    if (r.remaining() != k * d * 4)
        throw FormatError("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                              std::to_string(k * d * 4),
                          r.offset());
    std::vector<double> values(k * d);
    for (auto& v : values)
        v = r.f32();
    return IdEmbedding(k, d, std::move(values));
}

void save_embedding(const IdEmbedding& e, const std::filesystem::path& path) {
    write_file_atomic(path, encode_embedding(e));
}

IdEmbedding load_embedding(const std::filesystem::path& path) {
    return decode_embedding(read_file(path));
}

std::vector<TrainingDraw> draw_training_batch(const RngSpec& rng, int step, std::size_t num_samples,
                                              std::size_t batch, int T) {
    Rng r(derive(rng, "ti.step", static_cast<std::uint64_t>(step)));
    std::vector<TrainingDraw> draws(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        draws[b].sample = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(num_samples) - 1));
        draws[b].t = static_cast<int>(r.uniform_int(1, T));
        draws[b].eps_stream = derive(rng, "ti.eps", static_cast<std::uint64_t>(step), b);
    }
    return draws;
}

IdEmbedding init_id_embedding(std::size_t k, std::size_t d, double init_std, const RngSpec& rng) {
    Rng r(derive(rng, "ti.init"));
    std::vector<double> values(k * d);
    for (auto& v : values)
        v = init_std * r.normal();
    return IdEmbedding(k, d, std::move(values));
}

namespace {

void check_samples(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone) {
    if (samples.empty())
        throw std::invalid_argument("identity training needs at least one sample");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.image.frames() != 1)
            throw std::invalid_argument("training sample " + std::to_string(i) + " must be a single frame");
        if (s.mask.frames() != 1 || s.mask.height() != s.image.height() || s.mask.width() != s.image.width())
            throw std::invalid_argument("training sample " + std::to_string(i) + " mask does not match its image");
        if (s.mask.count() == 0)
            throw std::invalid_argument("training sample " + std::to_string(i) + " has an empty mask");
        if (s.base_condition.dim() != backbone.token_dim)
            throw std::invalid_argument("training sample " + std::to_string(i) + " token dim mismatch");
    }
}

}  // namespace

TiResult train_id_tokens(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone,
                         const DiffusionSchedule& s, const TiConfig& cfg, const RngSpec& rng) {
    return train_id_tokens(samples, backbone, s, cfg, rng,
                           init_id_embedding(cfg.tokens, backbone.token_dim, cfg.init_std, rng));
}

TiResult train_id_tokens(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone,
                         const DiffusionSchedule& s, const TiConfig& cfg, const RngSpec& rng, IdEmbedding init) {
    check_samples(samples, backbone);
    backbone.validate();
    if (cfg.batch == 0 || cfg.steps < 0)
        throw std::invalid_argument("identity training needs batch >= 1 and steps >= 0");
    if (init.dim() != backbone.token_dim)
        throw std::invalid_argument("initial embedding dim does not match the backbone");

    TiResult result{init, std::move(init), {}};
    IdEmbedding& id = result.embedding;
    const std::size_t d = id.dim();
    std::vector<double> grad(id.tokens() * d);
    for (int step = 0; step < cfg.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (const TrainingDraw& draw : draw_training_batch(rng, step, samples.size(), cfg.batch, s.steps())) {
            const TrainingSample& sample = samples[draw.sample];
            const VideoTensor eps = sample_standard_normal(sample.image.shape(), draw.eps_stream);
            const VideoTensor z_t = forward_diffuse(sample.image, eps, draw.t, s);
            const ConditionEmbedding cond = compose_condition(sample.base_condition, id);
            const TokenGradient g = grad_loss_wrt_embedding(z_t, eps, cond, draw.t, s, backbone, sample.mask,
                                                            sample.base_condition.size());
            loss += g.loss;
            for (std::size_t k = 0; k < g.tokens.size(); ++k)
                for (std::size_t j = 0; j < d; ++j)
                    grad[k * d + j] += g.tokens[k][j];
        }
        const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
        loss *= inv_batch;
        if (!std::isfinite(loss))
            throw std::runtime_error("identity training: non-finite loss at step " + std::to_string(step));
        result.loss_curve.push_back(loss);
        auto values = id.values();
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] -= cfg.lr * grad[i] * inv_batch;
    }
    return result;
}

double evaluate_id_loss(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone,
                        const DiffusionSchedule& s, const IdEmbedding& id, const RngSpec& rng, std::size_t draws) {
    check_samples(samples, backbone);
    if (draws == 0)
        throw std::invalid_argument("evaluate_id_loss needs draws >= 1");
    Rng t_rng(derive(rng, "ti.eval.t"));
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const TrainingSample& sample = samples[i];
        const ConditionEmbedding cond = compose_condition(sample.base_condition, id);
        for (std::size_t j = 0; j < draws; ++j) {
            const int t = static_cast<int>(t_rng.uniform_int(1, s.steps()));
            const VideoTensor eps = sample_standard_normal(sample.image.shape(), derive(rng, "ti.eval.eps", i, j));
            const VideoTensor z_t = forward_diffuse(sample.image, eps, t, s);
            total += masked_loss(predict_eps_tiny(z_t, cond, t, s, backbone), eps, sample.mask);
        }
    }
    return total / static_cast<double>(samples.size() * draws);
}

RegionMask rasterize_subject(const PlacedSubject& subject, std::size_t height, std::size_t width) {
    RegionMask mask(1, height, width);
    for (std::size_t y = 0; y < height; ++y) {
        const double py = static_cast<double>(y) + 0.5 - subject.cy;
        for (std::size_t x = 0; x < width; ++x) {
            const double px = static_cast<double>(x) + 0.5 - subject.cx;
            bool inside = false;
            if (subject.shape == SubjectShape::Disk)
                inside = px * px + py * py <= subject.rx * subject.rx;
            else
                inside = std::abs(px) <= subject.rx && std::abs(py) <= subject.ry;
            mask.set(0, y, x, inside);
        }
    }
    return mask;
}

SyntheticMaskProvider::SyntheticMaskProvider(SceneSpec scene) : m_scene(std::move(scene)) {
    if (m_scene.height == 0 || m_scene.width == 0)
        throw std::invalid_argument("scene needs non-zero dimensions");
}

Detection SyntheticMaskProvider::detect(const VideoTensor& video, std::size_t frame, std::string_view label) const {
    if (frame >= m_scene.frames.size() || frame >= video.frames())
        throw std::out_of_range("no scene description for frame " + std::to_string(frame));
    const auto& subjects = m_scene.frames[frame];
    const auto it = std::find_if(subjects.begin(), subjects.end(), [&](const PlacedSubject& s) { return s.label == label; });
    if (it == subjects.end())
        throw std::runtime_error("subject '" + std::string(label) + "' absent from frame " + std::to_string(frame));

    const double sy = static_cast<double>(video.height()) / static_cast<double>(m_scene.height);
    const double sx = static_cast<double>(video.width()) / static_cast<double>(m_scene.width);
    PlacedSubject scaled = *it;
    scaled.cx *= sx;
    scaled.cy *= sy;
    if (scaled.shape == SubjectShape::Disk) {
        if (sx != sy)
            throw std::invalid_argument("disk subjects need uniform scaling");
        scaled.rx *= sx;
    } else {
        scaled.rx *= sx;
        scaled.ry *= sy;
    }

    Detection det{BBox{frame, 0, 0, 0, 0}, rasterize_subject(scaled, video.height(), video.width())};
    int x0 = static_cast<int>(video.width()), y0 = static_cast<int>(video.height()), x1 = -1, y1 = -1;
    for (std::size_t y = 0; y < video.height(); ++y)
        for (std::size_t x = 0; x < video.width(); ++x) {
            if (!det.mask.at(0, y, x))
                continue;
            x0 = std::min(x0, static_cast<int>(x));
            y0 = std::min(y0, static_cast<int>(y));
            x1 = std::max(x1, static_cast<int>(x) + 1);
            y1 = std::max(y1, static_cast<int>(y) + 1);
        }
    if (x1 < 0)
        throw std::runtime_error("subject '" + std::string(label) + "' covers no pixel in frame " +
                                 std::to_string(frame));
    det.box = BBox{frame, x0, y0, x1, y1};
    return det;
}

std::unique_ptr<MaskProvider> synthetic_mask_provider(SceneSpec scene) {
    return std::make_unique<SyntheticMaskProvider>(std::move(scene));
}

}  // namespace vcd
