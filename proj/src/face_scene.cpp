// SPDX-License-Identifier: Apache-2.0

#include "vcd/face_scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vcd/schedule.hpp"

namespace vcd {

void FaceSceneConfig::validate() const {
    if (height == 0 || width == 0 || frames == 0 || channels == 0)
        throw std::invalid_argument("face scene dims must be >= 1");
    if (!(radius > 0.0))
        throw std::invalid_argument("face radius must be positive");
    if (label.empty())
        throw std::invalid_argument("face label must not be empty");
}

std::pair<double, double> face_center(const FaceSceneConfig& cfg, std::size_t frame) {
    const double a = cfg.frames > 1 ? static_cast<double>(frame) / static_cast<double>(cfg.frames - 1) : 0.0;
    return {cfg.start_u + a * (cfg.end_u - cfg.start_u), cfg.start_v + a * (cfg.end_v - cfg.start_v)};
}

FaceSceneMean::FaceSceneMean(FaceSceneConfig cfg, std::vector<double> identity_key)
    : m_cfg(std::move(cfg)), m_key(std::move(identity_key)) {
    m_cfg.validate();
    if (m_key.empty())
        throw std::invalid_argument("identity key must not be empty");
}

double FaceSceneMean::identity_weight(const ConditionEmbedding& c) const {
    if (c.dim() != m_key.size())
        throw std::invalid_argument("condition dim " + std::to_string(c.dim()) + " does not match identity key dim " +
                                    std::to_string(m_key.size()));
    const auto p = c.pooled();
    double dot = 0.0, np = 0.0, nk = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        dot += p[i] * m_key[i];
        np += p[i] * p[i];
        nk += m_key[i] * m_key[i];
    }
    if (np == 0.0 || nk == 0.0)
        return 0.0;
    return std::clamp(dot / std::sqrt(np * nk), 0.0, 1.0);
}

double FaceSceneMean::texture(std::size_t channel, double lu, double lv) const {
    using std::numbers::pi;
    const double ch = static_cast<double>(channel);
    return m_cfg.face_amplitude * (0.6 * std::cos(pi * (2.2 * lu + 0.5 * ch)) * std::cos(pi * 1.6 * lv) +
                                   0.4 * std::sin(pi * (3.1 * lv - 2.3 * lu + 0.3 * ch)));
}

double FaceSceneMean::value(const ConditionEmbedding& c, std::size_t frame, std::size_t channel, double u,
                            double v) const {
    using std::numbers::pi;
    const auto [cu, cv] = face_center(m_cfg, frame);
    const double lu = (u - cu) / m_cfg.radius;
    const double lv = (v - cv) * static_cast<double>(m_cfg.height) / (static_cast<double>(m_cfg.width) * m_cfg.radius);
    if (lu * lu + lv * lv <= 1.0)
        return identity_weight(c) * texture(channel, lu, lv);
    const double ch = static_cast<double>(channel);
    return m_cfg.background_amplitude * std::sin(2.0 * pi * u + 0.3 + ch) * std::cos(1.4 * pi * v);
}

SceneSpec face_scene_spec(const FaceSceneConfig& cfg) {
    cfg.validate();
    SceneSpec scene{cfg.height, cfg.width, {}};
    const double w = static_cast<double>(cfg.width);
    const double h = static_cast<double>(cfg.height);
    for (std::size_t m = 0; m < cfg.frames; ++m) {
        const auto [cu, cv] = face_center(cfg, m);
        scene.frames.push_back({PlacedSubject{cfg.label, SubjectShape::Disk, cu * w, cv * h, cfg.radius * w,
                                              cfg.radius * w}});
    }
    return scene;
}

VideoTensor render_face_reference(const FaceSceneMean& mean, std::size_t size) {
    if (size == 0)
        throw std::invalid_argument("reference size must be >= 1");
    const FaceSceneConfig& cfg = mean.config();
    const SyntheticMaskProvider provider(face_scene_spec(cfg));
    const VideoTensor canvas(Shape{1, cfg.channels, cfg.height, cfg.width});
    const Detection det = provider.detect(canvas, 0, cfg.label);
    const FrameRegion region{0, cfg.height, cfg.width, det.box};
    const ConditionEmbedding key(mean.identity_key().size(), mean.identity_key());
    VideoTensor ref(Shape{1, cfg.channels, size, size});
    for (std::size_t ch = 0; ch < cfg.channels; ++ch)
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x)
                ref.at(0, ch, y, x) = mean.value(key, 0, ch, region.u(x, size), region.v(y, size));
    return ref;
}

RegionMask central_disk_mask(std::size_t height, std::size_t width, double radius_fraction) {
    const PlacedSubject disk{"subject", SubjectShape::Disk, 0.5 * static_cast<double>(width),
                             0.5 * static_cast<double>(height), radius_fraction * static_cast<double>(width), 0.0};
    return rasterize_subject(disk, height, width);
}

std::vector<DenoiseExample> face_pretrain_dataset(const IdentityToyConfig& cfg, const ConditionEmbedding& prompt,
                                                  const RngSpec& rng) {
    FaceSceneConfig scene;
    scene.height = cfg.height;
    scene.width = cfg.width;
    scene.channels = cfg.channels;
    scene.frames = cfg.pretrain_frames;
    const RegionMask full = RegionMask::full(1, cfg.height, cfg.width);
    const Shape shape{1, cfg.channels, cfg.height, cfg.width};
    std::vector<DenoiseExample> out;
    for (std::size_t i = 0; i < cfg.pretrain_identities; ++i) {
        Rng r(derive(rng, "toy.identity", i));
        std::vector<double> key(cfg.token_dim);
        for (auto& k : key)
            k = r.normal();
        const FaceSceneMean mean(scene, key);
        const ConditionEmbedding cond = prompt.concat(ConditionEmbedding(cfg.token_dim, key));
        for (std::size_t m = 0; m < cfg.pretrain_frames; ++m) {
            VideoTensor z0(shape);
            RegionContext ctx;
            ctx.frames.push_back(
                FrameRegion{m, cfg.height, cfg.width,
                            BBox{0, 0, 0, static_cast<int>(cfg.width), static_cast<int>(cfg.height)}});
            // Rendered against the bare key so the texture has full weight.
            const ConditionEmbedding key_only(cfg.token_dim, key);
            for (std::size_t ch = 0; ch < cfg.channels; ++ch)
                for (std::size_t y = 0; y < cfg.height; ++y)
                    for (std::size_t x = 0; x < cfg.width; ++x)
                        z0.at(0, ch, y, x) = mean.value(key_only, m, ch, ctx.frames[0].u(x, cfg.width),
                                                        ctx.frames[0].v(y, cfg.height));
            out.push_back(DenoiseExample{std::move(z0), full, cond});
        }
    }
    return out;
}

VideoTensor sample_tiny(const TinyDenoiserParams& params, const ConditionEmbedding& c, const DiffusionSchedule& s,
                        const RngSpec& rng, double clip) {
    if (!(clip > 0.0))
        throw std::invalid_argument("sample_tiny: clip bound must be positive");
    const Shape shape{1, params.channels, params.height, params.width};
    VideoTensor z = sample_standard_normal(shape, derive(rng, "toy.init"));
    for (int t = s.steps(); t >= 1; --t) {
        const VideoTensor eps = predict_eps_tiny(z, c, t, s, params);
        const double abar = s.alpha_bar(t);
        const double abar_prev = s.alpha_bar(t - 1);
        const double c0 = std::sqrt(abar_prev) * s.beta(t) / (1.0 - abar);
        const double ct = std::sqrt(s.alpha(t)) * (1.0 - abar_prev) / (1.0 - abar);
        const double sigma = std::sqrt(s.posterior_variance(t));
        const VideoTensor noise =
            t > 1 ? sample_standard_normal(shape, derive(rng, "toy.step", static_cast<std::uint64_t>(t)))
                  : VideoTensor(shape, 0.0);
        auto zd = z.data();
        const auto ed = eps.data();
        const auto nd = noise.data();
        for (std::size_t i = 0; i < zd.size(); ++i) {
            const double x0 = std::clamp((zd[i] - std::sqrt(1.0 - abar) * ed[i]) / std::sqrt(abar), -clip, clip);
            zd[i] = c0 * x0 + ct * zd[i] + (t > 1 ? sigma * nd[i] : 0.0);
        }
    }
    return z;
}

IdentityToy make_identity_toy(const IdentityToyConfig& cfg, const DiffusionSchedule& s, const RngSpec& rng) {
    if (cfg.samples == 0 || cfg.prompt_tokens == 0 || cfg.planted_tokens == 0)
        throw std::invalid_argument("identity toy needs samples, prompt tokens and planted tokens");
    IdentityToy toy;
    {
        Rng r(derive(rng, "toy.prompt"));
        std::vector<double> values(cfg.prompt_tokens * cfg.token_dim);
        for (auto& v : values)
            v = r.normal();
        toy.prompt = ConditionEmbedding(cfg.token_dim, std::move(values));
    }
    toy.planted = init_id_embedding(cfg.planted_tokens, cfg.token_dim, cfg.planted_std, derive(rng, "toy.planted"));

    const auto dataset = face_pretrain_dataset(cfg, toy.prompt, derive(rng, "toy.pretrain.data"));
    PretrainHyper hyper = cfg.pretrain;
    hyper.rng = derive(rng, "toy.pretrain");
    PretrainResult pre = pretrain_tiny(dataset, s, hyper);
    toy.backbone = decode_params(encode_params(pre.params));
    toy.pretrain_curve = std::move(pre.loss_curve);

    const ConditionEmbedding planted_cond = compose_condition(toy.prompt, toy.planted);
    const RegionMask mask = central_disk_mask(cfg.height, cfg.width, cfg.mask_radius);
    for (std::size_t i = 0; i < cfg.samples; ++i)
        toy.samples.push_back(
            TrainingSample{sample_tiny(toy.backbone, planted_cond, s, derive(rng, "toy.sample", i)), mask, toy.prompt});
    return toy;
}

}  // namespace vcd
