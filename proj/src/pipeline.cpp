// SPDX-License-Identifier: Apache-2.0

#include "vcd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vcd/imaging.hpp"

namespace vcd {

std::string to_string(StepNoise mode) {
    return mode == StepNoise::Prior ? "prior" : "iid";
}

StepNoise parse_step_noise(const std::string& name) {
    if (name == "prior")
        return StepNoise::Prior;
    if (name == "iid")
        return StepNoise::Iid;
    throw std::invalid_argument("unknown step noise mode '" + name + "' (expected prior or iid)");
}

void StageConfig::validate() const {
    CorrelationSpec{1, gamma}.validate();
    if (!(face_strength >= 0.0 && face_strength <= 1.0))
        throw std::invalid_argument("face strength must lie in [0, 1]");
    if (!(tile_strength >= 0.0 && tile_strength <= 1.0))
        throw std::invalid_argument("tile strength must lie in [0, 1]");
    if (grid_rows == 0 || grid_cols == 0)
        throw std::invalid_argument("tile grid must be at least 1x1");
    if (!(dilation >= 0.0) || !std::isfinite(dilation))
        throw std::invalid_argument("dilation must be a finite value >= 0");
    if (upscale == 0)
        throw std::invalid_argument("upscale factor must be >= 1");
}

VideoTensor BilinearUpscaler::upscale(const VideoTensor& video, std::size_t factor) const {
    if (factor == 0)
        throw std::invalid_argument("upscale factor must be >= 1");
    return resize_bilinear(video, video.height() * factor, video.width() * factor);
}

VideoTensor stage_noise(std::size_t frames, const NoiseWindow& window, double gamma, StepNoise mode,
                        const RngSpec& rng) {
    const double g = mode == StepNoise::Prior ? gamma : 0.0;
    return sample_prior_ar1(CorrelationSpec{frames, g}, window, rng);
}

VideoTensor reverse_chain(VideoTensor z, int t_start, const ConditionEmbedding& c, const StageConfig& cfg,
                          const DiffusionSchedule& s, const Denoiser& denoiser, const RegionContext& region,
                          const NoiseWindow& window, const RngSpec& rng) {
    if (t_start < 0 || t_start > s.steps())
        throw std::out_of_range("chain start " + std::to_string(t_start) + " outside [0, " +
                                std::to_string(s.steps()) + "]");
    const VideoTensor empty;
    for (int t = t_start; t >= 1; --t) {
        const VideoTensor eps_hat = denoiser.predict_eps(z, c, t, s, region);
        if (t > 1) {
            const VideoTensor noise = stage_noise(z.frames(), window, cfg.gamma, cfg.step_noise,
                                                  derive(rng, "step", static_cast<std::uint64_t>(t)));
            z = reverse_step(z, eps_hat, t, s, noise);
        } else {
            z = reverse_step(z, eps_hat, t, s, empty);
        }
    }
    return z;
}

VideoTensor t2v_vcd(const ConditionEmbedding& c, std::size_t f, std::size_t ch, std::size_t h, std::size_t w,
                    const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser) {
    cfg.validate();
    const NoiseWindow window = NoiseWindow::full(ch, h, w);
    VideoTensor z = sample_prior_ar1(CorrelationSpec{f, cfg.gamma}, window, derive(cfg.rng, "t2v.init"));
    const RegionContext region = RegionContext::full(z.shape());
    return reverse_chain(std::move(z), s.steps(), c, cfg, s, denoiser, region, window, derive(cfg.rng, "t2v"));
}

VideoTensor partial_denoise(const VideoTensor& video, double strength, const ConditionEmbedding& c,
                            const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                            const RngSpec& rng) {
    return partial_denoise(video, strength, c, cfg, s, denoiser, rng, RegionContext::full(video.shape()),
                           NoiseWindow::full(video.channels(), video.height(), video.width()));
}

VideoTensor partial_denoise(const VideoTensor& video, double strength, const ConditionEmbedding& c,
                            const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                            const RngSpec& rng, const RegionContext& region, const NoiseWindow& window) {
    if (!(strength >= 0.0 && strength <= 1.0))
        throw std::invalid_argument("strength must lie in [0, 1]");
    if (window.region.width() != static_cast<int>(video.width()) ||
        window.region.height() != static_cast<int>(video.height()) || window.channels != video.channels())
        throw std::invalid_argument("noise window does not match the video");
    const int t_start = strength_to_timestep(strength, s);
    if (t_start == 0)
        return video;
    const VideoTensor eps = sample_prior_ar1(CorrelationSpec{video.frames(), cfg.gamma}, window, derive(rng, "noise"));
    return reverse_chain(forward_diffuse(video, eps, t_start, s), t_start, c, cfg, s, denoiser, region, window, rng);
}

namespace {

std::size_t round_up_even(std::size_t n) {
    return n % 2 == 0 ? n : n + 1;
}

}  // namespace

FaceVcdResult face_vcd_detail(const VideoTensor& video, const MaskProvider& provider, const ConditionEmbedding& c,
                              const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                              const RngSpec& rng) {
    cfg.validate();
    FaceVcdResult out{video, {}, 0, 0};
    for (std::size_t m = 0; m < video.frames(); ++m) {
        Detection det;
        try {
            det = provider.detect(video, m, cfg.face_label);
        } catch (const std::exception& e) {
            throw std::runtime_error("face detection failed on frame " + std::to_string(m) + ": " + e.what());
        }
        BBox box = dilate_bbox(det.box, cfg.dilation, video.height(), video.width());
        box.frame = m;
        out.boxes.push_back(box);
        out.face_height = std::max(out.face_height, static_cast<std::size_t>(box.height()));
        out.face_width = std::max(out.face_width, static_cast<std::size_t>(box.width()));
    }
    out.face_height = round_up_even(out.face_height);
    out.face_width = round_up_even(out.face_width);
    const std::size_t fh = out.face_height * cfg.upscale;
    const std::size_t fw = out.face_width * cfg.upscale;

    std::vector<VideoTensor> faces;
    RegionContext region;
    for (std::size_t m = 0; m < video.frames(); ++m) {
        faces.push_back(resize_bilinear(crop(video, out.boxes[m]), fh, fw));
        region.frames.push_back(FrameRegion{m, video.height(), video.width(), out.boxes[m]});
    }
    const VideoTensor face_video = concat_frames(faces);
    const VideoTensor refined = partial_denoise(face_video, cfg.face_strength, c, cfg, s, denoiser, rng, region,
                                                NoiseWindow::full(video.channels(), fh, fw));
    for (std::size_t m = 0; m < video.frames(); ++m) {
        const BBox& b = out.boxes[m];
        const VideoTensor back = resize_bilinear(refined.frames_slice(m, 1), static_cast<std::size_t>(b.height()),
                                                 static_cast<std::size_t>(b.width()));
        paste_into(back, out.video, b);
    }
    return out;
}

VideoTensor face_vcd(const VideoTensor& video, const MaskProvider& provider, const ConditionEmbedding& c,
                     const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                     const RngSpec& rng) {
    return face_vcd_detail(video, provider, c, cfg, s, denoiser, rng).video;
}

VideoTensor tiled_vcd(const VideoTensor& video, const Upscaler& upscaler, const ConditionEmbedding& c,
                      const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                      const RngSpec& rng) {
    cfg.validate();
    const VideoTensor up = upscaler.upscale(video, cfg.upscale);
    const std::size_t H = up.height();
    const std::size_t W = up.width();
    if (H % cfg.grid_rows != 0 || W % cfg.grid_cols != 0)
        throw std::invalid_argument("tile grid " + std::to_string(cfg.grid_rows) + "x" +
                                    std::to_string(cfg.grid_cols) + " does not divide upscaled frame " +
                                    std::to_string(H) + "x" + std::to_string(W));
    std::vector<Tile> tiles = split_tiles(up, cfg.grid_rows, cfg.grid_cols);
    for (Tile& tile : tiles) {
        RegionContext region;
        for (std::size_t m = 0; m < up.frames(); ++m) {
            BBox b = tile.box;
            b.frame = m;
            region.frames.push_back(FrameRegion{m, H, W, b});
        }
        const NoiseWindow window{up.channels(), H, W, tile.box};
        tile.tensor = partial_denoise(tile.tensor, cfg.tile_strength, c, cfg, s, denoiser, rng, region, window);
    }
    return stitch_tiles(tiles, H, W);
}

PipelineOutput run_full(const ConditionEmbedding& prompt, const IdEmbedding& id, std::size_t f, std::size_t ch,
                        std::size_t h, std::size_t w, const StageConfig& cfg, const DiffusionSchedule& s,
                        const Denoiser& denoiser, const MaskProvider& provider, const Upscaler& upscaler) {
    cfg.validate();
    const ConditionEmbedding c = compose_condition(prompt, id);
    PipelineOutput out;
    PipelineRecord& rec = out.record;
    rec.config = cfg;
    rec.timesteps = s.steps();
    rec.beta_start = s.beta_start();
    rec.beta_end = s.beta_end();
    rec.frames = f;
    rec.channels = ch;
    rec.height = h;
    rec.width = w;
    rec.denoiser_kind = denoiser.kind();
    rec.upscaler_kind = upscaler.kind();
    rec.mask_provider_kind = provider.kind();

    StageConfig stage1 = cfg;
    stage1.rng = derive(cfg.rng, "stage.t2v");
    const RngSpec stage2 = derive(cfg.rng, "stage.face");
    const RngSpec stage3 = derive(cfg.rng, "stage.tiled");
    rec.stage1_rng_stream = stage1.rng.stream;
    rec.stage2_rng_stream = stage2.stream;
    rec.stage3_rng_stream = stage3.stream;

    try {
        out.stage1 = t2v_vcd(c, f, ch, h, w, stage1, s, denoiser);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage t2v_vcd: ") + e.what());
    }
    rec.condition_fingerprints.push_back(c.fingerprint());
    try {
        out.stage2 = face_vcd(out.stage1, provider, c, cfg, s, denoiser, stage2);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage face_vcd: ") + e.what());
    }
    rec.condition_fingerprints.push_back(c.fingerprint());
    try {
        out.stage3 = tiled_vcd(out.stage2, upscaler, c, cfg, s, denoiser, stage3);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage tiled_vcd: ") + e.what());
    }
    rec.condition_fingerprints.push_back(c.fingerprint());
    return out;
}

}  // namespace vcd
