// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vcd/condition.hpp"
#include "vcd/denoiser.hpp"
#include "vcd/id_module.hpp"
#include "vcd/noise_prior.hpp"
#include "vcd/rng.hpp"
#include "vcd/schedule.hpp"
#include "vcd/tensor.hpp"

namespace vcd {

/// Distribution of the fresh noise injected at each ancestral step.
enum class StepNoise {
    Prior,  // frame-correlated, same gamma as the initial noise
    Iid,
};

std::string to_string(StepNoise mode);
StepNoise parse_step_noise(const std::string& name);

struct StageConfig {
    double gamma = 0.1;
    double face_strength = 0.8;
    double tile_strength = 0.2;
    std::size_t grid_rows = 2;
    std::size_t grid_cols = 2;
    double dilation = 0.3;
    std::size_t upscale = 2;
    std::string face_label = "face";
    StepNoise step_noise = StepNoise::Prior;
    std::string denoiser = "analytic";
    RngSpec rng{0, 0};

    void validate() const;
};

/// Deterministic stand-in for a learned super-resolution model.
class Upscaler {
public:
    virtual ~Upscaler() = default;
    virtual VideoTensor upscale(const VideoTensor& video, std::size_t factor) const = 0;
    virtual std::string kind() const = 0;
};

class BilinearUpscaler final : public Upscaler {
public:
    VideoTensor upscale(const VideoTensor& video, std::size_t factor) const override;
    std::string kind() const override { return "bilinear"; }
};

/// Frame-correlated noise for a window of a larger canvas; i.i.d. when the
/// mode is Iid or gamma is 0.
VideoTensor stage_noise(std::size_t frames, const NoiseWindow& window, double gamma, StepNoise mode,
                        const RngSpec& rng);

/// Ancestral chain from timestep t_start down to 1, starting at z. Step
/// noise for timestep t is stage_noise(..., derive(rng, "step", t)).
VideoTensor reverse_chain(VideoTensor z, int t_start, const ConditionEmbedding& c, const StageConfig& cfg,
                          const DiffusionSchedule& s, const Denoiser& denoiser, const RegionContext& region,
                          const NoiseWindow& window, const RngSpec& rng);

/// Stage 1: prior-initialized z_T, full chain. Uses cfg.rng.
VideoTensor t2v_vcd(const ConditionEmbedding& c, std::size_t f, std::size_t ch, std::size_t h, std::size_t w,
                    const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser);

/// Noise to t_start = strength_to_timestep(strength) with prior noise, then
/// denoise back. strength 0 returns the input unchanged.
VideoTensor partial_denoise(const VideoTensor& video, double strength, const ConditionEmbedding& c,
                            const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                            const RngSpec& rng);
/// As above for a tensor covering `region`, with noise addressed by `window`.
VideoTensor partial_denoise(const VideoTensor& video, double strength, const ConditionEmbedding& c,
                            const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                            const RngSpec& rng, const RegionContext& region, const NoiseWindow& window);

struct FaceVcdResult {
    VideoTensor video;
    std::vector<BBox> boxes;  // dilated box per frame
    std::size_t face_height = 0;
    std::size_t face_width = 0;  // face-video frame size before upscaling
};

/// Stage 2: per-frame face crops are stacked, upscaled, partially denoised
/// as one video, resized back and pasted. Pixels outside the dilated boxes
/// are copied unchanged.
FaceVcdResult face_vcd_detail(const VideoTensor& video, const MaskProvider& provider, const ConditionEmbedding& c,
                              const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                              const RngSpec& rng);
VideoTensor face_vcd(const VideoTensor& video, const MaskProvider& provider, const ConditionEmbedding& c,
                     const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                     const RngSpec& rng);

/// Stage 3: upscale, split into the grid, partially denoise each tile,
/// stitch. Tile noise is the matching window of a full-canvas draw.
VideoTensor tiled_vcd(const VideoTensor& video, const Upscaler& upscaler, const ConditionEmbedding& c,
                      const StageConfig& cfg, const DiffusionSchedule& s, const Denoiser& denoiser,
                      const RngSpec& rng);

/// Everything needed to rerun a pipeline invocation.
struct PipelineRecord {
    StageConfig config;
    int timesteps = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::size_t frames = 0, channels = 0, height = 0, width = 0;
    std::string denoiser_kind;
    std::string upscaler_kind;
    std::string mask_provider_kind;
    std::string face_noise = "prior-correlated";
    std::uint64_t stage1_rng_stream = 0;
    std::uint64_t stage2_rng_stream = 0;
    std::uint64_t stage3_rng_stream = 0;
    /// Fingerprint of the condition consumed by each stage.
    std::vector<std::uint64_t> condition_fingerprints;
};

struct PipelineOutput {
    VideoTensor stage1;
    VideoTensor stage2;
    VideoTensor stage3;
    PipelineRecord record;
};

/// Runs the three stages with condition = prompt ++ id tokens.
/// Errors are rethrown prefixed with the failing stage name.
PipelineOutput run_full(const ConditionEmbedding& prompt, const IdEmbedding& id, std::size_t f, std::size_t ch,
                        std::size_t h, std::size_t w, const StageConfig& cfg, const DiffusionSchedule& s,
                        const Denoiser& denoiser, const MaskProvider& provider, const Upscaler& upscaler);

}  // namespace vcd
