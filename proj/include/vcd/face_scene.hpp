// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vcd/condition.hpp"
#include "vcd/denoiser.hpp"
#include "vcd/id_module.hpp"
#include "vcd/rng.hpp"
#include "vcd/tiny_denoiser.hpp"

namespace vcd {

/// Synthetic benchmark scene: a static smooth background and a textured
/// face disk that moves linearly from `start` to `end` over the clip.
/// Positions are normalized to [0, 1]; the radius is a fraction of the width.
struct FaceSceneConfig {
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t frames = 16;
    std::size_t channels = 1;
    double radius = 0.22;
    double start_u = 0.35, start_v = 0.45;
    double end_u = 0.65, end_v = 0.55;
    double face_amplitude = 1.0;
    double background_amplitude = 0.4;
    std::string label = "face";

    void validate() const;
};

/// Normalized face centre (u, v) in frame m.
std::pair<double, double> face_center(const FaceSceneConfig& cfg, std::size_t frame);

/// Mean field of the scene. Inside the face disk the mean blends a generic
/// (flat) face with the identity texture, weighted by the clipped cosine
/// between the pooled condition and `identity_key`.
class FaceSceneMean final : public MeanField {
public:
    FaceSceneMean(FaceSceneConfig cfg, std::vector<double> identity_key);

    double value(const ConditionEmbedding& c, std::size_t frame, std::size_t channel, double u,
                 double v) const override;
    std::string kind() const override { return "face-scene"; }

    double identity_weight(const ConditionEmbedding& c) const;
    /// Texture in face-local coordinates (lu, lv), unit disk.
    double texture(std::size_t channel, double lu, double lv) const;

    const FaceSceneConfig& config() const { return m_cfg; }
    const std::vector<double>& identity_key() const { return m_key; }

private:
    FaceSceneConfig m_cfg;
    std::vector<double> m_key;
};

/// Face geometry in pixel units of the base resolution, for the mask provider.
SceneSpec face_scene_spec(const FaceSceneConfig& cfg);

/// The identity texture over the tight face box of frame 0, evaluated with
/// full identity weight and rendered at size x size.
VideoTensor render_face_reference(const FaceSceneMean& mean, std::size_t size);

/// Toy identity task for the tiny backbone: fixed prompt tokens, a planted
/// k-token embedding, a pretrained backbone and images sampled from the
/// backbone under prompt ++ planted tokens.
struct IdentityToyConfig {
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t channels = 1;
    std::size_t token_dim = 16;
    std::size_t prompt_tokens = 3;
    std::size_t planted_tokens = 4;
    double planted_std = 0.5;
    std::size_t samples = 8;
    double mask_radius = 0.35;  // fraction of the width
    // Backbone pretraining on face-scene frames with random identities.
    std::size_t pretrain_identities = 4;
    std::size_t pretrain_frames = 4;
    PretrainHyper pretrain{64, 0.2, 1000, 8, 1.0, RngSpec{0, 0}};
};

struct IdentityToy {
    ConditionEmbedding prompt;
    IdEmbedding planted;
    TinyDenoiserParams backbone;
    std::vector<TrainingSample> samples;
    std::vector<double> pretrain_curve;
};

/// Central disk mask used by the identity toy.
RegionMask central_disk_mask(std::size_t height, std::size_t width, double radius_fraction);

/// Pretraining set: face-scene frames at the toy resolution, each paired with
/// prompt ++ (its identity key as a single token).
std::vector<DenoiseExample> face_pretrain_dataset(const IdentityToyConfig& cfg, const ConditionEmbedding& prompt,
                                                  const RngSpec& rng);

/// One ancestral sample (t = T..1) of the tiny backbone in the x0
/// parameterization: the implied x0 estimate is clipped to [-clip, clip]
/// before forming the posterior mean. Without clipping this is the plain
/// reverse step.
VideoTensor sample_tiny(const TinyDenoiserParams& params, const ConditionEmbedding& c, const DiffusionSchedule& s,
                        const RngSpec& rng, double clip = 2.0);

/// Builds the full toy. The backbone weights are rounded through float32 so
/// that a saved and reloaded backbone is identical to the in-memory one.
IdentityToy make_identity_toy(const IdentityToyConfig& cfg, const DiffusionSchedule& s, const RngSpec& rng);

}  // namespace vcd
