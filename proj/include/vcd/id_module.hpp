// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vcd/condition.hpp"
#include "vcd/rng.hpp"
#include "vcd/schedule.hpp"
#include "vcd/tensor.hpp"
#include "vcd/tiny_denoiser.hpp"

namespace vcd {

/// Mean squared error over masked spatial sites (all channels). A full mask
/// gives the plain MSE. Values outside the mask are never read.
double masked_loss(const VideoTensor& eps_hat, const VideoTensor& eps, const RegionMask& mask);

/// k learned identity tokens of dimension d.
class IdEmbedding {
public:
    IdEmbedding() = default;
    IdEmbedding(std::size_t k, std::size_t d, std::vector<double> values);

    std::size_t tokens() const { return m_k; }
    std::size_t dim() const { return m_d; }
    std::span<const double> values() const { return m_values; }
    std::span<double> values() { return m_values; }

    ConditionEmbedding as_condition() const { return ConditionEmbedding(m_d, m_values); }

    bool operator==(const IdEmbedding&) const = default;

private:
    std::size_t m_k = 0;
    std::size_t m_d = 0;
    std::vector<double> m_values;
};

/// Base condition followed by the identity tokens.
ConditionEmbedding compose_condition(const ConditionEmbedding& prompt, const IdEmbedding& id);

inline constexpr std::string_view kEmbeddingMagic = "VCDE0001";
/// VCDE: magic, u32 k, u32 d, then k*d float32 (little-endian).
std::vector<std::uint8_t> encode_embedding(const IdEmbedding& e);
IdEmbedding decode_embedding(std::span<const std::uint8_t> bytes);
void save_embedding(const IdEmbedding& e, const std::filesystem::path& path);
IdEmbedding load_embedding(const std::filesystem::path& path);

struct TrainingSample {
    VideoTensor image;  // one frame
    RegionMask mask;
    ConditionEmbedding base_condition;
};

struct TiConfig {
    std::size_t tokens = 4;
    double lr = 1e-3;
    std::size_t batch = 4;
    int steps = 200;
    double init_std = 0.02;
};

struct TiResult {
    IdEmbedding initial;
    IdEmbedding embedding;
    std::vector<double> loss_curve;  // batch loss at each step, before its update
};

/// Per-step sample draws. Step s uses stream derive(rng, "ti.step", s) for the
/// batch indices and timesteps, and derive(rng, "ti.eps", s, b) for the noise
/// of batch slot b.
struct TrainingDraw {
    std::size_t sample = 0;
    int t = 1;
    RngSpec eps_stream;
};
std::vector<TrainingDraw> draw_training_batch(const RngSpec& rng, int step, std::size_t num_samples,
                                              std::size_t batch, int T);

/// i.i.d. N(0, init_std^2) tokens from derive(rng, "ti.init").
IdEmbedding init_id_embedding(std::size_t k, std::size_t d, double init_std, const RngSpec& rng);

/// Extended textual inversion: gradient descent on the identity tokens only,
/// against the masked denoising loss of a frozen backbone.
TiResult train_id_tokens(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone,
                         const DiffusionSchedule& s, const TiConfig& cfg, const RngSpec& rng);
TiResult train_id_tokens(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone,
                         const DiffusionSchedule& s, const TiConfig& cfg, const RngSpec& rng, IdEmbedding init);

/// Mean masked loss of `id` over a fixed bank of `draws` (t, eps) pairs per
/// sample, drawn from `rng`. Deterministic; used to compare embeddings.
double evaluate_id_loss(std::span<const TrainingSample> samples, const TinyDenoiserParams& backbone,
                        const DiffusionSchedule& s, const IdEmbedding& id, const RngSpec& rng, std::size_t draws);

// --- mask providers -------------------------------------------------------

struct Detection {
    BBox box;
    RegionMask mask;  // one frame, video-sized
};

/// Stand-in for prompt-to-segmentation: (image, class label) -> box and mask.
class MaskProvider {
public:
    virtual ~MaskProvider() = default;
    virtual Detection detect(const VideoTensor& video, std::size_t frame, std::string_view label) const = 0;
    virtual std::string kind() const = 0;
};

enum class SubjectShape { Rect, Disk };

/// A subject placed in scene pixel coordinates: a disk of radius rx, or a
/// rectangle of half extents (rx, ry), centred on (cx, cy).
struct PlacedSubject {
    std::string label;
    SubjectShape shape = SubjectShape::Disk;
    double cx = 0.0;
    double cy = 0.0;
    double rx = 1.0;
    double ry = 1.0;
};

struct SceneSpec {
    std::size_t height = 1;
    std::size_t width = 1;
    std::vector<std::vector<PlacedSubject>> frames;  // subjects per frame
};

/// Pixel (x, y) belongs to a subject when its centre (x + 0.5, y + 0.5) lies
/// inside the shape. Videos of a different resolution than the scene are
/// addressed by scaling the geometry.
RegionMask rasterize_subject(const PlacedSubject& subject, std::size_t height, std::size_t width);

class SyntheticMaskProvider final : public MaskProvider {
public:
    explicit SyntheticMaskProvider(SceneSpec scene);

    Detection detect(const VideoTensor& video, std::size_t frame, std::string_view label) const override;
    std::string kind() const override { return "synthetic-scene"; }
    const SceneSpec& scene() const { return m_scene; }

private:
    SceneSpec m_scene;
};

std::unique_ptr<MaskProvider> synthetic_mask_provider(SceneSpec scene);

}  // namespace vcd
