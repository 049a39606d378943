// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vcd/condition.hpp"
#include "vcd/schedule.hpp"
#include "vcd/tensor.hpp"

namespace vcd {

/// Which part of a scene one frame of a denoiser input covers: `box` in the
/// pixel grid of a canvas_height x canvas_width scene frame `source_frame`.
/// Crops and tiles carry their box; whole frames carry the full canvas.
struct FrameRegion {
    std::size_t source_frame = 0;
    std::size_t canvas_height = 1;
    std::size_t canvas_width = 1;
    BBox box;

    /// Normalized scene coordinates of the centre of pixel (y, x) of an
    /// h x w tensor frame covering this region.
    double u(std::size_t x, std::size_t w) const;
    double v(std::size_t y, std::size_t h) const;
};

struct RegionContext {
    std::vector<FrameRegion> frames;

    /// Every frame covers its whole canvas.
    static RegionContext full(const Shape& shape);
};

/// eps_theta(z_t, c, t): predicts the noise in z_t. Implementations are pure;
/// the output has the shape of z_t.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual VideoTensor predict_eps(const VideoTensor& z_t, const ConditionEmbedding& c, int t,
                                    const DiffusionSchedule& s, const RegionContext& region) const = 0;

    VideoTensor predict_eps(const VideoTensor& z_t, const ConditionEmbedding& c, int t,
                            const DiffusionSchedule& s) const {
        return predict_eps(z_t, c, t, s, RegionContext::full(z_t.shape()));
    }

    virtual std::string kind() const = 0;
};

/// Per-pixel data mean as a function of the condition and the scene
/// position; resolution independent.
class MeanField {
public:
    virtual ~MeanField() = default;
    virtual double value(const ConditionEmbedding& c, std::size_t frame, std::size_t channel, double u,
                         double v) const = 0;
    virtual std::string kind() const = 0;
};

class ConstantMean final : public MeanField {
public:
    explicit ConstantMean(double value) : m_value(value) {}
    double value(const ConditionEmbedding&, std::size_t, std::size_t, double, double) const override { return m_value; }
    std::string kind() const override { return "constant"; }

private:
    double m_value;
};

/// Toy data distribution: every element is independently N(mu, sigma0^2)
/// with mu supplied by a MeanField.
struct GaussianDataSpec {
    std::shared_ptr<const MeanField> mean;
    double sigma0 = 1.0;

    void validate() const;
};

/// mu for every element of a tensor covering `region`.
VideoTensor evaluate_mean(const GaussianDataSpec& data, const ConditionEmbedding& c, const Shape& shape,
                          const RegionContext& region);

/// Exact E[eps | z_t] for the Gaussian toy data:
///   z0_hat = mu + sqrt(abar) s0^2 / (abar s0^2 + 1 - abar) * (z_t - sqrt(abar) mu)
///   eps    = (z_t - sqrt(abar) z0_hat) / sqrt(1 - abar)
VideoTensor predict_eps_analytic(const VideoTensor& z_t, const VideoTensor& mu, int t, const DiffusionSchedule& s,
                                 double sigma0);
VideoTensor predict_eps_analytic(const VideoTensor& z_t, const ConditionEmbedding& c, int t,
                                 const DiffusionSchedule& s, const GaussianDataSpec& data,
                                 const RegionContext& region);

/// Minimum-error denoiser for GaussianDataSpec. Acts on each element
/// independently, so it commutes with spatial tiling.
class AnalyticDenoiser final : public Denoiser {
public:
    explicit AnalyticDenoiser(GaussianDataSpec data);

    using Denoiser::predict_eps;
    VideoTensor predict_eps(const VideoTensor& z_t, const ConditionEmbedding& c, int t, const DiffusionSchedule& s,
                            const RegionContext& region) const override;
    std::string kind() const override { return "analytic-gaussian/" + m_data.mean->kind(); }

    const GaussianDataSpec& data() const { return m_data; }

private:
    GaussianDataSpec m_data;

    // The reverse chain asks for the same mean field at every step.
    struct MeanCache {
        std::uint64_t condition = 0;
        Shape shape;
        std::vector<FrameRegion> regions;
        std::shared_ptr<const VideoTensor> mean;
    };
    mutable std::mutex m_cache_mutex;
    mutable MeanCache m_cache;
};

}  // namespace vcd
