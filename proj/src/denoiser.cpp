// SPDX-License-Identifier: Apache-2.0

#include "vcd/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vcd {

namespace {

bool same_region(const FrameRegion& a, const FrameRegion& b) {
    return a.source_frame == b.source_frame && a.canvas_height == b.canvas_height &&
           a.canvas_width == b.canvas_width && a.box == b.box;
}

}  // namespace

double FrameRegion::u(std::size_t x, std::size_t w) const {
    const double offset = (static_cast<double>(x) + 0.5) * static_cast<double>(box.width()) / static_cast<double>(w);
    return (static_cast<double>(box.x0) + offset) / static_cast<double>(canvas_width);
}

double FrameRegion::v(std::size_t y, std::size_t h) const {
    const double offset = (static_cast<double>(y) + 0.5) * static_cast<double>(box.height()) / static_cast<double>(h);
    return (static_cast<double>(box.y0) + offset) / static_cast<double>(canvas_height);
}

RegionContext RegionContext::full(const Shape& shape) {
    RegionContext ctx;
    for (std::size_t f = 0; f < shape.frames; ++f)
        ctx.frames.push_back(FrameRegion{f, shape.height, shape.width,
                                         BBox{f, 0, 0, static_cast<int>(shape.width), static_cast<int>(shape.height)}});
    return ctx;
}

void GaussianDataSpec::validate() const {
    if (!mean)
        throw std::invalid_argument("Gaussian data spec has no mean field");
    if (!(sigma0 > 0.0))
        throw std::invalid_argument("sigma0 must be positive");
}

VideoTensor evaluate_mean(const GaussianDataSpec& data, const ConditionEmbedding& c, const Shape& shape,
                          const RegionContext& region) {
    if (region.frames.size() != shape.frames)
        throw std::invalid_argument("region context has " + std::to_string(region.frames.size()) +
                                    " frames, tensor has " + std::to_string(shape.frames));
    VideoTensor mu(shape);
    for (std::size_t f = 0; f < shape.frames; ++f) {
        const FrameRegion& r = region.frames[f];
        for (std::size_t ch = 0; ch < shape.channels; ++ch)
            for (std::size_t y = 0; y < shape.height; ++y) {
                const double v = r.v(y, shape.height);
                for (std::size_t x = 0; x < shape.width; ++x)
                    mu.at(f, ch, y, x) = data.mean->value(c, r.source_frame, ch, r.u(x, shape.width), v);
            }
    }
    return mu;
}

VideoTensor predict_eps_analytic(const VideoTensor& z_t, const VideoTensor& mu, int t, const DiffusionSchedule& s,
                                 double sigma0) {
    if (t < 1 || t > s.steps())
        throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " + std::to_string(s.steps()) + "]");
    if (mu.shape() != z_t.shape())
        throw std::invalid_argument("mean shape does not match z_t");
    const double abar = s.alpha_bar(t);
    const double root_abar = std::sqrt(abar);
    const double var0 = sigma0 * sigma0;
    const double gain = root_abar * var0 / (abar * var0 + 1.0 - abar);
    const double inv_noise = 1.0 / std::sqrt(1.0 - abar);
    VideoTensor eps(z_t.shape());
    auto e = eps.data();
    auto z = z_t.data();
    auto m = mu.data();
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double z0_hat = m[i] + gain * (z[i] - root_abar * m[i]);
        e[i] = (z[i] - root_abar * z0_hat) * inv_noise;
    }
    return eps;
}

VideoTensor predict_eps_analytic(const VideoTensor& z_t, const ConditionEmbedding& c, int t,
                                 const DiffusionSchedule& s, const GaussianDataSpec& data,
                                 const RegionContext& region) {
    data.validate();
    return predict_eps_analytic(z_t, evaluate_mean(data, c, z_t.shape(), region), t, s, data.sigma0);
}

AnalyticDenoiser::AnalyticDenoiser(GaussianDataSpec data) : m_data(std::move(data)) {
    m_data.validate();
}

VideoTensor AnalyticDenoiser::predict_eps(const VideoTensor& z_t, const ConditionEmbedding& c, int t,
                                          const DiffusionSchedule& s, const RegionContext& region) const {
    std::shared_ptr<const VideoTensor> mu;
    const std::uint64_t key = c.fingerprint();
    {
        std::lock_guard lock(m_cache_mutex);
        const bool hit = m_cache.mean && m_cache.condition == key && m_cache.shape == z_t.shape() &&
                         m_cache.regions.size() == region.frames.size() &&
                         std::equal(region.frames.begin(), region.frames.end(), m_cache.regions.begin(), same_region);
        if (hit)
            mu = m_cache.mean;
    }
    if (!mu) {
        mu = std::make_shared<const VideoTensor>(evaluate_mean(m_data, c, z_t.shape(), region));
        std::lock_guard lock(m_cache_mutex);
        m_cache = MeanCache{key, z_t.shape(), region.frames, mu};
    }
    return predict_eps_analytic(z_t, *mu, t, s, m_data.sigma0);
}

}  // namespace vcd
