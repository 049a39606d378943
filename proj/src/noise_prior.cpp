// SPDX-License-Identifier: Apache-2.0

#include "vcd/noise_prior.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace vcd {

void CorrelationSpec::validate() const {
    if (frames == 0)
        throw std::invalid_argument("correlation spec needs at least one frame");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in [0, 1), got " + std::to_string(gamma));
}

Eigen::MatrixXd covariance_matrix(const CorrelationSpec& spec) {
    spec.validate();
    const auto f = static_cast<Eigen::Index>(spec.frames);
    Eigen::MatrixXd cov(f, f);
    for (Eigen::Index m = 0; m < f; ++m)
        for (Eigen::Index n = 0; n < f; ++n)
            cov(m, n) = std::pow(spec.gamma, static_cast<double>(std::abs(m - n)));
    return cov;
}

NoiseWindow NoiseWindow::full(std::size_t c, std::size_t h, std::size_t w) {
    return NoiseWindow{c, h, w, BBox{kAllFrames, 0, 0, static_cast<int>(w), static_cast<int>(h)}};
}

namespace {

// Fresh normals for every frame of the window, laid out like the output.
VideoTensor fresh_normals(std::size_t frames, const NoiseWindow& win, const RngSpec& rng) {
    if (win.channels == 0 || !win.region.valid_in(win.canvas_height, win.canvas_width))
        throw std::invalid_argument("noise window " + to_string(win.region) + " outside canvas");
    const auto wh = static_cast<std::size_t>(win.region.height());
    const auto ww = static_cast<std::size_t>(win.region.width());
    VideoTensor out(Shape{frames, win.channels, wh, ww});
    auto data = out.data();
    for (std::size_t m = 0; m < frames; ++m) {
        for (std::size_t ch = 0; ch < win.channels; ++ch) {
            for (std::size_t y = 0; y < wh; ++y) {
                const std::size_t canvas_y = y + static_cast<std::size_t>(win.region.y0);
                const std::uint64_t first =
                    ((m * win.channels + ch) * win.canvas_height + canvas_y) * win.canvas_width +
                    static_cast<std::size_t>(win.region.x0);
                fill_normals(rng, first, data.subspan(out.index(m, ch, y, 0), ww));
            }
        }
    }
    return out;
}

}  // namespace

VideoTensor sample_prior_ar1(const CorrelationSpec& spec, const NoiseWindow& window, const RngSpec& rng) {
    spec.validate();
    VideoTensor out = fresh_normals(spec.frames, window, rng);
    const double keep = spec.gamma;
    const double fresh = std::sqrt(1.0 - spec.gamma * spec.gamma);
    for (std::size_t m = 1; m < spec.frames; ++m) {
        auto prev = out.frame(m - 1);
        auto cur = out.frame(m);
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] = keep * prev[i] + fresh * cur[i];
    }
    return out;
}

VideoTensor sample_prior_ar1(const CorrelationSpec& spec, std::size_t c, std::size_t h, std::size_t w,
                             const RngSpec& rng) {
    return sample_prior_ar1(spec, NoiseWindow::full(c, h, w), rng);
}

VideoTensor sample_prior_factorized(const CorrelationSpec& spec, const NoiseWindow& window, const RngSpec& rng) {
    const Eigen::MatrixXd cov = covariance_matrix(spec);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("covariance factorization failed for gamma = " + std::to_string(spec.gamma));
    const Eigen::MatrixXd lower = llt.matrixL();

    const VideoTensor normals = fresh_normals(spec.frames, window, rng);
    VideoTensor out(normals.shape());
    const std::size_t per_frame = normals.shape().frame_size();
    auto src = normals.data();
    auto dst = out.data();
    for (std::size_t m = 0; m < spec.frames; ++m) {
        for (std::size_t p = 0; p < per_frame; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j <= m; ++j)
                acc += lower(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) * src[j * per_frame + p];
            dst[m * per_frame + p] = acc;
        }
    }
    return out;
}

VideoTensor sample_prior_factorized(const CorrelationSpec& spec, std::size_t c, std::size_t h, std::size_t w,
                                    const RngSpec& rng) {
    return sample_prior_factorized(spec, NoiseWindow::full(c, h, w), rng);
}

Eigen::MatrixXd empirical_covariance(std::span<const VideoTensor> samples) {
    if (samples.empty())
        throw std::invalid_argument("empirical_covariance: no samples");
    const Shape& shape = samples.front().shape();
    const auto f = static_cast<Eigen::Index>(shape.frames);
    const std::size_t per_frame = shape.frame_size();

    std::size_t n = 0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(f);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(f, f);
    Eigen::VectorXd v(f);
    for (const auto& s : samples) {
        if (s.shape() != shape)
            throw std::invalid_argument("empirical_covariance: samples differ in shape");
        auto d = s.data();
        for (std::size_t p = 0; p < per_frame; ++p) {
            for (Eigen::Index m = 0; m < f; ++m)
                v(m) = d[static_cast<std::size_t>(m) * per_frame + p];
            sum += v;
            cross.selfadjointView<Eigen::Lower>().rankUpdate(v);
            ++n;
        }
    }
    if (n < 2)
        throw std::invalid_argument("empirical_covariance: need at least 2 pooled realizations, got " +
                                    std::to_string(n));
    cross = cross.selfadjointView<Eigen::Lower>();
    const double count = static_cast<double>(n);
    return (cross - sum * sum.transpose() / count) / (count - 1.0);
}

}  // namespace vcd
