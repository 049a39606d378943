// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "vcd/rng.hpp"
#include "vcd/tensor.hpp"

namespace vcd {

/// Frame count and inter-frame correlation of the 3D noise prior.
/// gamma = 0 gives independent frames.
struct CorrelationSpec {
    std::size_t frames = 16;
    double gamma = 0.1;

    void validate() const;
};

/// Toeplitz matrix with entry (m, n) = gamma^|m - n|.
Eigen::MatrixXd covariance_matrix(const CorrelationSpec& spec);

/// Where a sampled block sits inside a larger noise canvas.
///
/// The fresh standard normal feeding frame m, channel ch, canvas pixel
/// (Y, X) is element ((m * C + ch) * H + Y) * W + X of the stream. Sampling
/// a window therefore reproduces exactly the corresponding slice of a
/// full-canvas sample drawn from the same stream.
struct NoiseWindow {
    std::size_t channels = 1;
    std::size_t canvas_height = 1;
    std::size_t canvas_width = 1;
    BBox region;  // frame field ignored

    static NoiseWindow full(std::size_t c, std::size_t h, std::size_t w);
};

/// Streaming sampler: frame 0 ~ N(0, I), frame m = gamma * frame(m-1) +
/// sqrt(1 - gamma^2) * fresh normal. Covariance across frames is exactly
/// covariance_matrix(spec).
VideoTensor sample_prior_ar1(const CorrelationSpec& spec, std::size_t c, std::size_t h, std::size_t w,
                             const RngSpec& rng);
VideoTensor sample_prior_ar1(const CorrelationSpec& spec, const NoiseWindow& window, const RngSpec& rng);

/// Factorization sampler: per position, maps the f fresh normals through
/// the lower Cholesky factor L of covariance_matrix(spec). It reads the same
/// fresh normals as sample_prior_ar1, so under one RngSpec the two samplers
/// differ only by floating-point rounding.
VideoTensor sample_prior_factorized(const CorrelationSpec& spec, std::size_t c, std::size_t h, std::size_t w,
                                    const RngSpec& rng);
VideoTensor sample_prior_factorized(const CorrelationSpec& spec, const NoiseWindow& window, const RngSpec& rng);

/// Unbiased (N - 1) frame covariance, pooling every channel/pixel position of
/// every sample as one realization of an f-vector.
Eigen::MatrixXd empirical_covariance(std::span<const VideoTensor> samples);

}  // namespace vcd
