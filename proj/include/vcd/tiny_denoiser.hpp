// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vcd/denoiser.hpp"
#include "vcd/rng.hpp"
#include "vcd/tensor.hpp"

namespace vcd {

/// Two-layer tanh network applied to each frame independently.
///
/// Input column: flattened frame (c*h*w) ++ mean-pooled condition tokens (d)
/// ++ t / T. Output: flattened frame-sized eps prediction.
struct TinyDenoiserParams {
    std::size_t channels = 1;
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t token_dim = 16;
    std::size_t hidden = 64;

    Eigen::MatrixXd w1;  // hidden x input_dim
    Eigen::VectorXd b1;  // hidden
    Eigen::MatrixXd w2;  // latent_size x hidden
    Eigen::VectorXd b2;  // latent_size

    std::size_t latent_size() const { return channels * height * width; }
    std::size_t input_dim() const { return latent_size() + token_dim + 1; }

    /// Throws if the layer shapes disagree with the declared dims or any
    /// weight is non-finite.
    void validate() const;

    bool operator==(const TinyDenoiserParams& o) const;
};

/// Weights ~ N(0, scale^2 / fan_in), biases zero.
TinyDenoiserParams init_tiny_params(std::size_t channels, std::size_t height, std::size_t width,
                                    std::size_t token_dim, std::size_t hidden, const RngSpec& rng,
                                    double scale = 1.0);

VideoTensor predict_eps_tiny(const VideoTensor& z_t, const ConditionEmbedding& c, int t, const DiffusionSchedule& s,
                             const TinyDenoiserParams& params);

class TinyDenoiser final : public Denoiser {
public:
    explicit TinyDenoiser(TinyDenoiserParams params);

    using Denoiser::predict_eps;
    VideoTensor predict_eps(const VideoTensor& z_t, const ConditionEmbedding& c, int t, const DiffusionSchedule& s,
                            const RegionContext& region) const override;
    std::string kind() const override { return "tiny-mlp"; }
    const TinyDenoiserParams& params() const { return m_params; }

private:
    TinyDenoiserParams m_params;
};

struct TokenGradient {
    double loss = 0.0;
    /// One gradient vector per identity token, in condition order.
    std::vector<std::vector<double>> tokens;
};

/// Masked denoising loss of the network on (z_t, eps_target) and its exact
/// gradient with respect to condition tokens [first_id_token, k). Network
/// weights are held fixed. Throws on an all-zero mask.
TokenGradient grad_loss_wrt_embedding(const VideoTensor& z_t, const VideoTensor& eps_target,
                                      const ConditionEmbedding& c, int t, const DiffusionSchedule& s,
                                      const TinyDenoiserParams& params, const RegionMask& mask,
                                      std::size_t first_id_token);

/// One training example for the backbone.
struct DenoiseExample {
    VideoTensor z0;  // single frame
    RegionMask mask;
    ConditionEmbedding condition;
};

struct PretrainHyper {
    std::size_t hidden = 64;
    double lr = 1e-3;
    int steps = 500;
    /// Fixed (t, eps) draws per example; the objective is the full-batch mean
    /// over this bank, so each step is deterministic gradient descent.
    std::size_t draws_per_example = 16;
    double init_scale = 1.0;
    RngSpec rng{0, 0};
};

struct PretrainResult {
    TinyDenoiserParams params;
    std::vector<double> loss_curve;  // loss before each step, then the final loss
};

/// Full-parameter gradient descent on the masked denoising objective.
/// Throws naming the step if the loss becomes non-finite.
PretrainResult pretrain_tiny(std::span<const DenoiseExample> dataset, const DiffusionSchedule& s,
                             const PretrainHyper& hyper);
PretrainResult pretrain_tiny(std::span<const DenoiseExample> dataset, const DiffusionSchedule& s,
                             const PretrainHyper& hyper, TinyDenoiserParams init);

/// Objective value and full parameter gradient for one fixed batch; exposed
/// for gradient checks.
struct ParamGradient {
    double loss = 0.0;
    TinyDenoiserParams grad;
};
ParamGradient loss_and_param_grad(const TinyDenoiserParams& params, const Eigen::MatrixXd& inputs,
                                  const Eigen::MatrixXd& targets, const Eigen::MatrixXd& weights);

/// Network input column for one frame.
Eigen::VectorXd tiny_input(std::span<const double> frame, std::span<const double> pooled, int t, int T);

inline constexpr std::string_view kParamsMagic = "VCDP0001";
std::vector<std::uint8_t> encode_params(const TinyDenoiserParams& p);
TinyDenoiserParams decode_params(std::span<const std::uint8_t> bytes);
void save_params(const TinyDenoiserParams& p, const std::filesystem::path& path);
TinyDenoiserParams load_params(const std::filesystem::path& path);

}  // namespace vcd
