// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vcd/rng.hpp"

namespace vcd {

/// Outcome of one statistical or numerical check.
struct CheckResult {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

enum class PriorSampler { Ar1, Factorized };
std::string to_string(PriorSampler s);
PriorSampler parse_prior_sampler(const std::string& name);

/// Draws `realizations` f-vectors at `sample_gamma` and compares their
/// empirical covariance with the matrix for `label_gamma`. The two gammas
/// differ only when a fault is injected.
CheckResult check_covariance(PriorSampler sampler, std::size_t frames, double label_gamma, double sample_gamma,
                             std::size_t realizations, double tol, const RngSpec& rng);

/// Max entrywise difference between the empirical covariances of the two
/// samplers. With `common_numbers` both read the same fresh normals;
/// otherwise they use independent streams.
CheckResult check_sampler_agreement(std::size_t frames, double gamma, std::size_t realizations, double tol,
                                    bool common_numbers, const RngSpec& rng);

/// |a - b| / max(|a|, |b|, 1e-6).
double relative_error(double a, double b);

/// Largest relative error between the analytic identity-token gradient and
/// central finite differences over `configs` random network/input draws.
CheckResult check_token_gradient(std::size_t configs, double step, double tol, const RngSpec& rng);

/// Terminal statistics of `chains` independent 1-element reverse chains with
/// the analytic denoiser for N(mu, sigma0^2) data.
struct ChainStats {
    double mean = 0.0;
    double variance = 0.0;
};
ChainStats reverse_chain_stats(std::size_t chains, double mu, double sigma0, int timesteps, const RngSpec& rng);
std::vector<CheckResult> check_reverse_chain(std::size_t chains, double mu, double sigma0, double mean_tol,
                                             double var_rel_tol, const RngSpec& rng);

std::string format_check(const CheckResult& r);

}  // namespace vcd
