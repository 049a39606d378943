// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "vcd/tensor.hpp"

namespace vcd {

/// Per-timestep tables of a DDPM forward process. Timesteps run 1..T;
/// alpha_bar(0) == 1 by convention.
class DiffusionSchedule {
public:
    /// Builds the tables from an explicit beta[1..T] sequence.
    static DiffusionSchedule from_betas(std::vector<double> betas, double beta_start, double beta_end);

    int steps() const { return static_cast<int>(m_beta.size()) - 1; }
    double beta(int t) const { return m_beta.at(static_cast<std::size_t>(t)); }
    double alpha(int t) const { return m_alpha.at(static_cast<std::size_t>(t)); }
    double alpha_bar(int t) const { return m_alpha_bar.at(static_cast<std::size_t>(t)); }

    /// Variance of the ancestral step noise, ((1 - abar[t-1]) / (1 - abar[t])) * beta[t].
    double posterior_variance(int t) const;

    double beta_start() const { return m_beta_start; }
    double beta_end() const { return m_beta_end; }

private:
    DiffusionSchedule() = default;

    std::vector<double> m_beta;       // index 0 unused
    std::vector<double> m_alpha;      // index 0 unused
    std::vector<double> m_alpha_bar;  // m_alpha_bar[0] == 1
    double m_beta_start = 0.0;
    double m_beta_end = 0.0;
};

inline constexpr int kDefaultTimesteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

/// Linear beta from beta_start (t = 1) to beta_end (t = T).
DiffusionSchedule build_schedule(int T, double beta_start, double beta_end);
inline DiffusionSchedule default_schedule() {
    return build_schedule(kDefaultTimesteps, kDefaultBetaStart, kDefaultBetaEnd);
}

/// sqrt(abar_t) z0 + sqrt(1 - abar_t) eps. t = 0 returns z0.
VideoTensor forward_diffuse(const VideoTensor& z0, const VideoTensor& eps, int t, const DiffusionSchedule& s);

/// One ancestral step t -> t-1:
///   (z_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t * noise
/// with sigma_t = sqrt(posterior_variance(t)). At t = 1 sigma is zero and
/// `noise` is not read (it may be empty).
VideoTensor reverse_step(const VideoTensor& zt, const VideoTensor& eps_hat, int t, const DiffusionSchedule& s,
                         const VideoTensor& noise);

/// round(strength * T); 0 means no denoising and T the full chain.
int strength_to_timestep(double strength, const DiffusionSchedule& s);

}  // namespace vcd
