// SPDX-License-Identifier: Apache-2.0

#include "vcd/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vcd {

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas, double beta_start, double beta_end) {
    if (betas.empty())
        throw std::invalid_argument("schedule needs at least one timestep");
    DiffusionSchedule s;
    s.m_beta_start = beta_start;
    s.m_beta_end = beta_end;
    s.m_beta.assign(1, 0.0);
    s.m_alpha.assign(1, 1.0);
    s.m_alpha_bar.assign(1, 1.0);
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0))
            throw std::invalid_argument("beta values must lie in (0, 1), got " + std::to_string(b));
        s.m_beta.push_back(b);
        s.m_alpha.push_back(1.0 - b);
        s.m_alpha_bar.push_back(s.m_alpha_bar.back() * (1.0 - b));
    }
    return s;
}

double DiffusionSchedule::posterior_variance(int t) const {
    if (t < 1 || t > steps())
        throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    return (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
}

DiffusionSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1)
        throw std::invalid_argument("schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("schedule needs 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        betas[static_cast<std::size_t>(t - 1)] = beta_start + (beta_end - beta_start) * frac;
    }
    return DiffusionSchedule::from_betas(std::move(betas), beta_start, beta_end);
}

namespace {

void check_t(int t, int lo, const DiffusionSchedule& s) {
    if (t < lo || t > s.steps())
        throw std::out_of_range("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(s.steps()) + "]");
}

void check_same(const VideoTensor& a, const VideoTensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                    to_string(b.shape()));
}

}  // namespace

VideoTensor forward_diffuse(const VideoTensor& z0, const VideoTensor& eps, int t, const DiffusionSchedule& s) {
    check_same(z0, eps, "forward_diffuse");
    check_t(t, 0, s);
    if (t == 0)
        return z0;
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    VideoTensor out(z0.shape());
    auto o = out.data();
    auto x = z0.data();
    auto e = eps.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a * x[i] + b * e[i];
    return out;
}

VideoTensor reverse_step(const VideoTensor& zt, const VideoTensor& eps_hat, int t, const DiffusionSchedule& s,
                         const VideoTensor& noise) {
    check_same(zt, eps_hat, "reverse_step");
    check_t(t, 1, s);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    const double eps_coef = (1.0 - s.alpha(t)) / std::sqrt(1.0 - s.alpha_bar(t));
    const double sigma = t > 1 ? std::sqrt(s.posterior_variance(t)) : 0.0;
    if (t > 1)
        check_same(zt, noise, "reverse_step noise");
    VideoTensor out(zt.shape());
    auto o = out.data();
    auto z = zt.data();
    auto e = eps_hat.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = inv_sqrt_alpha * (z[i] - eps_coef * e[i]);
    if (t > 1) {
        auto n = noise.data();
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] += sigma * n[i];
    }
    return out;
}

int strength_to_timestep(double strength, const DiffusionSchedule& s) {
    if (!(strength >= 0.0 && strength <= 1.0))
        throw std::invalid_argument("strength must lie in [0, 1]");
    return static_cast<int>(std::lround(strength * s.steps()));
}

}  // namespace vcd
