// SPDX-License-Identifier: Apache-2.0

#include "vcd/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "vcd/denoiser.hpp"
#include "vcd/id_module.hpp"
#include "vcd/noise_prior.hpp"
#include "vcd/pipeline.hpp"
#include "vcd/tiny_denoiser.hpp"

namespace vcd {

std::string to_string(PriorSampler s) {
    return s == PriorSampler::Ar1 ? "ar1" : "factorized";
}

PriorSampler parse_prior_sampler(const std::string& name) {
    if (name == "ar1")
        return PriorSampler::Ar1;
    if (name == "factorized")
        return PriorSampler::Factorized;
    throw std::invalid_argument("unknown sampler '" + name + "' (expected ar1 or factorized)");
}

namespace {

VideoTensor draw(PriorSampler sampler, std::size_t frames, double gamma, std::size_t n, const RngSpec& rng) {
    const CorrelationSpec spec{frames, gamma};
    return sampler == PriorSampler::Ar1 ? sample_prior_ar1(spec, 1, 1, n, rng)
                                        : sample_prior_factorized(spec, 1, 1, n, rng);
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

CheckResult check_covariance(PriorSampler sampler, std::size_t frames, double label_gamma, double sample_gamma,
                             std::size_t realizations, double tol, const RngSpec& rng) {
    const VideoTensor samples = draw(sampler, frames, sample_gamma, realizations, rng);
    const Eigen::MatrixXd emp = empirical_covariance(std::span<const VideoTensor>(&samples, 1));
    const double err = max_abs_diff(emp, covariance_matrix(CorrelationSpec{frames, label_gamma}));
    return {"covariance/" + to_string(sampler), err, tol, err < tol,
            "f=" + std::to_string(frames) + " gamma=" + std::to_string(label_gamma) +
                " N=" + std::to_string(realizations)};
}

CheckResult check_sampler_agreement(std::size_t frames, double gamma, std::size_t realizations, double tol,
                                    bool common_numbers, const RngSpec& rng) {
    const VideoTensor a = draw(PriorSampler::Ar1, frames, gamma, realizations, rng);
    const VideoTensor b =
        draw(PriorSampler::Factorized, frames, gamma, realizations, common_numbers ? rng : derive(rng, "independent"));
    const double err = max_abs_diff(empirical_covariance(std::span<const VideoTensor>(&a, 1)),
                                    empirical_covariance(std::span<const VideoTensor>(&b, 1)));
    return {common_numbers ? "sampler-agreement" : "sampler-agreement/independent", err, tol, err < tol,
            std::string(common_numbers ? "shared" : "independent") + " normals, N=" + std::to_string(realizations)};
}

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

CheckResult check_token_gradient(std::size_t configs, double step, double tol, const RngSpec& rng) {
    const DiffusionSchedule s = default_schedule();
    double worst = 0.0;
    std::size_t components = 0;
    for (std::size_t cfg = 0; cfg < configs; ++cfg) {
        const RngSpec r = derive(rng, "gradcheck", cfg);
        Rng gen(derive(r, "shape"));
        const std::size_t ch = 1 + static_cast<std::size_t>(gen.uniform_int(0, 1));
        const std::size_t h = 3 + static_cast<std::size_t>(gen.uniform_int(0, 2));
        const std::size_t w = 3 + static_cast<std::size_t>(gen.uniform_int(0, 2));
        const std::size_t d = 4 + static_cast<std::size_t>(gen.uniform_int(0, 4));
        const std::size_t prompt = 1 + static_cast<std::size_t>(gen.uniform_int(0, 2));
        const std::size_t k = 1 + static_cast<std::size_t>(gen.uniform_int(0, 3));
        const int t = static_cast<int>(gen.uniform_int(1, s.steps()));

        TinyDenoiserParams p = init_tiny_params(ch, h, w, d, 8, derive(r, "params"));
        for (Eigen::Index i = 0; i < p.b1.size(); ++i)
            p.b1[i] = 0.3 * gen.normal();
        for (Eigen::Index i = 0; i < p.b2.size(); ++i)
            p.b2[i] = 0.3 * gen.normal();
        const Shape shape{1, ch, h, w};
        const VideoTensor z = sample_standard_normal(shape, derive(r, "z"));
        const VideoTensor eps = sample_standard_normal(shape, derive(r, "eps"));
        RegionMask mask(1, h, w);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                mask.set(0, y, x, gen.uniform() < 0.6);
        mask.set(0, 0, 0, true);

        std::vector<double> values((prompt + k) * d);
        for (auto& v : values)
            v = gen.normal();
        const ConditionEmbedding c(d, values);
        const TokenGradient g = grad_loss_wrt_embedding(z, eps, c, t, s, p, mask, prompt);
        for (std::size_t tok = 0; tok < k; ++tok)
            for (std::size_t j = 0; j < d; ++j) {
                const std::size_t idx = (prompt + tok) * d + j;
                auto shifted = values;
                shifted[idx] = values[idx] + step;
                const double up = masked_loss(predict_eps_tiny(z, ConditionEmbedding(d, shifted), t, s, p), eps, mask);
                shifted[idx] = values[idx] - step;
                const double dn = masked_loss(predict_eps_tiny(z, ConditionEmbedding(d, shifted), t, s, p), eps, mask);
                worst = std::max(worst, relative_error(g.tokens[tok][j], (up - dn) / (2.0 * step)));
                ++components;
            }
    }
    return {"token-gradient", worst, tol, worst < tol,
            std::to_string(configs) + " configs, " + std::to_string(components) + " components, step " +
                std::to_string(step)};
}

ChainStats reverse_chain_stats(std::size_t chains, double mu, double sigma0, int timesteps, const RngSpec& rng) {
    const DiffusionSchedule s = build_schedule(timesteps, kDefaultBetaStart, kDefaultBetaEnd);
    const AnalyticDenoiser den(GaussianDataSpec{std::make_shared<ConstantMean>(mu), sigma0});
    StageConfig cfg;
    cfg.gamma = 0.0;
    cfg.step_noise = StepNoise::Iid;
    cfg.rng = rng;
    const VideoTensor out = t2v_vcd(ConditionEmbedding(1, {0.0}), 1, 1, 1, chains, cfg, s, den);
    ChainStats st;
    for (double v : out.data())
        st.mean += v;
    st.mean /= static_cast<double>(chains);
    for (double v : out.data())
        st.variance += (v - st.mean) * (v - st.mean);
    st.variance /= static_cast<double>(chains - 1);
    return st;
}

std::vector<CheckResult> check_reverse_chain(std::size_t chains, double mu, double sigma0, double mean_tol,
                                             double var_rel_tol, const RngSpec& rng) {
    const ChainStats st = reverse_chain_stats(chains, mu, sigma0, kDefaultTimesteps, rng);
    const double mean_err = std::abs(st.mean - mu);
    const double var_err = std::abs(st.variance / (sigma0 * sigma0) - 1.0);
    const std::string detail = std::to_string(chains) + " chains, target N(" + std::to_string(mu) + ", " +
                               std::to_string(sigma0 * sigma0) + ")";
    return {{"reverse-chain/mean", mean_err, mean_tol, mean_err < mean_tol, detail},
            {"reverse-chain/variance", var_err, var_rel_tol, var_err < var_rel_tol, detail}};
}

std::string format_check(const CheckResult& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-32s %-4s measured=%.3e tol=%.3e", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                  r.measured, r.tolerance);
    return std::string(buf) + "  (" + r.detail + ")";
}

}  // namespace vcd
