// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vcd/imaging.hpp"
#include "vcd/noise_prior.hpp"
#include "vcd/rng.hpp"
#include "vcd/validation.hpp"

using namespace vcd;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Covariance oracle written without Eigen: plain double loops, (N - 1) divisor.
std::vector<std::vector<double>> naive_covariance(const VideoTensor& t) {
    const std::size_t f = t.frames(), n = t.shape().frame_size();
    std::vector<double> mean(f, 0.0);
    for (std::size_t m = 0; m < f; ++m) {
        for (std::size_t i = 0; i < n; ++i)
            mean[m] += t.frame(m)[i];
        mean[m] /= static_cast<double>(n);
    }
    std::vector<std::vector<double>> cov(f, std::vector<double>(f, 0.0));
    for (std::size_t a = 0; a < f; ++a)
        for (std::size_t b = 0; b < f; ++b) {
            for (std::size_t i = 0; i < n; ++i)
                cov[a][b] += (t.frame(a)[i] - mean[a]) * (t.frame(b)[i] - mean[b]);
            cov[a][b] /= static_cast<double>(n - 1);
        }
    return cov;
}

}  // namespace

TEST_SUITE("noise_prior") {

TEST_CASE("covariance matrix entries are gamma to the frame distance") {
    const Eigen::MatrixXd m = covariance_matrix({3, 0.5});
    const double expect[3][3] = {{1, 0.5, 0.25}, {0.5, 1, 0.5}, {0.25, 0.5, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(m(i, j) == doctest::Approx(expect[i][j]));
    CHECK(covariance_matrix({7, 0.0}).isIdentity());
    const Eigen::MatrixXd d = covariance_matrix({2, 0.1});
    CHECK(d(0, 1) == doctest::Approx(0.1));
    CHECK(d(1, 0) == doctest::Approx(0.1));
    CHECK(d(1, 1) == 1.0);
}

TEST_CASE("covariance spec rejects invalid parameters") {
    CHECK_THROWS(covariance_matrix({0, 0.1}));
    CHECK_THROWS(covariance_matrix({4, 1.0}));
    CHECK_THROWS(covariance_matrix({4, -0.1}));
}

TEST_CASE("empirical covariance of a hand-built dataset") {
    const VideoTensor a(Shape{2, 1, 1, 1}, std::vector<double>{1.0, 1.0});
    const VideoTensor b(Shape{2, 1, 1, 1}, std::vector<double>{-1.0, -1.0});
    const std::vector<VideoTensor> samples{a, b};
    const Eigen::MatrixXd c = empirical_covariance(samples);
    CHECK(c(0, 0) == doctest::Approx(2.0));
    CHECK(c(0, 1) == doctest::Approx(2.0));
    CHECK(c(1, 1) == doctest::Approx(2.0));

    const std::vector<VideoTensor> zeros{VideoTensor(Shape{3, 1, 2, 2}, 0.0), VideoTensor(Shape{3, 1, 2, 2}, 0.0)};
    CHECK(max_abs(empirical_covariance(zeros)) == 0.0);

    const std::vector<VideoTensor> single{a};
    CHECK_THROWS(empirical_covariance(single));
    const std::vector<VideoTensor> mismatched{a, VideoTensor(Shape{3, 1, 1, 1}, 0.0)};
    CHECK_THROWS(empirical_covariance(mismatched));
}

TEST_CASE("empirical covariance agrees with a loop-based estimator") {
    const VideoTensor t = vcd::testing::reference_normals({4, 2, 5, 7}, 8);
    const Eigen::MatrixXd c = empirical_covariance(std::span<const VideoTensor>(&t, 1));
    const auto ref = naive_covariance(t);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(c(i, j) == doctest::Approx(ref[i][j]).epsilon(1e-12));
}

TEST_CASE("both samplers match the target covariance") {
    const RngSpec rng{21, 0};
    for (PriorSampler s : {PriorSampler::Ar1, PriorSampler::Factorized}) {
        const CheckResult r = check_covariance(s, 16, 0.1, 0.1, 100'000, 0.02, rng);
        CHECK_MESSAGE(r.pass, format_check(r));
    }
}

TEST_CASE("zero correlation gives independent frames") {
    const VideoTensor t = sample_prior_factorized({4, 0.0}, 1, 1, 100'000, RngSpec{5, 0});
    const Eigen::MatrixXd c = empirical_covariance(std::span<const VideoTensor>(&t, 1));
    const Eigen::MatrixXd off = c - Eigen::MatrixXd(c.diagonal().asDiagonal());
    CHECK(max_abs(off) < 0.02);
    CHECK(sample_prior_ar1({4, 0.0}, 1, 1, 64, RngSpec{5, 0}) == sample_prior_factorized({4, 0.0}, 1, 1, 64, RngSpec{5, 0}));
}

TEST_CASE("each frame is marginally standard normal") {
    const VideoTensor t = sample_prior_ar1({5, 0.3}, 1, 1, 100'000, RngSpec{6, 0});
    for (std::size_t m = 0; m < 5; ++m) {
        CHECK(vcd::testing::variance_of(t.frame(m)) == doctest::Approx(1.0).epsilon(0.02));
        CHECK(std::abs(vcd::testing::mean_of(t.frame(m))) < 0.02);
    }
}

TEST_CASE("distinct positions are uncorrelated") {
    // Treat neighbouring pixel pairs as the two variables.
    const VideoTensor t = sample_prior_ar1({2, 0.5}, 1, 2, 100'000, RngSpec{7, 0});
    double cross = 0.0;
    for (std::size_t x = 0; x < 100'000; ++x)
        cross += t.at(1, 0, 0, x) * t.at(1, 0, 1, x);
    CHECK(std::abs(cross / 100'000) < 0.02);
}

TEST_CASE("samplers agree under shared normals") {
    const CheckResult shared = check_sampler_agreement(16, 0.1, 100'000, 0.01, true, RngSpec{8, 0});
    CHECK_MESSAGE(shared.pass, format_check(shared));
    CHECK(shared.measured < 1e-12);
}

TEST_CASE("samplers agree within Monte Carlo error under independent normals") {
    // Each entry differs by about sqrt(4 / N) = 0.0063 at one standard deviation.
    const CheckResult indep = check_sampler_agreement(16, 0.1, 100'000, 0.03, false, RngSpec{8, 0});
    CHECK_MESSAGE(indep.pass, format_check(indep));
    CHECK(indep.measured > 1e-6);
}

TEST_CASE("samplers produce nearly identical draws from the same stream") {
    const VideoTensor a = sample_prior_ar1({6, 0.4}, 2, 3, 3, RngSpec{9, 1});
    const VideoTensor b = sample_prior_factorized({6, 0.4}, 2, 3, 3, RngSpec{9, 1});
    for (std::size_t i = 0; i < a.numel(); ++i)
        CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("window sampling is an exact slice of the full canvas") {
    const CorrelationSpec spec{5, 0.2};
    const RngSpec rng{10, 3};
    const VideoTensor full = sample_prior_ar1(spec, 2, 8, 12, rng);
    for (const BBox& b : {BBox{kAllFrames, 0, 0, 6, 4}, BBox{kAllFrames, 6, 4, 12, 8}, BBox{kAllFrames, 3, 1, 5, 7}}) {
        const NoiseWindow win{2, 8, 12, b};
        CHECK(sample_prior_ar1(spec, win, rng) == crop(full, b));
        CHECK(sample_prior_factorized(spec, win, rng) == crop(sample_prior_factorized(spec, 2, 8, 12, rng), b));
    }
    CHECK_THROWS(sample_prior_ar1(spec, NoiseWindow{2, 8, 12, BBox{kAllFrames, 0, 0, 13, 4}}, rng));
}

TEST_CASE("tiles of a split canvas reassemble the full sample") {
    const CorrelationSpec spec{3, 0.1};
    const RngSpec rng{11, 0};
    const VideoTensor full = sample_prior_ar1(spec, 1, 8, 8, rng);
    auto tiles = split_tiles(full, 2, 2);
    for (auto& tile : tiles)
        tile.tensor = sample_prior_ar1(spec, NoiseWindow{1, 8, 8, tile.box}, rng);
    CHECK(stitch_tiles(tiles, 8, 8) == full);
}

}  // TEST_SUITE
