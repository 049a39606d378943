// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion; exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "vcd/denoiser.hpp"
#include "vcd/face_scene.hpp"
#include "vcd/id_module.hpp"
#include "vcd/imaging.hpp"
#include "vcd/metrics.hpp"
#include "vcd/noise_prior.hpp"
#include "vcd/pipeline.hpp"
#include "vcd/rng.hpp"
#include "vcd/schedule.hpp"
#include "vcd/tensor_io.hpp"
#include "vcd/tiny_denoiser.hpp"
#include "vcd/validation.hpp"

using namespace vcd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string summary;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("vcd_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "vcd");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0)
        std::fprintf(stderr, "  cli failed (%d): %s\n", code, err.str().c_str());
    return code;
}

// ---------------------------------------------------------------------------

Verdict ac1_covariance() {
    const auto t0 = Clock::now();
    std::string s;
    bool pass = true;
    for (PriorSampler sampler : {PriorSampler::Ar1, PriorSampler::Factorized}) {
        const CheckResult r = check_covariance(sampler, 16, 0.1, 0.1, 100'000, 0.02, RngSpec{101, 0});
        pass = pass && r.pass;
        s += to_string(sampler) + " max|err|=" + fmt("%.4f", r.measured) + " ";
    }
    const double t = seconds_since(t0);
    pass = pass && t < 10.0;
    return {pass, s + "(tol 0.02, N=1e5, " + fmt("%.2f", t) + " s, limit 10 s)"};
}

Verdict ac2_agreement() {
    const auto t0 = Clock::now();
    const CheckResult shared = check_sampler_agreement(16, 0.1, 100'000, 0.01, true, RngSpec{102, 0});
    const CheckResult indep = check_sampler_agreement(16, 0.1, 100'000, 0.01, false, RngSpec{102, 0});
    const double t = seconds_since(t0);
    return {shared.pass && t < 20.0, "shared-normals max|diff|=" + fmt("%.2e", shared.measured) +
                                         " (tol 0.01); independent-stream diagnostic " +
                                         fmt("%.4f", indep.measured) + ", " + fmt("%.2f", t) + " s"};
}

Verdict ac3_reverse_chain() {
    const auto t0 = Clock::now();
    const auto checks = check_reverse_chain(50'000, 0.0, 1.0, 0.02, 0.05, RngSpec{103, 0});
    const double t = seconds_since(t0);
    const bool pass = checks[0].pass && checks[1].pass && t < 120.0;
    return {pass, "|mean err|=" + fmt("%.4f", checks[0].measured) + " (tol 0.02), |var rel err|=" +
                      fmt("%.4f", checks[1].measured) + " (tol 0.05), 50000 chains, " + fmt("%.1f", t) + " s"};
}

struct Interval {
    double mean, lo, hi;
};

Interval bootstrap_mean(const std::vector<double>& x, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> means(2000);
    for (double& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += x[pick(gen)];
        m = s / static_cast<double>(x.size());
    }
    std::sort(means.begin(), means.end());
    double mean = 0.0;
    for (double v : x)
        mean += v;
    return {mean / static_cast<double>(x.size()), means[49], means[1949]};
}

Verdict ac4_gamma_direction() {
    const auto t0 = Clock::now();
    const std::size_t runs = 200;
    FaceSceneConfig scene;
    scene.frames = 16;
    scene.height = 16;
    scene.width = 16;
    const std::vector<double> key{0.6, -0.2, 0.5, 0.1};
    const AnalyticDenoiser den(GaussianDataSpec{std::make_shared<FaceSceneMean>(scene, key), 0.2});
    const ConditionEmbedding c(4, key);
    const DiffusionSchedule s = default_schedule();

    std::vector<Interval> ci;
    std::string summary;
    for (double gamma : {0.0, 0.1, 0.2}) {
        std::vector<double> tc;
        for (std::size_t r = 0; r < runs; ++r) {
            StageConfig cfg;
            cfg.gamma = gamma;
            cfg.rng = RngSpec{104, r};
            tc.push_back(temporal_consistency(t2v_vcd(c, scene.frames, 1, scene.height, scene.width, cfg, s, den)));
        }
        ci.push_back(bootstrap_mean(tc, 7));
        summary += "g=" + fmt("%.1f", gamma) + ": " + fmt("%.4f", ci.back().mean) + " [" + fmt("%.4f", ci.back().lo) +
                   ", " + fmt("%.4f", ci.back().hi) + "]  ";
    }
    const double t = seconds_since(t0);
    const bool pass = ci[0].hi < ci[1].lo && ci[1].hi < ci[2].lo && t < 300.0;
    return {pass, summary + "(" + std::to_string(runs) + " runs/gamma, " + fmt("%.0f", t) + " s)"};
}

Verdict ac5_gradient() {
    const auto t0 = Clock::now();
    const CheckResult r = check_token_gradient(5, 1e-4, 1e-4, RngSpec{105, 0});
    const double t = seconds_since(t0);
    return {r.pass && t < 30.0, "max rel err=" + fmt("%.2e", r.measured) + " (tol 1e-4), " + r.detail + ", " +
                                    fmt("%.2f", t) + " s"};
}

Verdict ac6_masked_contract() {
    const DiffusionSchedule s = default_schedule();
    std::size_t failures = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const RngSpec r{106, trial};
        Rng gen(derive(r, "shape"));
        const std::size_t ch = 1 + static_cast<std::size_t>(gen.uniform_int(0, 1));
        const std::size_t h = 3 + static_cast<std::size_t>(gen.uniform_int(0, 4));
        const std::size_t w = 3 + static_cast<std::size_t>(gen.uniform_int(0, 4));
        const std::size_t d = 3 + static_cast<std::size_t>(gen.uniform_int(0, 5));
        const std::size_t prompt = 1 + static_cast<std::size_t>(gen.uniform_int(0, 2));
        const std::size_t k = 1 + static_cast<std::size_t>(gen.uniform_int(0, 3));
        const int t = static_cast<int>(gen.uniform_int(1, s.steps()));
        const TinyDenoiserParams p = init_tiny_params(ch, h, w, d, 8, derive(r, "params"));
        const Shape shape{1, ch, h, w};
        const VideoTensor z = sample_standard_normal(shape, derive(r, "z"));
        VideoTensor eps = sample_standard_normal(shape, derive(r, "eps"));
        VideoTensor hat = sample_standard_normal(shape, derive(r, "hat"));
        RegionMask mask(1, h, w);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                mask.set(0, y, x, gen.uniform() < 0.5);
        mask.set(0, h / 2, w / 2, true);
        const VideoTensor vals = sample_standard_normal({1, 1, 1, (prompt + k) * d}, derive(r, "cond"));
        const ConditionEmbedding c(d, std::vector<double>(vals.data().begin(), vals.data().end()));

        const double loss_before = masked_loss(hat, eps, mask);
        const TokenGradient g_before = grad_loss_wrt_embedding(z, eps, c, t, s, p, mask, prompt);
        for (std::size_t cc = 0; cc < ch; ++cc)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    if (!mask.at(0, y, x)) {
                        eps.at(0, cc, y, x) += 10.0 * gen.normal();
                        hat.at(0, cc, y, x) -= 10.0 * gen.normal();
                    }
        const TokenGradient g_after = grad_loss_wrt_embedding(z, eps, c, t, s, p, mask, prompt);
        if (masked_loss(hat, eps, mask) != loss_before || g_after.loss != g_before.loss ||
            g_after.tokens != g_before.tokens)
            ++failures;
    }
    return {failures == 0, std::to_string(100 - failures) + "/100 randomized trials bit-exact (loss and gradient)"};
}

Verdict ac7_planted_recovery() {
    const auto t0 = Clock::now();
    const DiffusionSchedule s = default_schedule();
    double planted = 0.0, init4 = 0.0, final4 = 0.0, final1 = 0.0;
    const int seeds = 5;
    for (int seed = 0; seed < seeds; ++seed) {
        const IdentityToy toy = make_identity_toy(IdentityToyConfig{}, s, RngSpec{107, static_cast<std::uint64_t>(seed)});
        const RngSpec eval = RngSpec{1107, static_cast<std::uint64_t>(seed)};
        const RngSpec train = RngSpec{2107, static_cast<std::uint64_t>(seed)};
        TiConfig k4;
        TiConfig k1;
        k1.tokens = 1;
        const TiResult r4 = train_id_tokens(toy.samples, toy.backbone, s, k4, train);
        const TiResult r1 = train_id_tokens(toy.samples, toy.backbone, s, k1, train);
        planted += evaluate_id_loss(toy.samples, toy.backbone, s, toy.planted, eval, 32);
        init4 += evaluate_id_loss(toy.samples, toy.backbone, s, r4.initial, eval, 32);
        final4 += evaluate_id_loss(toy.samples, toy.backbone, s, r4.embedding, eval, 32);
        final1 += evaluate_id_loss(toy.samples, toy.backbone, s, r1.embedding, eval, 32);
    }
    planted /= seeds;
    init4 /= seeds;
    final4 /= seeds;
    final1 /= seeds;
    const double t = seconds_since(t0);
    const bool pass = final4 <= 1.1 * planted && final4 <= final1 && t < 120.0;
    return {pass, "planted=" + fmt("%.5f", planted) + " init(k=4)=" + fmt("%.5f", init4) +
                      " final(k=4)=" + fmt("%.5f", final4) + " final(k=1)=" + fmt("%.5f", final1) +
                      " ratio=" + fmt("%.4f", final4 / planted) +
                      " init/planted=" + fmt("%.4f", init4 / planted) + " (5 seeds, " + fmt("%.1f", t) + " s)"};
}

struct SceneFixture {
    FaceSceneConfig scene;
    std::vector<double> key{0.6, -0.2, 0.5, 0.1};
    std::shared_ptr<FaceSceneMean> mean;
    std::unique_ptr<AnalyticDenoiser> den;
    std::unique_ptr<SyntheticMaskProvider> provider;
    ConditionEmbedding c{4, {0.6, -0.2, 0.5, 0.1}};

    SceneFixture(std::size_t frames, std::size_t size) {
        scene.frames = frames;
        scene.height = size;
        scene.width = size;
        mean = std::make_shared<FaceSceneMean>(scene, key);
        den = std::make_unique<AnalyticDenoiser>(GaussianDataSpec{mean, 0.2});
        provider = std::make_unique<SyntheticMaskProvider>(face_scene_spec(scene));
    }
};

double rms(const VideoTensor& a, const VideoTensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    return std::sqrt(s / static_cast<double>(a.numel()));
}

Verdict ac8_degeneracies() {
    const DiffusionSchedule s = default_schedule();
    const SceneFixture fx(8, 32);
    StageConfig base;
    base.rng = RngSpec{108, 0};
    const VideoTensor video = t2v_vcd(fx.c, 8, 1, 32, 32, base, s, *fx.den);

    // Face VCD at strength 0: inside-box RMSE bounded by the measured resize round trip.
    StageConfig zero = base;
    zero.face_strength = 0.0;
    zero.tile_strength = 0.0;
    const FaceVcdResult f0 = face_vcd_detail(video, *fx.provider, fx.c, zero, s, *fx.den, RngSpec{108, 1});
    double worst_ratio = 0.0;
    bool face_ok = true;
    for (std::size_t m = 0; m < video.frames(); ++m) {
        const BBox& b = f0.boxes[m];
        const BBox fb{m, b.x0, b.y0, b.x1, b.y1};
        const VideoTensor orig = crop(video, fb);
        const VideoTensor trip = resize_bilinear(
            resize_bilinear(resize_bilinear(orig, f0.face_height, f0.face_width), f0.face_height * zero.upscale,
                            f0.face_width * zero.upscale),
            static_cast<std::size_t>(b.height()), static_cast<std::size_t>(b.width()));
        const double bound = rms(trip, orig);
        const double got = rms(crop(f0.video, fb), orig);
        face_ok = face_ok && got <= bound + 1e-12;
        if (bound > 0.0)
            worst_ratio = std::max(worst_ratio, got / bound);
    }

    // Tiled VCD at strength 0: bit-exact upscale.
    const BilinearUpscaler up;
    const bool tile_ok = tiled_vcd(video, up, fx.c, zero, s, *fx.den, RngSpec{108, 2}) == up.upscale(video, 2);

    // Outside-box pixels at any strength.
    std::size_t outside_changes = 0;
    for (double strength : {0.2, 0.5, 0.8, 1.0}) {
        StageConfig cfg = base;
        cfg.face_strength = strength;
        const FaceVcdResult r = face_vcd_detail(video, *fx.provider, fx.c, cfg, s, *fx.den, RngSpec{108, 3});
        for (std::size_t m = 0; m < video.frames(); ++m) {
            const BBox& b = r.boxes[m];
            for (std::size_t y = 0; y < 32; ++y)
                for (std::size_t x = 0; x < 32; ++x) {
                    const bool inside = static_cast<int>(x) >= b.x0 && static_cast<int>(x) < b.x1 &&
                                        static_cast<int>(y) >= b.y0 && static_cast<int>(y) < b.y1;
                    if (!inside && r.video.at(m, 0, y, x) != video.at(m, 0, y, x))
                        ++outside_changes;
                }
        }
    }
    return {face_ok && tile_ok && outside_changes == 0,
            std::string("face s=0 within round-trip RMSE: ") + (face_ok ? "yes" : "no") + " (worst ratio " +
                fmt("%.3f", worst_ratio) + "); tiled s=0 bit-exact: " + (tile_ok ? "yes" : "no") +
                "; outside-box changes at s in {0.2,0.5,0.8,1}: " + std::to_string(outside_changes)};
}

Verdict ac9_tiling() {
    const DiffusionSchedule s = default_schedule();
    const SceneFixture fx(4, 16);
    const BilinearUpscaler up;
    std::size_t equal = 0;
    const std::size_t trials = 5;
    for (std::uint64_t i = 0; i < trials; ++i) {
        StageConfig cfg;
        cfg.rng = RngSpec{109, i};
        const VideoTensor video = t2v_vcd(fx.c, 4, 1, 16, 16, cfg, s, *fx.den);
        const VideoTensor tiled = tiled_vcd(video, up, fx.c, cfg, s, *fx.den, RngSpec{209, i});
        const VideoTensor whole = partial_denoise(up.upscale(video, 2), cfg.tile_strength, fx.c, cfg, s, *fx.den,
                                                  RngSpec{209, i});
        equal += tiled == whole;
    }
    return {equal == trials, std::to_string(equal) + "/" + std::to_string(trials) +
                                 " seeds: 2x2 tiled == untiled bit-exact (f=4, 32x32 upscaled)"};
}

std::vector<double> read_identity_column(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line)) {
        const auto last = line.rfind(',');
        out.push_back(std::stod(line.substr(last + 1)));
    }
    return out;
}

Verdict ac10_stage_identity() {
    const auto t0 = Clock::now();
    const fs::path root = scratch("ac10");
    if (run_cli({"make-toy", "--out", (root / "toy").string()}) != 0 ||
        run_cli({"train-id", "--data", (root / "toy").string(), "--out", (root / "ti").string()}) != 0)
        return {false, "could not build the identity toy"};
    const int runs = 50;
    std::vector<double> mean(3, 0.0);
    for (int r = 0; r < runs; ++r) {
        const fs::path out = root / ("gen" + std::to_string(r));
        if (run_cli({"generate", "--embedding", (root / "ti" / "embedding.vcde").string(), "--data",
                     (root / "toy").string(), "--seed", std::to_string(r), "--out", out.string()}) != 0)
            return {false, "generate failed on run " + std::to_string(r)};
        const auto col = read_identity_column(out / "metrics.csv");
        if (col.size() != 3)
            return {false, "malformed metrics.csv"};
        for (int i = 0; i < 3; ++i)
            mean[i] += col[i] / runs;
        fs::remove_all(out);
    }
    fs::remove_all(root);
    const bool pass = mean[0] <= mean[1] && mean[1] <= mean[2];
    return {pass, "identity similarity stage1=" + fmt("%.4f", mean[0]) + " stage2=" + fmt("%.4f", mean[1]) +
                      " stage3=" + fmt("%.4f", mean[2]) + " (50 runs, f=8, 32x32, sigma0=0.2, " +
                      fmt("%.0f", seconds_since(t0)) + " s)"};
}

bool same_outputs(const fs::path& a, const fs::path& b, std::size_t& files) {
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file() || entry.path().filename() == "manifest.json")
            continue;
        const fs::path rel = fs::relative(entry.path(), a);
        if (!fs::exists(b / rel) || read_file(entry.path()) != read_file(b / rel))
            return false;
        ++files;
    }
    return true;
}

Verdict ac11_replay() {
    const fs::path root = scratch("ac11");
    const std::string toy = (root / "toy").string();
    const std::string emb = (root / "ti" / "embedding.vcde").string();
    const std::vector<std::vector<std::string>> runs{
        {"sample-noise", "--samples", "4", "--seed", "11", "--out", (root / "noise").string()},
        {"make-toy", "--seed", "11", "--out", toy},
        {"train-id", "--data", toy, "--seed", "11", "--out", (root / "ti").string()},
        {"generate", "--embedding", emb, "--data", toy, "--seed", "11", "--pgm", "--out", (root / "gen").string()},
    };
    std::size_t ok = 0, files = 0;
    for (const auto& args : runs) {
        if (run_cli(args) != 0)
            continue;
        const fs::path src = args.back();
        const fs::path dst = src.string() + "_replay";
        if (run_cli({"replay", "--manifest", (src / "manifest.json").string(), "--out", dst.string()}) != 0)
            continue;
        ok += same_outputs(src, dst, files);
    }
    fs::remove_all(root);
    return {ok == runs.size(), std::to_string(ok) + "/" + std::to_string(runs.size()) +
                                   " commands replayed byte-for-byte (" + std::to_string(files) + " files)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"AC-1", ac1_covariance},       {"AC-2", ac2_agreement},        {"AC-3", ac3_reverse_chain},
        {"AC-4", ac4_gamma_direction},  {"AC-5", ac5_gradient},         {"AC-6", ac6_masked_contract},
        {"AC-7", ac7_planted_recovery}, {"AC-8", ac8_degeneracies},     {"AC-9", ac9_tiling},
        {"AC-10", ac10_stage_identity}, {"AC-11", ac11_replay},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%-5s %s  %s\n", name.c_str(), v.pass ? "PASS" : "FAIL", v.summary.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
