// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vcd/face_scene.hpp"
#include "vcd/id_module.hpp"
#include "vcd/rng.hpp"
#include "vcd/schedule.hpp"
#include "vcd/tiny_denoiser.hpp"

using namespace vcd;

namespace {

struct SmallTask {
    TinyDenoiserParams backbone;
    std::vector<TrainingSample> samples;
};

SmallTask small_task(bool full_mask, const RngSpec& rng) {
    SmallTask task;
    task.backbone = init_tiny_params(1, 4, 4, 6, 16, derive(rng, "backbone"));
    for (std::size_t i = 0; i < 3; ++i) {
        TrainingSample s;
        s.image = sample_standard_normal({1, 1, 4, 4}, derive(rng, "image", i));
        s.mask = full_mask ? RegionMask::full(1, 4, 4) : central_disk_mask(4, 4, 0.3);
        const VideoTensor p = sample_standard_normal({1, 1, 1, 12}, derive(rng, "prompt"));
        s.base_condition = ConditionEmbedding(6, std::vector<double>(p.data().begin(), p.data().end()));
        task.samples.push_back(std::move(s));
    }
    return task;
}

// Plain single-token textual inversion: unmasked MSE, one token, plain GD.
std::vector<double> vanilla_ti_curve(const SmallTask& task, const DiffusionSchedule& s, const TiConfig& cfg,
                                     const RngSpec& rng, std::vector<double> token) {
    std::vector<double> curve;
    const std::size_t d = token.size();
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<double> grad(d, 0.0);
        double loss = 0.0;
        for (const TrainingDraw& draw : draw_training_batch(rng, step, task.samples.size(), cfg.batch, s.steps())) {
            const TrainingSample& sample = task.samples[draw.sample];
            const VideoTensor eps = sample_standard_normal(sample.image.shape(), draw.eps_stream);
            const VideoTensor zt = forward_diffuse(sample.image, eps, draw.t, s);
            const ConditionEmbedding c = sample.base_condition.concat(ConditionEmbedding(d, token));
            const VideoTensor hat = predict_eps_tiny(zt, c, draw.t, s, task.backbone);
            double mse = 0.0;
            for (std::size_t i = 0; i < hat.numel(); ++i)
                mse += (hat.data()[i] - eps.data()[i]) * (hat.data()[i] - eps.data()[i]);
            loss += mse / static_cast<double>(hat.numel());
            const TokenGradient g = grad_loss_wrt_embedding(zt, eps, c, draw.t, s, task.backbone,
                                                            RegionMask::full(1, 4, 4), sample.base_condition.size());
            for (std::size_t j = 0; j < d; ++j)
                grad[j] += g.tokens[0][j];
        }
        curve.push_back(loss / static_cast<double>(cfg.batch));
        for (std::size_t j = 0; j < d; ++j)
            token[j] -= cfg.lr * grad[j] / static_cast<double>(cfg.batch);
    }
    return curve;
}

std::size_t count_disk_pixels(double cx, double cy, double r, std::size_t h, std::size_t w) {
    std::size_t n = 0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            n += dx * dx + dy * dy <= r * r;
        }
    return n;
}

}  // namespace

TEST_SUITE("id_module") {

TEST_CASE("masked loss of a single masked site") {
    const VideoTensor hat(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 0.0});
    const VideoTensor eps(Shape{1, 1, 1, 2}, 0.0);
    CHECK(masked_loss(hat, eps, RegionMask(1, 1, 2, {1, 0})) == 1.0);
    CHECK_THROWS(masked_loss(hat, eps, RegionMask(1, 1, 2)));
    CHECK_THROWS(masked_loss(hat, VideoTensor(Shape{1, 1, 2, 1}, 0.0), RegionMask(1, 1, 2, {1, 0})));
}

TEST_CASE("full mask reduces to plain mean squared error") {
    const VideoTensor a = vcd::testing::reference_normals({2, 3, 4, 5}, 1);
    const VideoTensor b = vcd::testing::reference_normals({2, 3, 4, 5}, 2);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        mse += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    mse /= static_cast<double>(a.numel());
    CHECK(masked_loss(a, b, RegionMask::full(2, 4, 5)) == doctest::Approx(mse).epsilon(1e-14));
}

TEST_CASE("masked loss normalizes by masked sites times channels") {
    const VideoTensor hat(Shape{1, 2, 2, 2}, 1.0);
    const VideoTensor eps(Shape{1, 2, 2, 2}, 0.0);
    RegionMask m(1, 2, 2);
    m.set(0, 1, 0, true);
    CHECK(masked_loss(hat, eps, m) == 1.0);
}

TEST_CASE("values outside the mask never affect the loss") {
    const VideoTensor a = vcd::testing::reference_normals({1, 2, 6, 6}, 3);
    VideoTensor b = vcd::testing::reference_normals({1, 2, 6, 6}, 4);
    const RegionMask m = central_disk_mask(6, 6, 0.3);
    const double before = masked_loss(a, b, m);
    VideoTensor a2 = a;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 6; ++y)
            for (std::size_t x = 0; x < 6; ++x)
                if (!m.at(0, y, x)) {
                    a2.at(0, c, y, x) = 1e6;
                    b.at(0, c, y, x) = -3.0;
                }
    CHECK(masked_loss(a2, b, m) == before);
}

TEST_CASE("identity tokens follow the prompt in the condition") {
    const ConditionEmbedding prompt(2, {1, 2, 3, 4});
    const IdEmbedding id(1, 2, {5, 6});
    const ConditionEmbedding c = compose_condition(prompt, id);
    CHECK(c.size() == 3);
    CHECK(c.token(2)[0] == 5.0);
    CHECK_THROWS(compose_condition(prompt, IdEmbedding(1, 3, {1, 2, 3})));
    CHECK_THROWS(IdEmbedding(0, 2, {}));
}

TEST_CASE("initial tokens have the configured spread") {
    const IdEmbedding e = init_id_embedding(64, 64, 0.02, RngSpec{5, 0});
    CHECK(e.tokens() == 64);
    CHECK(vcd::testing::variance_of(e.values()) == doctest::Approx(0.02 * 0.02).epsilon(0.05));
}

TEST_CASE("zero learning rate or zero steps keep the initial tokens") {
    const DiffusionSchedule s = default_schedule();
    const SmallTask task = small_task(false, RngSpec{6, 0});
    TiConfig cfg;
    cfg.lr = 0.0;
    cfg.steps = 20;
    const TiResult r = train_id_tokens(task.samples, task.backbone, s, cfg, RngSpec{6, 1});
    CHECK(r.embedding == r.initial);
    CHECK(r.loss_curve.size() == 20);
    CHECK(r.initial == init_id_embedding(4, 6, 0.02, RngSpec{6, 1}));

    cfg.lr = 1e-3;
    cfg.steps = 0;
    const TiResult z = train_id_tokens(task.samples, task.backbone, s, cfg, RngSpec{6, 1});
    CHECK(z.embedding == z.initial);
    CHECK(z.loss_curve.empty());
}

TEST_CASE("training is deterministic and never touches the backbone") {
    const DiffusionSchedule s = default_schedule();
    const SmallTask task = small_task(false, RngSpec{7, 0});
    const TinyDenoiserParams before = task.backbone;
    TiConfig cfg;
    cfg.lr = 0.5;
    cfg.steps = 15;
    const TiResult a = train_id_tokens(task.samples, task.backbone, s, cfg, RngSpec{7, 1});
    const TiResult b = train_id_tokens(task.samples, task.backbone, s, cfg, RngSpec{7, 1});
    CHECK(a.embedding == b.embedding);
    CHECK(a.loss_curve == b.loss_curve);
    CHECK_FALSE(a.embedding == a.initial);
    CHECK(task.backbone == before);
}

TEST_CASE("single token with a full mask is plain textual inversion") {
    const DiffusionSchedule s = default_schedule();
    const SmallTask task = small_task(true, RngSpec{8, 0});
    TiConfig cfg;
    cfg.tokens = 1;
    cfg.lr = 0.3;
    cfg.steps = 12;
    const IdEmbedding init = init_id_embedding(1, 6, 0.02, RngSpec{8, 1});
    const TiResult r = train_id_tokens(task.samples, task.backbone, s, cfg, RngSpec{8, 1}, init);
    const auto ref = vanilla_ti_curve(task, s, cfg, RngSpec{8, 1}, std::vector<double>(init.values().begin(), init.values().end()));
    REQUIRE(ref.size() == r.loss_curve.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(r.loss_curve[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("training validates its inputs") {
    const DiffusionSchedule s = default_schedule();
    const SmallTask task = small_task(false, RngSpec{9, 0});
    TiConfig cfg;
    CHECK_THROWS(train_id_tokens(std::span<const TrainingSample>(), task.backbone, s, cfg, RngSpec{}));
    cfg.batch = 0;
    CHECK_THROWS(train_id_tokens(task.samples, task.backbone, s, cfg, RngSpec{}));
    CHECK_THROWS(train_id_tokens(task.samples, task.backbone, s, TiConfig{}, RngSpec{}, IdEmbedding(4, 5, std::vector<double>(20, 0.0))));
}

TEST_CASE("training batches draw valid indices and timesteps") {
    for (int step = 0; step < 50; ++step)
        for (const TrainingDraw& d : draw_training_batch(RngSpec{1, 1}, step, 5, 4, 1000)) {
            CHECK(d.sample < 5);
            CHECK(d.t >= 1);
            CHECK(d.t <= 1000);
        }
}

TEST_CASE("planted tokens are recovered on the identity toy") {
    const DiffusionSchedule s = default_schedule();
    const IdentityToy toy = make_identity_toy(IdentityToyConfig{}, s, RngSpec{12, 0});
    const RngSpec eval{12, 99};
    const double planted = evaluate_id_loss(toy.samples, toy.backbone, s, toy.planted, eval, 32);
    TiConfig cfg;
    const TiResult r = train_id_tokens(toy.samples, toy.backbone, s, cfg, RngSpec{12, 1});
    const double trained = evaluate_id_loss(toy.samples, toy.backbone, s, r.embedding, eval, 32);
    CHECK(trained <= 1.1 * planted);
    CHECK(trained <= evaluate_id_loss(toy.samples, toy.backbone, s, r.initial, eval, 32) + 1e-12);
}

TEST_CASE("a centred disk of radius 4 covers about 50 pixels inside a tight box") {
    SceneSpec scene{32, 32, {{PlacedSubject{"face", SubjectShape::Disk, 16.0, 16.0, 4.0, 4.0}}}};
    const SyntheticMaskProvider provider(scene);
    const Detection d = provider.detect(VideoTensor(Shape{1, 1, 32, 32}, 0.0), 0, "face");
    CHECK(d.mask.count() == count_disk_pixels(16, 16, 4, 32, 32));
    CHECK(std::abs(static_cast<double>(d.mask.count()) - M_PI * 16.0) < 6.0);
    CHECK(d.box == BBox{0, 12, 12, 20, 20});
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
            if (d.mask.at(0, y, x)) {
                CHECK(static_cast<int>(x) >= d.box.x0);
                CHECK(static_cast<int>(x) < d.box.x1);
                CHECK(static_cast<int>(y) >= d.box.y0);
                CHECK(static_cast<int>(y) < d.box.y1);
            }
    CHECK(provider.kind() == "synthetic-scene");
}

TEST_CASE("a full-frame subject yields a full mask and box") {
    SceneSpec scene{8, 10, {{PlacedSubject{"face", SubjectShape::Rect, 5.0, 4.0, 5.0, 4.0}}}};
    const Detection d = SyntheticMaskProvider(scene).detect(VideoTensor(Shape{1, 1, 8, 10}, 0.0), 0, "face");
    CHECK(d.mask.count() == 80);
    CHECK(d.box == BBox{0, 0, 0, 10, 8});
}

TEST_CASE("translated subjects give translated boxes") {
    SceneSpec scene{32, 32,
                    {{PlacedSubject{"face", SubjectShape::Disk, 10.0, 12.0, 3.0, 3.0}},
                     {PlacedSubject{"face", SubjectShape::Disk, 12.0, 12.0, 3.0, 3.0}}}};
    const SyntheticMaskProvider provider(scene);
    const VideoTensor video(Shape{2, 1, 32, 32}, 0.0);
    const BBox a = provider.detect(video, 0, "face").box;
    const BBox b = provider.detect(video, 1, "face").box;
    CHECK(b.x0 == a.x0 + 2);
    CHECK(b.x1 == a.x1 + 2);
    CHECK(b.y0 == a.y0);
    CHECK(b.y1 == a.y1);
}

TEST_CASE("detection scales geometry to the video resolution") {
    SceneSpec scene{16, 16, {{PlacedSubject{"face", SubjectShape::Rect, 8.0, 8.0, 2.0, 2.0}}}};
    const Detection d = SyntheticMaskProvider(scene).detect(VideoTensor(Shape{1, 1, 32, 32}, 0.0), 0, "face");
    CHECK(d.box == BBox{0, 12, 12, 20, 20});
}

TEST_CASE("absent subjects are reported") {
    SceneSpec scene{16, 16, {{PlacedSubject{"face", SubjectShape::Disk, 8.0, 8.0, 2.0, 2.0}}, {}}};
    const SyntheticMaskProvider provider(scene);
    const VideoTensor video(Shape{2, 1, 16, 16}, 0.0);
    CHECK_THROWS(provider.detect(video, 0, "dog"));
    CHECK_THROWS(provider.detect(video, 1, "face"));
    CHECK_THROWS(provider.detect(video, 2, "face"));
}

}  // TEST_SUITE
