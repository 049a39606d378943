// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "vcd/face_scene.hpp"
#include "vcd/id_module.hpp"
#include "vcd/imaging.hpp"
#include "vcd/metrics.hpp"
#include "vcd/noise_prior.hpp"
#include "vcd/pipeline.hpp"
#include "vcd/tensor_io.hpp"
#include "vcd/validation.hpp"

namespace vcd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& msg) {
    if (!ok)
        throw UsageError(msg);
}

// --- options ---------------------------------------------------------------

struct SampleNoiseOpts {
    std::size_t frames = 16;
    double gamma = 0.1;
    std::size_t samples = 64;
    std::size_t channels = 1;
    std::size_t height = 32;
    std::size_t width = 32;
    std::string sampler = "ar1";
    std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SampleNoiseOpts, frames, gamma, samples, channels, height, width,
                                                sampler, seed)

struct MakeToyOpts {
    std::size_t samples = 8;
    std::size_t prompt_tokens = 3;
    std::size_t planted_tokens = 4;
    std::size_t token_dim = 16;
    std::size_t height = 8;
    std::size_t width = 8;
    double planted_std = 0.5;
    int pretrain_steps = 1000;
    double pretrain_lr = 0.2;
    int timesteps = kDefaultTimesteps;
    std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MakeToyOpts, samples, prompt_tokens, planted_tokens, token_dim,
                                                height, width, planted_std, pretrain_steps, pretrain_lr, timesteps,
                                                seed)

struct TrainIdOpts {
    std::string data;
    std::size_t tokens = 4;
    double lr = 1e-3;
    std::size_t batch = 4;
    int steps = 200;
    double init_std = 0.02;
    int timesteps = kDefaultTimesteps;
    std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainIdOpts, data, tokens, lr, batch, steps, init_std, timesteps,
                                                seed)

struct GenerateOpts {
    std::string embedding;
    std::string data;
    double gamma = 0.1;
    double face_strength = 0.8;
    double tile_strength = 0.2;
    std::string grid = "2x2";
    double dilation = 0.3;
    std::size_t upscale = 2;
    std::string step_noise = "prior";
    std::string denoiser = "analytic";
    std::size_t frames = 8;
    std::size_t height = 32;
    std::size_t width = 32;
    double sigma0 = 0.2;
    std::size_t reference_size = 32;
    int timesteps = kDefaultTimesteps;
    bool pgm = false;
    std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerateOpts, embedding, data, gamma, face_strength, tile_strength,
                                                grid, dilation, upscale, step_noise, denoiser, frames, height, width,
                                                sigma0, reference_size, timesteps, pgm, seed)

// --- manifest --------------------------------------------------------------

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string run_id(const std::string& command, const json& args) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : command + "\n" + args.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const fs::path& out, const std::string& command, const json& args,
                    const std::vector<std::string>& outputs, const json& details) {
    json m;
    m["schema"] = 1;
    m["command"] = command;
    m["run_id"] = run_id(command, args);
    m["timestamp"] = utc_timestamp();
    m["args"] = args;
    m["output_dir"] = fs::absolute(out).string();
    m["outputs"] = outputs;
    m["details"] = details;
    write_text_atomic(out / "manifest.json", m.dump(2) + "\n");
}

json schedule_json(const DiffusionSchedule& s) {
    return {{"T", s.steps()}, {"beta_start", s.beta_start()}, {"beta_end", s.beta_end()}};
}

std::string absolute_or_empty(const std::string& p) {
    return p.empty() ? p : fs::absolute(p).string();
}

// --- helpers ---------------------------------------------------------------

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& g) {
    const auto x = g.find('x');
    require(x != std::string::npos && x > 0 && x + 1 < g.size(), "grid must look like RxC, got '" + g + "'");
    try {
        std::size_t used = 0;
        const auto rows = std::stoul(g.substr(0, x), &used);
        require(used == x, "bad grid rows in '" + g + "'");
        const auto cols = std::stoul(g.substr(x + 1), &used);
        require(used == g.size() - x - 1, "bad grid cols in '" + g + "'");
        require(rows >= 1 && cols >= 1, "grid dims must be >= 1");
        return {rows, cols};
    } catch (const std::logic_error&) {
        throw UsageError("grid must look like RxC, got '" + g + "'");
    }
}

struct ToyFiles {
    ConditionEmbedding prompt;
    IdEmbedding planted;
    TinyDenoiserParams backbone;
    std::vector<TrainingSample> samples;
};

ToyFiles load_toy(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("dataset directory '" + dir.string() + "' does not exist");
    ToyFiles toy;
    const IdEmbedding prompt = load_embedding(dir / "prompt.vcde");
    toy.prompt = prompt.as_condition();
    toy.planted = load_embedding(dir / "planted.vcde");
    toy.backbone = load_params(dir / "backbone.vcdp");
    const VideoTensor images = load_tensor(dir / "images.vcdt");
    const VideoTensor masks = load_tensor(dir / "masks.vcdt");
    if (masks.frames() != images.frames() || masks.channels() != 1 || masks.height() != images.height() ||
        masks.width() != images.width())
        throw std::runtime_error("masks.vcdt does not match images.vcdt");
    for (std::size_t i = 0; i < images.frames(); ++i) {
        RegionMask mask(1, images.height(), images.width());
        for (std::size_t y = 0; y < images.height(); ++y)
            for (std::size_t x = 0; x < images.width(); ++x) {
                const double v = masks.at(i, 0, y, x);
                if (v != 0.0 && v != 1.0)
                    throw std::runtime_error("masks.vcdt holds a value other than 0 or 1");
                mask.set(0, y, x, v == 1.0);
            }
        toy.samples.push_back(TrainingSample{images.frames_slice(i, 1), std::move(mask), toy.prompt});
    }
    return toy;
}

std::string loss_csv(const std::vector<double>& curve) {
    std::string s = "step,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        s += std::to_string(i) + "," + format_double(curve[i]) + "\n";
    return s;
}

// --- commands --------------------------------------------------------------

void cmd_sample_noise(const SampleNoiseOpts& o, const fs::path& out, std::ostream& log) {
    require(o.frames >= 1 && o.samples >= 1 && o.channels >= 1 && o.height >= 1 && o.width >= 1,
            "frames, samples, channels, height and width must be >= 1");
    require(o.gamma >= 0.0 && o.gamma < 1.0, "--gamma must lie in [0, 1)");
    PriorSampler sampler;
    try {
        sampler = parse_prior_sampler(o.sampler);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    fs::create_directories(out);
    const CorrelationSpec spec{o.frames, o.gamma};
    const RngSpec root{o.seed, 0};
    std::vector<VideoTensor> samples;
    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < o.samples; ++i) {
        const RngSpec r = derive(root, "sample-noise", i);
        samples.push_back(sampler == PriorSampler::Ar1 ? sample_prior_ar1(spec, o.channels, o.height, o.width, r)
                                                       : sample_prior_factorized(spec, o.channels, o.height, o.width, r));
        char name[32];
        std::snprintf(name, sizeof name, "sample_%04zu.vcdt", i);
        save_tensor(samples.back(), out / name);
        outputs.emplace_back(name);
    }
    std::string csv;
    if (o.samples * o.channels * o.height * o.width >= 2) {
        const Eigen::MatrixXd cov = empirical_covariance(samples);
        for (Eigen::Index r = 0; r < cov.rows(); ++r) {
            for (Eigen::Index c = 0; c < cov.cols(); ++c)
                csv += (c ? "," : "") + format_double(cov(r, c));
            csv += "\n";
        }
    }
    write_text_atomic(out / "covariance.csv", csv);
    outputs.emplace_back("covariance.csv");
    write_manifest(out, "sample-noise", json(o), outputs,
                   {{"sampler", to_string(sampler)}, {"rng_stream_tag", "sample-noise"}});
    log << "wrote " << o.samples << " prior samples and covariance.csv to " << out.string() << "\n";
}

void cmd_make_toy(const MakeToyOpts& o, const fs::path& out, std::ostream& log) {
    require(o.samples >= 1 && o.prompt_tokens >= 1 && o.planted_tokens >= 1 && o.token_dim >= 1,
            "samples, token counts and token dim must be >= 1");
    require(o.height >= 2 && o.width >= 2, "toy images need height and width >= 2");
    require(o.timesteps >= 1, "--timesteps must be >= 1");
    require(o.pretrain_steps >= 0 && o.pretrain_lr >= 0.0, "pretraining steps and lr must be >= 0");
    fs::create_directories(out);
    IdentityToyConfig cfg;
    cfg.samples = o.samples;
    cfg.prompt_tokens = o.prompt_tokens;
    cfg.planted_tokens = o.planted_tokens;
    cfg.token_dim = o.token_dim;
    cfg.height = o.height;
    cfg.width = o.width;
    cfg.planted_std = o.planted_std;
    cfg.pretrain.steps = o.pretrain_steps;
    cfg.pretrain.lr = o.pretrain_lr;
    const DiffusionSchedule s = build_schedule(o.timesteps, kDefaultBetaStart, kDefaultBetaEnd);
    const IdentityToy toy = make_identity_toy(cfg, s, RngSpec{o.seed, 0});

    std::vector<VideoTensor> images, masks;
    for (const TrainingSample& ts : toy.samples) {
        images.push_back(ts.image);
        VideoTensor m(Shape{1, 1, ts.mask.height(), ts.mask.width()});
        for (std::size_t y = 0; y < ts.mask.height(); ++y)
            for (std::size_t x = 0; x < ts.mask.width(); ++x)
                m.at(0, 0, y, x) = ts.mask.at(0, y, x) ? 1.0 : 0.0;
        masks.push_back(std::move(m));
    }
    save_tensor(concat_frames(images), out / "images.vcdt");
    save_tensor(concat_frames(masks), out / "masks.vcdt");
    save_embedding(IdEmbedding(toy.prompt.size(), toy.prompt.dim(),
                               std::vector<double>(toy.prompt.values().begin(), toy.prompt.values().end())),
                   out / "prompt.vcde");
    save_embedding(toy.planted, out / "planted.vcde");
    save_params(toy.backbone, out / "backbone.vcdp");
    write_text_atomic(out / "pretrain_loss.csv", loss_csv(toy.pretrain_curve));
    write_manifest(out, "make-toy", json(o),
                   {"images.vcdt", "masks.vcdt", "prompt.vcde", "planted.vcde", "backbone.vcdp", "pretrain_loss.csv"},
                   {{"schedule", schedule_json(s)},
                    {"backbone", {{"hidden", toy.backbone.hidden}, {"draws_per_example", cfg.pretrain.draws_per_example}}},
                    {"sample_clip", 2.0},
                    {"mask", {{"shape", "central-disk"}, {"radius_fraction", cfg.mask_radius}}}});
    log << "wrote identity toy (" << o.samples << " samples, pretrain loss " << toy.pretrain_curve.front() << " -> "
        << toy.pretrain_curve.back() << ") to " << out.string() << "\n";
}

void cmd_train_id(const TrainIdOpts& o, const fs::path& out, std::ostream& log) {
    require(!o.data.empty(), "--data is required");
    require(o.tokens >= 1 && o.batch >= 1 && o.steps >= 0, "--tokens and --batch must be >= 1, --steps >= 0");
    require(o.lr >= 0.0 && o.init_std >= 0.0, "--lr and --init-std must be >= 0");
    require(o.timesteps >= 1, "--timesteps must be >= 1");
    const ToyFiles toy = load_toy(o.data);
    fs::create_directories(out);
    const DiffusionSchedule s = build_schedule(o.timesteps, kDefaultBetaStart, kDefaultBetaEnd);
    TiConfig cfg{o.tokens, o.lr, o.batch, o.steps, o.init_std};
    const RngSpec rng{o.seed, 0};
    const TiResult res = train_id_tokens(toy.samples, toy.backbone, s, cfg, rng);
    save_embedding(res.embedding, out / "embedding.vcde");
    write_text_atomic(out / "loss.csv", loss_csv(res.loss_curve));
    write_manifest(out, "train-id", json(o), {"embedding.vcde", "loss.csv"},
                   {{"schedule", schedule_json(s)},
                    {"optimizer", "gradient-descent"},
                    {"k", o.tokens},
                    {"d", toy.backbone.token_dim},
                    {"lr", o.lr},
                    {"batch", o.batch},
                    {"steps", o.steps},
                    {"init", "normal"},
                    {"rng", {{"seed", o.seed}, {"stream", 0}, {"tags", {"ti.init", "ti.step", "ti.eps"}}}},
                    {"backbone_kind", "tiny-mlp"}});
    log << "trained " << o.tokens << " identity tokens for " << o.steps << " steps";
    if (!res.loss_curve.empty())
        log << " (batch loss " << res.loss_curve.front() << " -> " << res.loss_curve.back() << ")";
    log << "; wrote " << (out / "embedding.vcde").string() << "\n";
}

void cmd_generate(const GenerateOpts& o, const fs::path& out, std::ostream& log) {
    require(!o.embedding.empty(), "--embedding is required");
    require(!o.data.empty(), "--data is required");
    require(o.denoiser == "analytic", "--denoiser: only 'analytic' drives the pipeline at arbitrary resolution");
    require(o.frames >= 2 && o.height >= 4 && o.width >= 4, "need frames >= 2 and height, width >= 4");
    require(o.sigma0 > 0.0 && o.reference_size >= 2 && o.timesteps >= 1, "bad sigma0, reference size or timesteps");
    StageConfig cfg;
    try {
        const auto [rows, cols] = parse_grid(o.grid);
        cfg.grid_rows = rows;
        cfg.grid_cols = cols;
        cfg.gamma = o.gamma;
        cfg.face_strength = o.face_strength;
        cfg.tile_strength = o.tile_strength;
        cfg.dilation = o.dilation;
        cfg.upscale = o.upscale;
        cfg.step_noise = parse_step_noise(o.step_noise);
        cfg.denoiser = o.denoiser;
        cfg.rng = RngSpec{o.seed, 0};
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!fs::exists(o.embedding))
        throw std::runtime_error("embedding file '" + o.embedding + "' does not exist");
    const IdEmbedding id = load_embedding(o.embedding);
    const ToyFiles toy = load_toy(o.data);
    if (id.dim() != toy.prompt.dim())
        throw std::runtime_error("embedding dim " + std::to_string(id.dim()) + " does not match prompt dim " +
                                 std::to_string(toy.prompt.dim()));
    fs::create_directories(out);

    FaceSceneConfig scene;
    scene.frames = o.frames;
    scene.height = o.height;
    scene.width = o.width;
    const auto key = compose_condition(toy.prompt, toy.planted).pooled();
    const auto mean = std::make_shared<FaceSceneMean>(scene, key);
    const AnalyticDenoiser denoiser(GaussianDataSpec{mean, o.sigma0});
    const SyntheticMaskProvider provider(face_scene_spec(scene));
    const BilinearUpscaler upscaler;
    const DiffusionSchedule s = build_schedule(o.timesteps, kDefaultBetaStart, kDefaultBetaEnd);

    const PipelineOutput res =
        run_full(toy.prompt, id, o.frames, scene.channels, o.height, o.width, cfg, s, denoiser, provider, upscaler);
    save_tensor(res.stage1, out / "stage1.vcdt");
    save_tensor(res.stage2, out / "stage2.vcdt");
    save_tensor(res.stage3, out / "stage3.vcdt");
    std::vector<std::string> outputs{"stage1.vcdt", "stage2.vcdt", "stage3.vcdt", "metrics.csv"};

    const json args = json(o);
    const std::string id_str = run_id("generate", args);
    const VideoTensor reference = render_face_reference(*mean, o.reference_size);
    std::string csv = metrics_csv_header();
    const std::pair<const char*, const VideoTensor*> stages[] = {
        {"stage1", &res.stage1}, {"stage2", &res.stage2}, {"stage3", &res.stage3}};
    for (const auto& [name, video] : stages) {
        std::vector<BBox> boxes;
        for (std::size_t m = 0; m < video->frames(); ++m)
            boxes.push_back(provider.detect(*video, m, scene.label).box);
        const MetricReport rep = metric_report(*video, reference, boxes);
        csv += metrics_csv_row(id_str, name, rep);
        log << name << ": temporal_consistency=" << rep.temporal_consistency
            << " identity_similarity=" << rep.identity_similarity << "\n";
        if (o.pgm) {
            fs::create_directories(out / "pgm");
            for (std::size_t m = 0; m < video->frames(); ++m) {
                char file[64];
                std::snprintf(file, sizeof file, "pgm/%s_f%02zu.pgm", name, m);
                export_pgm(*video, m, 0, -2.0, 2.0, out / file);
                outputs.emplace_back(file);
            }
        }
    }
    write_text_atomic(out / "metrics.csv", csv);

    const PipelineRecord& rec = res.record;
    json fingerprints = json::array();
    for (auto f : rec.condition_fingerprints)
        fingerprints.push_back(hex64(f));
    json id_training = nullptr;
    const fs::path train_manifest = fs::path(o.embedding).parent_path() / "manifest.json";
    if (fs::exists(train_manifest)) {
        try {
            const json tm = json::parse(std::ifstream(train_manifest));
            if (tm.value("command", "") == "train-id")
                id_training = tm.at("args");
        } catch (const json::exception&) {
        }
    }
    write_manifest(out, "generate", args, outputs,
                   {{"schedule", schedule_json(s)},
                    {"stage_config",
                     {{"gamma", cfg.gamma},
                      {"face_strength", cfg.face_strength},
                      {"tile_strength", cfg.tile_strength},
                      {"grid", {cfg.grid_rows, cfg.grid_cols}},
                      {"dilation", cfg.dilation},
                      {"upscale", cfg.upscale},
                      {"step_noise", to_string(cfg.step_noise)},
                      {"face_label", cfg.face_label}}},
                    {"video", {{"frames", rec.frames}, {"channels", rec.channels}, {"height", rec.height},
                               {"width", rec.width}}},
                    {"rng", {{"seed", o.seed}, {"stream", 0},
                             {"stage_streams", {hex64(rec.stage1_rng_stream), hex64(rec.stage2_rng_stream),
                                                hex64(rec.stage3_rng_stream)}}}},
                    {"components", {{"denoiser", rec.denoiser_kind}, {"upscaler", rec.upscaler_kind},
                                    {"mask_provider", rec.mask_provider_kind}}},
                    {"face_noise", rec.face_noise},
                    {"condition_fingerprints", fingerprints},
                    {"identity", {{"k", id.tokens()}, {"d", id.dim()}, {"training", id_training}}},
                    {"inputs", {{"embedding", absolute_or_empty(o.embedding)}, {"data", absolute_or_empty(o.data)}}},
                    {"metrics", {{"reference_size", o.reference_size}, {"sigma0", o.sigma0}}}});
    log << "wrote stage outputs, metrics.csv and manifest.json to " << out.string() << "\n";
}

struct ValidateOpts {
    bool quick = false;
    std::string inject_fault;
    std::string report;
    std::uint64_t seed = 0;
};

int cmd_validate(const ValidateOpts& o, std::ostream& out) {
    require(o.inject_fault.empty() || o.inject_fault == "gamma", "--inject-fault accepts only 'gamma'");
    const RngSpec root{o.seed, 0};
    const std::size_t n = o.quick ? 20000 : 100000;
    const double cov_tol = o.quick ? 0.045 : 0.02;
    const double sample_gamma = o.inject_fault == "gamma" ? 0.3 : 0.1;
    std::vector<CheckResult> checks;
    checks.push_back(check_covariance(PriorSampler::Ar1, 16, 0.1, sample_gamma, n, cov_tol, derive(root, "cov.ar1")));
    checks.push_back(
        check_covariance(PriorSampler::Factorized, 16, 0.1, sample_gamma, n, cov_tol, derive(root, "cov.fact")));
    checks.push_back(check_sampler_agreement(16, 0.1, n, 0.01, true, derive(root, "agree")));
    checks.push_back(check_token_gradient(o.quick ? 1 : 3, 1e-4, 1e-4, derive(root, "grad")));
    for (auto& c : check_reverse_chain(o.quick ? 5000 : 50000, 0.7, 0.5, o.quick ? 0.03 : 0.02, o.quick ? 0.10 : 0.05,
                                       derive(root, "chain")))
        checks.push_back(std::move(c));

    std::string report;
    bool ok = true;
    for (const auto& c : checks) {
        report += format_check(c) + "\n";
        ok = ok && c.pass;
    }
    report += ok ? "all checks passed\n" : "validation FAILED\n";
    out << report;
    if (!o.report.empty())
        write_text_atomic(o.report, report);
    return ok ? kExitOk : kExitValidation;
}

int replay(const fs::path& manifest_path, const fs::path& out, std::ostream& log) {
    json m;
    try {
        m = json::parse(std::ifstream(manifest_path));
    } catch (const json::exception& e) {
        throw std::runtime_error("cannot read manifest '" + manifest_path.string() + "': " + e.what());
    }
    if (m.value("schema", 0) != 1)
        throw std::runtime_error("unsupported manifest schema");
    const std::string command = m.at("command").get<std::string>();
    const json& args = m.at("args");
    log << "replaying " << command << " run " << m.value("run_id", "?") << "\n";
    if (command == "sample-noise")
        cmd_sample_noise(args.get<SampleNoiseOpts>(), out, log);
    else if (command == "make-toy")
        cmd_make_toy(args.get<MakeToyOpts>(), out, log);
    else if (command == "train-id")
        cmd_train_id(args.get<TrainIdOpts>(), out, log);
    else if (command == "generate")
        cmd_generate(args.get<GenerateOpts>(), out, log);
    else
        throw std::runtime_error("manifest command '" + command + "' cannot be replayed");
    return kExitOk;
}

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("VCD_SEED");
    if (!v || !*v)
        return std::nullopt;
    try {
        std::size_t used = 0;
        const unsigned long long s = std::stoull(v, &used, 0);
        if (used != std::string(v).size())
            throw std::invalid_argument(v);
        return s;
    } catch (const std::logic_error&) {
        throw UsageError(std::string("VCD_SEED is not an unsigned integer: '") + v + "'");
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Video custom diffusion toolkit: correlated noise priors, identity tokens and staged refinement"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "vcd 0.1.0");

    SampleNoiseOpts noise;
    std::string noise_out;
    auto* sn = app.add_subcommand("sample-noise", "Draw 3D noise prior samples and their frame covariance");
    sn->add_option("--frames", noise.frames, "Frames f (default 16)")->check(CLI::PositiveNumber);
    sn->add_option("--gamma", noise.gamma, "Inter-frame correlation (default 0.1)")->check(CLI::Range(0.0, 0.999999));
    sn->add_option("--samples", noise.samples, "Number of samples (convention: 64)")->check(CLI::PositiveNumber);
    sn->add_option("--channels", noise.channels, "Channels (convention: 1)")->check(CLI::PositiveNumber);
    sn->add_option("--height", noise.height, "Height (convention: 32)")->check(CLI::PositiveNumber);
    sn->add_option("--width", noise.width, "Width (convention: 32)")->check(CLI::PositiveNumber);
    sn->add_option("--sampler", noise.sampler, "ar1 or factorized (convention: ar1)")
        ->check(CLI::IsMember({"ar1", "factorized"}));
    sn->add_option("--seed", noise.seed, "Seed (overridden by VCD_SEED)");
    sn->add_option("--out", noise_out, "Output directory")->required();

    MakeToyOpts toy;
    std::string toy_out;
    auto* mt = app.add_subcommand("make-toy", "Build the planted-identity dataset and pretrained tiny backbone");
    mt->add_option("--samples", toy.samples, "Training images (convention: 8)")->check(CLI::PositiveNumber);
    mt->add_option("--prompt-tokens", toy.prompt_tokens, "Fixed prompt tokens (convention: 3)")
        ->check(CLI::PositiveNumber);
    mt->add_option("--planted-tokens", toy.planted_tokens, "Planted identity tokens (default 4)")
        ->check(CLI::PositiveNumber);
    mt->add_option("--token-dim", toy.token_dim, "Token dimension d (convention: 16)")->check(CLI::PositiveNumber);
    mt->add_option("--height", toy.height, "Image height (convention: 8)")->check(CLI::PositiveNumber);
    mt->add_option("--width", toy.width, "Image width (convention: 8)")->check(CLI::PositiveNumber);
    mt->add_option("--planted-std", toy.planted_std, "Std of planted tokens (convention: 0.5)")
        ->check(CLI::NonNegativeNumber);
    mt->add_option("--pretrain-steps", toy.pretrain_steps, "Backbone steps (convention: 1000)")
        ->check(CLI::NonNegativeNumber);
    mt->add_option("--pretrain-lr", toy.pretrain_lr, "Backbone lr (convention: 0.2)")->check(CLI::NonNegativeNumber);
    mt->add_option("--timesteps", toy.timesteps, "Diffusion steps T (convention: 1000)")->check(CLI::PositiveNumber);
    mt->add_option("--seed", toy.seed, "Seed (overridden by VCD_SEED)");
    mt->add_option("--out", toy_out, "Output directory")->required();

    TrainIdOpts train;
    std::string train_out;
    auto* ti = app.add_subcommand("train-id", "Learn identity tokens with the masked denoising loss");
    ti->add_option("--data", train.data, "Dataset directory written by make-toy")->required();
    ti->add_option("--tokens", train.tokens, "Identity tokens k (default 4)")->check(CLI::PositiveNumber);
    ti->add_option("--lr", train.lr, "Learning rate (default 1e-3)")->check(CLI::NonNegativeNumber);
    ti->add_option("--batch", train.batch, "Batch size (default 4)")->check(CLI::PositiveNumber);
    ti->add_option("--steps", train.steps, "Optimization steps (default 200)")->check(CLI::NonNegativeNumber);
    ti->add_option("--init-std", train.init_std, "Token init std (convention: 0.02)")->check(CLI::NonNegativeNumber);
    ti->add_option("--timesteps", train.timesteps, "Diffusion steps T (convention: 1000)")->check(CLI::PositiveNumber);
    ti->add_option("--seed", train.seed, "Seed (overridden by VCD_SEED)");
    ti->add_option("--out", train_out, "Output directory")->required();

    GenerateOpts gen;
    std::string gen_out, gen_replay;
    auto* gn = app.add_subcommand("generate", "Run T2V, Face and Tiled stages on the face-scene benchmark");
    gn->add_option("--embedding", gen.embedding, "Identity embedding (VCDE)");
    gn->add_option("--data", gen.data, "Dataset directory written by make-toy");
    gn->add_option("--gamma", gen.gamma, "Noise prior gamma (default 0.1)")->check(CLI::Range(0.0, 0.999999));
    gn->add_option("--face-strength", gen.face_strength, "Face stage strength (default 0.8)")
        ->check(CLI::Range(0.0, 1.0));
    gn->add_option("--tile-strength", gen.tile_strength, "Tiled stage strength (default 0.2)")
        ->check(CLI::Range(0.0, 1.0));
    gn->add_option("--grid", gen.grid, "Tile grid RxC (default 2x2)");
    gn->add_option("--dilation", gen.dilation, "Face box dilation (convention: 0.3)")->check(CLI::NonNegativeNumber);
    gn->add_option("--upscale", gen.upscale, "Upscale factor (convention: 2)")->check(CLI::PositiveNumber);
    gn->add_option("--step-noise", gen.step_noise, "prior or iid (convention: prior)")
        ->check(CLI::IsMember({"prior", "iid"}));
    gn->add_option("--denoiser", gen.denoiser, "Denoiser (convention: analytic)")->check(CLI::IsMember({"analytic"}));
    gn->add_option("--frames", gen.frames, "Frames (convention: 8)")->check(CLI::PositiveNumber);
    gn->add_option("--height", gen.height, "Height (convention: 32)")->check(CLI::PositiveNumber);
    gn->add_option("--width", gen.width, "Width (convention: 32)")->check(CLI::PositiveNumber);
    gn->add_option("--sigma0", gen.sigma0, "Scene data std (convention: 0.2)")->check(CLI::PositiveNumber);
    gn->add_option("--reference-size", gen.reference_size, "Identity reference size (convention: 32)")
        ->check(CLI::PositiveNumber);
    gn->add_option("--timesteps", gen.timesteps, "Diffusion steps T (convention: 1000)")->check(CLI::PositiveNumber);
    gn->add_flag("--pgm", gen.pgm, "Also export PGM frames");
    gn->add_option("--seed", gen.seed, "Seed (overridden by VCD_SEED)");
    gn->add_option("--replay", gen_replay, "Re-execute a generate manifest (other flags ignored)");
    gn->add_option("--out", gen_out, "Output directory")->required();

    std::string replay_manifest, replay_out;
    auto* rp = app.add_subcommand("replay", "Re-execute any run manifest into a new directory");
    rp->add_option("--manifest", replay_manifest, "manifest.json of an earlier run")->required();
    rp->add_option("--out", replay_out, "Output directory")->required();

    ValidateOpts val;
    auto* va = app.add_subcommand(
        "validate",
        "Statistical validator suite. Full mode: N=1e5 covariance tolerance 0.02, sampler agreement 0.01, "
        "3 gradient configs at 1e-4, 50000 reverse chains at 0.02 / 5%. --quick: N=2e4 tolerance 0.045, "
        "1 gradient config, 5000 chains at 0.03 / 10%.");
    va->add_flag("--quick", val.quick, "Reduced sample sizes with looser tolerances");
    va->add_option("--inject-fault", val.inject_fault, "Negative control: 'gamma' mislabels the covariance fixture");
    va->add_option("--report", val.report, "Also write the report to this file");
    va->add_option("--seed", val.seed, "Seed (overridden by VCD_SEED)");

    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        std::optional<std::uint64_t> seed_override;
        const bool replaying = rp->parsed() || (gn->parsed() && !gen_replay.empty());
        if (!replaying)
            seed_override = env_seed();
        if (seed_override) {
            noise.seed = toy.seed = train.seed = gen.seed = val.seed = *seed_override;
        }
        train.data = absolute_or_empty(train.data);
        gen.embedding = absolute_or_empty(gen.embedding);
        gen.data = absolute_or_empty(gen.data);
        if (sn->parsed())
            cmd_sample_noise(noise, noise_out, out);
        else if (mt->parsed())
            cmd_make_toy(toy, toy_out, out);
        else if (ti->parsed())
            cmd_train_id(train, train_out, out);
        else if (gn->parsed()) {
            if (!gen_replay.empty()) {
                const json m = json::parse(std::ifstream(gen_replay), nullptr, false);
                if (m.is_discarded() || m.value("command", "") != "generate")
                    throw std::runtime_error("'" + gen_replay + "' is not a generate manifest");
                return replay(gen_replay, gen_out, out);
            }
            cmd_generate(gen, gen_out, out);
        } else if (rp->parsed())
            return replay(replay_manifest, replay_out, out);
        else if (va->parsed())
            return cmd_validate(val, out);
        return kExitOk;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace vcd::cli
