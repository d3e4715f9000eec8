#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "ae/analysis.hpp"
#include "ae/harness.hpp"
#include "ae/metrics.hpp"
#include "ae/trainer.hpp"

namespace {

using namespace ae;

constexpr uint64_t kExtractorSeed = 0x4c50495053ULL;  // must match the trainer's

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_kv_text(ss.str());
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, int64_t dflt) {
    return kv.count(key) ? int(std::stoll(kv.at(key))) : int(dflt);
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double dflt) {
    return kv.count(key) ? std::stod(kv.at(key)) : dflt;
}

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv) {
    TrainConfig t;
    t.iterations = kv_int(kv, "iterations", t.iterations);
    t.batch_size = kv_int(kv, "batch_size", t.batch_size);
    t.base_lr = kv_double(kv, "base_lr", t.base_lr);
    if (kv.count("strategy")) t.strategy = strategy_from_string(kv.at("strategy"));
    t.lr_split_ratio = kv_double(kv, "lr_split_ratio", t.lr_split_ratio);
    t.stage_boundary = kv_int(kv, "stage_boundary", t.stage_boundary);
    t.seed = uint64_t(kv_int(kv, "seed", int64_t(t.seed)));
    t.checkpoint_every = kv_int(kv, "checkpoint_every", t.checkpoint_every);
    t.log_every = kv_int(kv, "log_every", t.log_every);
    if (kv.count("denoise_sigmas")) {
        DenoiseConfig d;
        d.sigma_set = parse_doubles(kv.at("denoise_sigmas"));
        d.blind = kv_int(kv, "denoise_blind", 1) != 0;
        t.denoise = d;
    }
    return t;
}

// "--data" accepts a directory of images or "synth:<kind>:<n>[:<seed>]"
Dataset resolve_data(const std::string& spec, int resolution) {
    if (spec.rfind("synth:", 0) == 0) {
        std::stringstream ss(spec.substr(6));
        std::string kind, n, seed = "0";
        std::getline(ss, kind, ':');
        std::getline(ss, n, ':');
        std::getline(ss, seed, ':');
        if (kind.empty() || n.empty())
            throw ConfigError("synthetic data spec must be synth:<kind>:<n>[:<seed>]");
        return synth_dataset(synth_kind_from_string(kind), int(std::stoll(n)), resolution,
                             uint64_t(std::stoull(seed)));
    }
    return load_dataset(spec, resolution);
}

std::unique_ptr<Decoder> load_decoder(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    auto dec = std::make_unique<Decoder>(ckpt.config);
    dec->load(ckpt);
    return dec;
}

std::unique_ptr<Encoder> load_encoder(const std::string& path, const ModelConfig& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    require_config_match(ckpt.config, expected);
    EncoderHeads heads{false, false};
    for (const auto& [name, _] : ckpt.params) {
        std::string g = Encoder::param_group(name);
        if (g == "latent_head") heads.latent = true;
        if (g == "noise_head") heads.noise = true;
    }
    auto enc = std::make_unique<Encoder>(ckpt.config, heads);
    enc->load(ckpt);
    return enc;
}

struct ModelArgs {
    std::string decoder_path;
    std::string encoder_path;
    std::string noise_encoder_path;
};

struct LoadedModel {
    std::unique_ptr<Decoder> decoder;
    std::unique_ptr<Encoder> encoder;
    std::unique_ptr<Encoder> noise_enc;

    InversionModel view() const { return {*encoder, *decoder, noise_enc.get()}; }
};

void add_model_options(CLI::App* cmd, ModelArgs& args) {
    cmd->add_option("--decoder", args.decoder_path, "frozen decoder checkpoint")->required();
    cmd->add_option("--encoder", args.encoder_path, "encoder checkpoint")->required();
    cmd->add_option("--noise-encoder", args.noise_encoder_path,
                    "noise encoder checkpoint (two-network models)");
}

LoadedModel load_model(const ModelArgs& args) {
    LoadedModel m;
    m.decoder = load_decoder(args.decoder_path);
    m.encoder = load_encoder(args.encoder_path, m.decoder->config());
    if (!args.noise_encoder_path.empty())
        m.noise_enc = load_encoder(args.noise_encoder_path, m.decoder->config());
    return m;
}

Image load_input_image(const std::string& path, int resolution) {
    return Image::from_tensor_clipped(load_image(path, resolution));
}

Image reconstruct_one(const LoadedModel& m, const Image& input) {
    return m.view().reconstruct(input);
}

int cmd_init_decoder(const std::string& config_path, uint64_t seed, const std::string& out) {
    ModelConfig cfg = config_path.empty() ? ModelConfig{} : load_model_config(config_path);
    Decoder dec(cfg);
    dec.init(seed);
    save_checkpoint(out, {cfg, dec.params().snapshot(), {0, "frozen", seed}});
    std::cout << "wrote " << out << " (digest " << dec.digest().substr(0, 16) << "...)\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& decoder_path,
              const std::string& data_spec, const std::string& out_dir,
              const std::string& strategy, const std::string& denoise_sigmas,
              int64_t iterations, int64_t seed) {
    auto kv = config_path.empty() ? std::map<std::string, std::string>{} : read_kv_file(config_path);
    Checkpoint dec_ckpt = load_checkpoint(decoder_path);
    ModelConfig model = dec_ckpt.config;
    TrainConfig tcfg = train_config_from_kv(kv);
    if (!strategy.empty()) tcfg.strategy = strategy_from_string(strategy);
    if (!denoise_sigmas.empty()) {
        DenoiseConfig d;
        d.sigma_set = parse_doubles(denoise_sigmas);
        d.blind = tcfg.denoise ? tcfg.denoise->blind : true;
        tcfg.denoise = d;
    }
    if (iterations > 0) tcfg.iterations = iterations;
    if (seed >= 0) tcfg.seed = uint64_t(seed);

    Decoder decoder(model);
    decoder.load(dec_ckpt);
    Dataset data = resolve_data(data_spec, model.resolution);
    std::cout << "training " << to_string(tcfg.strategy) << " for " << tcfg.iterations
              << " iterations on " << data.size() << " images\n";

    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir + "/train_log.csv");
    Trainer trainer(model, tcfg, decoder);
    trainer.run(data.images, out_dir, &log);
    std::cout << "checkpoints written to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const ModelArgs& margs, const std::string& data_spec, const std::string& metrics_csv,
             const std::string& report_path) {
    LoadedModel m = load_model(margs);
    const int R = m.decoder->config().resolution;
    Dataset ds = resolve_data(data_spec, R);

    std::vector<std::string> metrics;
    {
        std::stringstream ss(metrics_csv);
        std::string item;
        while (std::getline(ss, item, ',')) metrics.push_back(item);
    }

    std::vector<Image> recons;
    for (const auto& img : ds.images)
        recons.push_back(reconstruct_one(m, Image::from_tensor_clipped(img)));

    std::ostringstream rows;
    for (const auto& metric : metrics) {
        double value = 0;
        if (metric == "psnr") {
            for (int64_t i = 0; i < ds.size(); ++i)
                value += psnr(to_255(ds.images[size_t(i)]), to_255(recons[size_t(i)].data), 255.0);
            value /= double(ds.size());
        } else if (metric == "ssim") {
            for (int64_t i = 0; i < ds.size(); ++i)
                value += ssim(to_255(ds.images[size_t(i)]), to_255(recons[size_t(i)].data), 255.0);
            value /= double(ds.size());
        } else if (metric == "fid") {
            FeatureExtractor f = make_proxy_extractor(kExtractorSeed);
            int dim = int(fid_embedding(f, ds.images[0]).size());
            FeatureStats real_stats(dim), fake_stats(dim);
            for (int64_t i = 0; i < ds.size(); ++i) {
                real_stats.accumulate(fid_embedding(f, ds.images[size_t(i)]));
                fake_stats.accumulate(fid_embedding(f, recons[size_t(i)].data));
            }
            value = fid(real_stats, fake_stats);
        } else {
            throw ConfigError("unknown metric '" + metric + "' (psnr|ssim|fid)");
        }
        rows << metric << "," << data_spec << "," << value << "\n";
        std::cout << metric << " = " << value << "\n";
    }
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        out << "metric,dataset,value\n" << rows.str();
        std::cout << "report written to " << report_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN-inversion toolkit: encoder training and analysis against a frozen "
                 "style-based decoder"};
    app.require_subcommand(1);

    // init-decoder
    std::string cfg_path, out_path = "decoder.ckpt";
    uint64_t seed = 0;
    auto* init_cmd = app.add_subcommand("init-decoder", "emit a frozen random decoder checkpoint");
    init_cmd->add_option("--config", cfg_path, "model config file");
    init_cmd->add_option("--seed", seed, "RNG seed");
    init_cmd->add_option("--out", out_path, "output checkpoint path");

    // train
    std::string t_cfg, t_decoder, t_data, t_out = "run", t_strategy, t_sigmas;
    int64_t t_iters = -1, t_seed = -1;
    auto* train_cmd = app.add_subcommand("train", "train an encoder against a frozen decoder");
    train_cmd->add_option("--config", t_cfg, "config file (model + training keys)");
    train_cmd->add_option("--decoder", t_decoder, "frozen decoder checkpoint")->required();
    train_cmd->add_option("--data", t_data, "image directory or synth:<kind>:<n>[:<seed>]")
        ->required();
    train_cmd->add_option("--out", t_out, "output directory");
    train_cmd->add_option("--strategy", t_strategy, "plain|two-network|lr-split");
    train_cmd->add_option("--denoise-sigmas", t_sigmas, "train a denoiser, sigmas on 0..255 scale");
    train_cmd->add_option("--iterations", t_iters, "override iteration count");
    train_cmd->add_option("--seed", t_seed, "override training seed");

    // eval
    ModelArgs e_model;
    std::string e_data, e_metrics = "psnr,ssim", e_report;
    auto* eval_cmd = app.add_subcommand("eval", "reconstruction metrics over a dataset");
    add_model_options(eval_cmd, e_model);
    eval_cmd->add_option("--data", e_data, "image directory or synth spec")->required();
    eval_cmd->add_option("--metrics", e_metrics, "comma list of psnr,ssim,fid");
    eval_cmd->add_option("--report", e_report, "write CSV report here");

    // reconstruct
    ModelArgs r_model;
    std::string r_input, r_out = "reconstruction.png";
    auto* rec_cmd = app.add_subcommand("reconstruct", "invert and resynthesize one image");
    add_model_options(rec_cmd, r_model);
    rec_cmd->add_option("--input", r_input, "input image file")->required();
    rec_cmd->add_option("--out", r_out, "output image path");

    // interpolate
    ModelArgs i_model;
    std::string i_a, i_b, i_mode = "both", i_outdir = ".";
    int i_steps = 5;
    uint64_t i_noise_seed = 0;
    auto* interp_cmd = app.add_subcommand("interpolate", "latent/noise interpolation strip");
    add_model_options(interp_cmd, i_model);
    interp_cmd->add_option("--a", i_a, "left image")->required();
    interp_cmd->add_option("--b", i_b, "right image")->required();
    interp_cmd->add_option("--steps", i_steps, "number of frames (>= 2)");
    interp_cmd->add_option("--mode", i_mode, "both|latent|noise");
    interp_cmd->add_option("--noise-seed", i_noise_seed, "pinned noise seed for latent mode");
    interp_cmd->add_option("--outdir", i_outdir, "output directory");

    // noise-shift
    ModelArgs n_model;
    std::string n_input, n_factors = "-2,-0.75,0.5,1.75,3", n_outdir = ".";
    int n_site = ae::kAllSites;
    auto* shift_cmd = app.add_subcommand("noise-shift", "rescale predicted noise maps");
    add_model_options(shift_cmd, n_model);
    shift_cmd->add_option("--input", n_input, "input image file")->required();
    shift_cmd->add_option("--site", n_site, "site_id to shift (-1 = every site)");
    shift_cmd->add_option("--factors", n_factors, "comma list of scale factors");
    shift_cmd->add_option("--outdir", n_outdir, "output directory");

    // visualize-noise
    ModelArgs v_model;
    std::string v_input, v_outdir = ".";
    auto* vis_cmd = app.add_subcommand("visualize-noise", "normalized per-site noise images");
    add_model_options(vis_cmd, v_model);
    vis_cmd->add_option("--input", v_input, "input image file")->required();
    vis_cmd->add_option("--outdir", v_outdir, "output directory");

    // benchmark
    std::string b_decoder, b_encoder;
    int64_t b_n = 16;
    int b_batch = 4;
    auto* bench_cmd = app.add_subcommand("benchmark", "encode+decode throughput");
    bench_cmd->add_option("--decoder", b_decoder, "frozen decoder checkpoint")->required();
    bench_cmd->add_option("--encoder", b_encoder, "encoder checkpoint (default: seeded random)");
    bench_cmd->add_option("--n", b_n, "images to process");
    bench_cmd->add_option("--batch", b_batch, "batch size");

    // synth
    std::string s_kind = "shapes", s_outdir;
    int s_n = 4, s_res = 64;
    uint64_t s_seed = 0;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset as PNG files");
    synth_cmd->add_option("--kind", s_kind, "shapes|textures|checkers");
    synth_cmd->add_option("--n", s_n, "number of images");
    synth_cmd->add_option("--resolution", s_res, "image resolution");
    synth_cmd->add_option("--seed", s_seed, "RNG seed");
    synth_cmd->add_option("--outdir", s_outdir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (init_cmd->parsed()) return cmd_init_decoder(cfg_path, seed, out_path);

        if (train_cmd->parsed())
            return cmd_train(t_cfg, t_decoder, t_data, t_out, t_strategy, t_sigmas, t_iters,
                             t_seed);

        if (eval_cmd->parsed()) return cmd_eval(e_model, e_data, e_metrics, e_report);

        if (rec_cmd->parsed()) {
            LoadedModel m = load_model(r_model);
            Image input = load_input_image(r_input, m.decoder->config().resolution);
            save_image(r_out, reconstruct_one(m, input).data);
            std::cout << "wrote " << r_out << "\n";
            return 0;
        }

        if (interp_cmd->parsed()) {
            LoadedModel m = load_model(i_model);
            const int R = m.decoder->config().resolution;
            InterpMode mode = interp_mode_from_string(i_mode);
            std::vector<Image> frames =
                interpolate(load_input_image(i_a, R), load_input_image(i_b, R), m.view(), i_steps,
                            mode, i_noise_seed);
            std::filesystem::create_directories(i_outdir);
            for (size_t k = 0; k < frames.size(); ++k)
                save_image(i_outdir + "/interp_" + to_string(mode) + "_" + std::to_string(k) +
                               ".png",
                           frames[k].data);
            std::vector<Image> strip = frames;
            save_image(i_outdir + "/interp_" + to_string(mode) + "_strip.png",
                       stitch_grid(strip, int(strip.size())));
            std::cout << "wrote " << frames.size() << " frames to " << i_outdir << "\n";
            return 0;
        }

        if (shift_cmd->parsed()) {
            LoadedModel m = load_model(n_model);
            const int R = m.decoder->config().resolution;
            std::vector<double> factors = parse_doubles(n_factors);
            auto frames = noise_shift(load_input_image(n_input, R), m.view(), n_site, factors);
            std::filesystem::create_directories(n_outdir);
            std::vector<Image> imgs;
            for (const auto& fr : frames) {
                std::ostringstream name;
                name << "site" << fr.site << "_f" << fr.factor << ".png";
                save_image(n_outdir + "/" + name.str(), fr.image.data);
                imgs.push_back(fr.image);
            }
            save_image(n_outdir + "/grid.png", stitch_grid(imgs, int(factors.size())));
            std::cout << "wrote " << frames.size() << " frames to " << n_outdir << "\n";
            return 0;
        }

        if (vis_cmd->parsed()) {
            LoadedModel m = load_model(v_model);
            const int R = m.decoder->config().resolution;
            auto maps = visualize_noise(load_input_image(v_input, R), m.view());
            std::filesystem::create_directories(v_outdir);
            for (size_t k = 0; k < maps.size(); ++k)
                save_gray_image(v_outdir + "/noise_site" + std::to_string(k) + ".png", maps[k]);
            std::cout << "wrote " << maps.size() << " noise maps to " << v_outdir << "\n";
            return 0;
        }

        if (bench_cmd->parsed()) {
            auto decoder = load_decoder(b_decoder);
            std::unique_ptr<Encoder> encoder;
            if (!b_encoder.empty()) {
                encoder = load_encoder(b_encoder, decoder->config());
            } else {
                encoder = std::make_unique<Encoder>(decoder->config());
                encoder->init(0);
            }
            ThroughputReport rep = benchmark_throughput(*encoder, *decoder, b_n, b_batch);
            std::cout << "images_per_second=" << rep.images_per_second
                      << " images_processed=" << rep.images_processed
                      << " batch_size=" << rep.batch_size << " hardware=" << rep.hardware << "\n";
            return 0;
        }

        if (synth_cmd->parsed()) {
            Dataset ds = synth_dataset(synth_kind_from_string(s_kind), s_n, s_res, s_seed);
            std::filesystem::create_directories(s_outdir);
            for (int64_t k = 0; k < ds.size(); ++k)
                save_image(s_outdir + "/" + ds.names[size_t(k)] + ".png", ds.images[size_t(k)]);
            std::cout << "wrote " << ds.size() << " images to " << s_outdir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
