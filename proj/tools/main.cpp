#include "CLI11.hpp"

#include "blindnet/checkpoint.hpp"
#include "blindnet/config.hpp"
#include "blindnet/data.hpp"
#include "blindnet/metrics.hpp"
#include "blindnet/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace blindnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

struct ModelBundle {
    RunConfig cfg;
    BlindNet model;
};

ModelBundle load_model(const std::string& ckpt_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    RunConfig cfg = parse_config_text(ckpt.config_text);
    BlindNetConfig mc;
    mc.image_size = cfg.image_size;
    mc.base_channels = cfg.base_channels;
    mc.bottom_codes = cfg.bottom_codes;
    mc.bottom_dim = cfg.bottom_dim;
    mc.top_codes = cfg.top_codes;
    mc.top_dim = cfg.top_dim;
    mc.beta = cfg.beta;
    mc.ema_decay = cfg.ema_decay;
    mc.latent_loss_pre_quant = cfg.latent_pre_quant;
    ModelBundle b{cfg, BlindNet(mc, cfg.seed)};
    unpack_model(ckpt, b.model);
    return b;
}

void add_config_options(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--seed", cfg.seed, "run seed");
    cmd->add_option("--corpus", cfg.corpus_dir, "corpus directory");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--max-steps", cfg.max_steps, "step cap (0 = none)");
    cmd->add_option("--batch-size", cfg.batch_size, "batch size");
    cmd->add_option("--lr", cfg.lr, "base learning rate");
    cmd->add_option("--omega", cfg.omega, "siamese loss weight");
    cmd->add_option("--checkpoint-every", cfg.checkpoint_every, "steps between checkpoints");
}

int run_training(RunConfig cfg, const std::string& config_path, const std::string& mode,
                 const std::string& resume) {
    if (!config_path.empty()) {
        RunConfig file_cfg = load_config_file(config_path);
        std::string keep_out = cfg.out_dir;
        cfg = file_cfg;
        if (keep_out != RunConfig{}.out_dir) cfg.out_dir = keep_out;
    }
    cfg.mode = mode;
    cfg.apply_env_overrides();
    cfg.validate();

    Corpus corpus = import_external(cfg.corpus_dir);
    if (corpus.items.empty())
        throw std::runtime_error("training: corpus '" + cfg.corpus_dir + "' is empty");
    Trainer trainer(cfg, corpus);
    if (!resume.empty()) trainer.resume_from(resume);

    std::string log_path = cfg.out_dir + "/train_log.csv";
    fs::create_directories(cfg.out_dir);
    int total = trainer.total_steps();
    std::string final_path = trainer.run(cfg.out_dir, log_path, [&](const LossReport& r) {
        if (r.step % 50 == 0 || r.step + 1 == total)
            std::printf("step %ld/%d total=%.5f l_r=%.5f l_l=%.5f lr=%g\n", r.step,
                        total, r.total, r.l_r, r.l_l, r.lr);
    });
    std::printf("saved %s\n", final_path.c_str());
    return kExitOk;
}

int cmd_gen_data(uint64_t seed, int count, int size, double natural_fraction,
                 double occupancy, const std::string& out) {
    GenConfig gc;
    gc.seed = seed;
    gc.count = count;
    gc.size = size;
    gc.natural_fraction = natural_fraction;
    gc.occupancy = occupancy;
    Corpus corpus = generate_corpus(gc);
    save_corpus(corpus, out);
    if (corpus.items.empty())
        std::fprintf(stderr, "warning: generated an empty corpus\n");
    std::printf("wrote %zu images to %s\n", corpus.items.size(), out.c_str());
    return kExitOk;
}

int cmd_train_pose(const std::string& encoder_path, const std::string& out,
                   uint64_t seed, uint64_t day_seed, int samples, int epochs) {
    std::string digest_before = file_digest(encoder_path);
    ModelBundle b = load_model(encoder_path);
    uint64_t structure = hash_combine(b.cfg.seed, 0x5712c7ULL);
    CarparkWorld world = make_world(structure, day_seed, b.cfg.occupancy);
    PoseDataset ds = build_pose_dataset(b.model, world, samples, seed);

    fs::create_directories(out);
    PoseHead head = train_pose_head(ds.features, ds.labels, b.cfg.pose_hidden,
                                    epochs > 0 ? epochs : b.cfg.pose_epochs,
                                    b.cfg.pose_lr, b.cfg.pose_lr_step_epochs,
                                    b.cfg.lr_gamma, seed, out + "/pose_log.csv");

    if (file_digest(encoder_path) != digest_before)
        throw std::runtime_error("train-pose: encoder checkpoint changed during training");

    Checkpoint ckpt;
    ckpt.config_text = "# encoder_digest " + digest_before + "\n" + b.cfg.serialize();
    pack_pose_head(ckpt, head);
    std::string path = out + "/pose.ckpt";
    save_checkpoint(path, ckpt);
    PoseErrors train_err = evaluate_pose(head, ds.features, ds.labels);
    std::printf("saved %s (train median: %.3f m, %.3f rad)\n", path.c_str(),
                train_err.median_position, train_err.median_angle);
    return kExitOk;
}

int cmd_eval_recon(const std::string& encoder_path, const std::string& corpus_dir,
                   int pairs, uint64_t seed, const std::string& out) {
    ModelBundle b = load_model(encoder_path);
    Corpus corpus = import_external(corpus_dir);
    auto eval_pairs = make_eval_pairs(corpus, pairs, seed);
    double gap = latent_blindness_gap(b.model, eval_pairs);
    double agree = code_agreement(b.model, eval_pairs);
    auto rows = blindness_decode_report(b.model, eval_pairs, out);
    if (!out.empty()) write_decode_csv(rows, out + "/recon_report.csv");

    double masked_psnr = 0, unmasked_psnr = 0;
    int masked_n = 0, unmasked_n = 0;
    for (const auto& r : rows) {
        if (r.masked) {
            masked_psnr += r.masked->psnr;
            ++masked_n;
        }
        if (r.unmasked) {
            unmasked_psnr += r.unmasked->psnr;
            ++unmasked_n;
        }
    }
    std::printf("pairs=%zu latent_gap=%.6f code_agreement=%.4f\n", rows.size(), gap, agree);
    if (masked_n)
        std::printf("masked_psnr_vs_clean=%.3f dB (n=%d)\n", masked_psnr / masked_n, masked_n);
    if (unmasked_n)
        std::printf("unmasked_psnr=%.3f dB (n=%d)\n", unmasked_psnr / unmasked_n, unmasked_n);
    return kExitOk;
}

int cmd_eval_pose(const std::string& encoder_path, const std::string& pose_path,
                  uint64_t day_seed, int samples, uint64_t seed) {
    ModelBundle b = load_model(encoder_path);
    uint64_t structure = hash_combine(b.cfg.seed, 0x5712c7ULL);
    CarparkWorld world = make_world(structure, day_seed, b.cfg.occupancy);
    PoseDataset ds = build_pose_dataset(b.model, world, samples, seed);
    if (ds.features.empty()) throw std::runtime_error("eval-pose: empty trajectory");

    int feat_dim = static_cast<int>(ds.features[0].size());
    PoseHead head(feat_dim, b.cfg.pose_hidden, 0);
    unpack_pose_head(load_checkpoint(pose_path), head);
    PoseErrors e = evaluate_pose(head, ds.features, ds.labels);
    std::printf("samples=%zu median_position_m=%.4f median_angle_rad=%.4f\n",
                ds.features.size(), e.median_position, e.median_angle);
    return kExitOk;
}

int cmd_decode(const std::string& encoder_path, const std::string& image_path,
               const std::string& mask_path, const std::string& out) {
    ModelBundle b = load_model(encoder_path);
    OverlaySample s;
    s.overlaid = read_ppm(image_path);
    s.clean = s.overlaid;  // no paired clean image; score against the input
    s.mask = mask_path.empty() ? Mask(s.overlaid.height, s.overlaid.width)
                               : read_pgm(mask_path);
    auto rows = blindness_decode_report(b.model, {s}, out);
    if (!out.empty()) write_decode_csv(rows, out + "/decode_report.csv");
    const DecodeRow& r = rows.at(0);
    std::printf("full: l1=%.4f mse=%.5f psnr=%.3f dB\n", r.full.l1, r.full.mse, r.full.psnr);
    if (r.empty_mask)
        std::printf("masked: empty region\n");
    else
        std::printf("masked: l1=%.4f psnr=%.3f dB\n", r.masked->l1, r.masked->psnr);
    return kExitOk;
}

int cmd_plot(const std::string& log_path, const std::string& out_path, int column) {
    std::ifstream in(log_path);
    if (!in) throw std::runtime_error("plot: cannot open '" + log_path + "'");
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> ys;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string cell;
        for (int c = 0; std::getline(ss, cell, ','); ++c)
            if (c == column) ys.push_back(std::stod(cell));
    }
    if (ys.empty()) throw std::runtime_error("plot: no data rows in '" + log_path + "'");

    const int w = 512, h = 256;
    Image img(3, h, w);
    std::fill(img.data.begin(), img.data.end(), 1.0);
    double lo = *std::min_element(ys.begin(), ys.end());
    double hi = *std::max_element(ys.begin(), ys.end());
    if (hi <= lo) hi = lo + 1.0;
    for (int x = 0; x < w; ++x) {
        size_t i = ys.size() == 1 ? 0 : static_cast<size_t>(x) * (ys.size() - 1) / (w - 1);
        double v = (ys[i] - lo) / (hi - lo);
        int y = h - 2 - static_cast<int>(v * (h - 4));
        for (int dy = -1; dy <= 1; ++dy) {
            int yy = std::clamp(y + dy, 0, h - 1);
            img.at(0, yy, x) = 0.8;
            img.at(1, yy, x) = 0.1;
            img.at(2, yy, x) = 0.1;
        }
    }
    quantize8(img);
    write_ppm(out_path, img);
    std::printf("wrote %s (%zu points, min=%.5f max=%.5f)\n", out_path.c_str(), ys.size(),
                lo, hi);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neural blindness trainer and evaluation harness"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    uint64_t gen_seed = 7;
    int gen_count = 2000, gen_size = 48;
    double gen_natural = 0.4, gen_occupancy = 0.55;
    std::string gen_out = "corpus";
    gen->add_option("--seed", gen_seed);
    gen->add_option("--count", gen_count);
    gen->add_option("--size", gen_size);
    gen->add_option("--natural-fraction", gen_natural);
    gen->add_option("--occupancy", gen_occupancy);
    gen->add_option("--out", gen_out);

    // train-blind / train-nonblind
    RunConfig blind_cfg, nonblind_cfg;
    std::string blind_config_path, nonblind_config_path, blind_resume, nonblind_resume;
    auto* tb = app.add_subcommand("train-blind", "train the blind model (omega > 0)");
    add_config_options(tb, blind_cfg, blind_config_path);
    tb->add_option("--resume", blind_resume, "checkpoint to resume from");
    auto* tn = app.add_subcommand("train-nonblind",
                                  "train the comparison model (omega = 0, no mask exclusion)");
    add_config_options(tn, nonblind_cfg, nonblind_config_path);
    tn->add_option("--resume", nonblind_resume, "checkpoint to resume from");

    // train-pose
    auto* tp = app.add_subcommand("train-pose", "train a pose head on a frozen encoder");
    std::string tp_encoder, tp_out = "pose_run";
    uint64_t tp_seed = 7, tp_day = 1;
    int tp_samples = 300, tp_epochs = 0;
    tp->add_option("--encoder", tp_encoder)->required();
    tp->add_option("--out", tp_out);
    tp->add_option("--seed", tp_seed);
    tp->add_option("--day-seed", tp_day);
    tp->add_option("--samples", tp_samples);
    tp->add_option("--epochs", tp_epochs, "override config pose_epochs");

    // eval-recon
    auto* er = app.add_subcommand("eval-recon", "reconstruction and blindness metrics");
    std::string er_encoder, er_corpus = "corpus", er_out = "recon_eval";
    int er_pairs = 200;
    uint64_t er_seed = 7;
    er->add_option("--encoder", er_encoder)->required();
    er->add_option("--corpus", er_corpus);
    er->add_option("--pairs", er_pairs);
    er->add_option("--seed", er_seed);
    er->add_option("--out", er_out);

    // eval-pose
    auto* ep = app.add_subcommand("eval-pose", "median pose error on a rendered trajectory");
    std::string ep_encoder, ep_pose;
    uint64_t ep_day = 2, ep_seed = 11;
    int ep_samples = 150;
    ep->add_option("--encoder", ep_encoder)->required();
    ep->add_option("--pose", ep_pose)->required();
    ep->add_option("--day-seed", ep_day);
    ep->add_option("--samples", ep_samples);
    ep->add_option("--seed", ep_seed);

    // decode
    auto* dec = app.add_subcommand("decode", "run one image through the autoencoder");
    std::string dec_encoder, dec_image, dec_mask, dec_out = "decode_out";
    dec->add_option("--encoder", dec_encoder)->required();
    dec->add_option("--image", dec_image)->required();
    dec->add_option("--mask", dec_mask);
    dec->add_option("--out", dec_out);

    // plot
    auto* pl = app.add_subcommand("plot", "render a CSV column as a curve image");
    std::string pl_log, pl_out = "plot.ppm";
    int pl_column = 5;
    pl->add_option("--log", pl_log)->required();
    pl->add_option("--out", pl_out);
    pl->add_option("--column", pl_column, "CSV column index (default: total loss)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_seed, gen_count, gen_size, gen_natural, gen_occupancy,
                                gen_out);
        if (tb->parsed()) return run_training(blind_cfg, blind_config_path, "blind", blind_resume);
        if (tn->parsed())
            return run_training(nonblind_cfg, nonblind_config_path, "nonblind", nonblind_resume);
        if (tp->parsed())
            return cmd_train_pose(tp_encoder, tp_out, tp_seed, tp_day, tp_samples, tp_epochs);
        if (er->parsed()) return cmd_eval_recon(er_encoder, er_corpus, er_pairs, er_seed, er_out);
        if (ep->parsed()) return cmd_eval_pose(ep_encoder, ep_pose, ep_day, ep_samples, ep_seed);
        if (dec->parsed()) return cmd_decode(dec_encoder, dec_image, dec_mask, dec_out);
        if (pl->parsed()) return cmd_plot(pl_log, pl_out, pl_column);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitUsage;
}
