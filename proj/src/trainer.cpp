#include "blindnet/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "blindnet/checkpoint.hpp"

namespace blindnet {
namespace {

constexpr uint64_t kStreamDead = 0xdeadc0deull;
constexpr uint64_t kStreamPoseInit = 0x905e01ull;
constexpr uint64_t kStreamPoseShuffle = 0x905e02ull;
constexpr uint64_t kStreamPoseData = 0x905e03ull;

TensorPtr mean_of(Tape& t, const std::vector<TensorPtr>& terms) {
    if (terms.empty()) return make_scalar(0.0);
    TensorPtr acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = ops::add(t, acc, terms[i]);
    return ops::scale(t, acc, 1.0 / static_cast<double>(terms.size()));
}

BlindNetConfig model_config(const RunConfig& cfg) {
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
    return mc;
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg, const Corpus& corpus)
    : cfg_(cfg), corpus_(&corpus), model_(model_config(cfg), cfg.seed) {
    cfg_.validate();
    if (corpus.image_size != cfg.image_size)
        throw std::runtime_error("trainer: corpus image size " +
                                 std::to_string(corpus.image_size) +
                                 " does not match config image_size " +
                                 std::to_string(cfg.image_size));
    if (cfg_.mode == "nonblind") {
        cfg_.omega = 0.0;
        cfg_.use_mask_exclusion = false;
    }
    for (const auto& [name, p] : model_.params) {
        AdamState st;
        st.lr = cfg_.lr;
        st.m.assign(p->data.size(), 0.0);
        st.v.assign(p->data.size(), 0.0);
        opt_.emplace(name, std::move(st));
    }
}

int Trainer::steps_per_epoch() const {
    int train_items = 0;
    for (const auto& item : corpus_->items)
        if (item.split == "train") ++train_items;
    return std::max(1, train_items / cfg_.batch_size);
}

int Trainer::total_steps() const {
    int total = cfg_.epochs * steps_per_epoch();
    if (cfg_.max_steps > 0) total = std::min(total, cfg_.max_steps);
    return total;
}

LossReport Trainer::train_step() {
    model_.zero_grads();
    Tape tape;
    BatchConfig bc{cfg_.batch_size, cfg_.natural_every};
    std::vector<TrainSample> batch = next_training_batch(*corpus_, bc, cfg_.seed, step_);

    std::vector<TensorPtr> lr_terms, lq_terms, ll_terms, lo_terms;
    std::vector<HierLatent> latents;
    for (const TrainSample& sample : batch) {
        if (!sample.natural) {
            TensorPtr xc = image_to_tensor(sample.overlay.clean);
            TensorPtr xo = image_to_tensor(sample.overlay.overlaid);
            SiameseOutput out = model_.siamese_forward(tape, xc, xo);
            lr_terms.push_back(plain_mse(tape, xc, out.recon_clean));
            if (cfg_.use_mask_exclusion)
                lr_terms.push_back(
                    loss_masked_recon(tape, xo, out.recon_overlaid, sample.overlay.mask));
            else
                lr_terms.push_back(plain_mse(tape, xo, out.recon_overlaid));
            lq_terms.push_back(out.latent_clean.commit_loss);
            lq_terms.push_back(out.latent_overlaid.commit_loss);
            if (cfg_.omega != 0.0) {
                ll_terms.push_back(loss_latent(tape, out.latent_clean, out.latent_overlaid,
                                               cfg_.latent_pre_quant));
                lo_terms.push_back(
                    loss_siamese_recon(tape, xc, out.recon_overlaid, sample.overlay.mask));
            }
            latents.push_back(out.latent_clean);
            latents.push_back(out.latent_overlaid);
        } else {
            TensorPtr x = image_to_tensor(sample.item->image);
            HierLatent lat = model_.encode_hier(tape, x);
            TensorPtr recon = model_.decode(tape, lat.e_concat);
            if (cfg_.use_mask_exclusion)
                lr_terms.push_back(loss_masked_recon(tape, x, recon, sample.item->mask));
            else
                lr_terms.push_back(plain_mse(tape, x, recon));
            lq_terms.push_back(lat.commit_loss);
            latents.push_back(lat);
        }
    }

    LossWeights w{cfg_.gamma_q, cfg_.gamma_o, cfg_.omega};
    TotalLoss loss = compose_total(tape, mean_of(tape, lr_terms), mean_of(tape, lq_terms),
                                   mean_of(tape, ll_terms), mean_of(tape, lo_terms), w);
    tape.backward(loss.total);

    int epoch = static_cast<int>(step_) / steps_per_epoch();
    double lr = step_lr(epoch, cfg_.lr, cfg_.lr_step_epochs, cfg_.lr_gamma);
    for (auto& [name, p] : model_.params) {
        AdamState& st = opt_.at(name);
        st.lr = lr;
        adam_step(*p, st);
    }

    for (const HierLatent& lat : latents) model_.ema_from_latent(lat);
    if (cfg_.dead_code_every > 0 && (step_ + 1) % cfg_.dead_code_every == 0) {
        Rng rng = Rng::substream(cfg_.seed, kStreamDead, step_);
        model_.reinit_dead(latents.back(), rng);
    }

    loss.report.lr = lr;
    loss.report.step = static_cast<long>(step_);
    ++step_;
    return loss.report;
}

void Trainer::save(const std::string& path) const {
    Checkpoint ckpt;
    ckpt.config_text = cfg_.serialize();
    ckpt.step = step_;
    pack_model(ckpt, model_);
    pack_adam(ckpt, opt_);
    save_checkpoint(path, ckpt);
}

void Trainer::resume_from(const std::string& checkpoint_path) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    unpack_model(ckpt, model_);
    unpack_adam(ckpt, opt_, model_.params);
    step_ = ckpt.step;
}

void append_csv_row(const std::string& path, const LossReport& r, bool header_if_new) {
    bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("log: cannot open '" + path + "'");
    if (fresh && header_if_new) out << "step,l_q,l_r,l_l,l_o,total,lr\n";
    out.precision(12);
    out << r.step << ',' << r.l_q << ',' << r.l_r << ',' << r.l_l << ',' << r.l_o << ','
        << r.total << ',' << r.lr << '\n';
}

std::string Trainer::run(const std::string& out_dir, const std::string& log_path,
                         const std::function<void(const LossReport&)>& on_step) {
    std::filesystem::create_directories(out_dir);
    int total = total_steps();
    while (step_ < static_cast<uint64_t>(total)) {
        LossReport r = train_step();
        append_csv_row(log_path, r, true);
        if (on_step) on_step(r);
        if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 &&
            step_ < static_cast<uint64_t>(total)) {
            std::ostringstream name;
            name << out_dir << "/step_" << step_ << ".ckpt";
            save(name.str());
        }
    }
    std::string final_path = out_dir + "/final.ckpt";
    save(final_path);
    return final_path;
}

PoseDataset build_pose_dataset(const BlindNet& model, const CarparkWorld& world,
                               int count, uint64_t seed) {
    PoseDataset ds;
    Rng rng = Rng::substream(seed, kStreamPoseData, 0);
    for (int i = 0; i < count; ++i) {
        PoseLabel pose = sample_valid_pose(world, rng);
        Image view = render_view(world, pose, model.cfg.image_size, true, nullptr);
        ds.features.push_back(encode_features(model, view));
        ds.labels.push_back(pose);
    }
    return ds;
}

PoseHead train_pose_head(const std::vector<std::vector<Scalar>>& features,
                         const std::vector<PoseLabel>& labels, int hidden,
                         int epochs, double lr, int lr_step_epochs, double lr_gamma,
                         uint64_t seed, const std::string& log_path) {
    if (features.empty() || features.size() != labels.size())
        throw std::runtime_error("pose training: feature/label count mismatch");
    int feat_dim = static_cast<int>(features[0].size());
    PoseHead head(feat_dim, hidden, Rng::substream(seed, kStreamPoseInit, 0).next_u64());

    std::map<std::string, AdamState> opt;
    for (const auto& [name, p] : head.params) {
        AdamState st;
        st.m.assign(p->data.size(), 0.0);
        st.v.assign(p->data.size(), 0.0);
        opt.emplace(name, st);
    }

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        log << "epoch,loss,lr\n";
        log.precision(12);
    }

    std::vector<size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        double cur_lr = step_lr(epoch, lr, lr_step_epochs, lr_gamma);
        Rng shuffle_rng = Rng::substream(seed, kStreamPoseShuffle, epoch);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);

        double epoch_loss = 0.0;
        for (size_t idx : order) {
            head.zero_grads();
            Tape tape;
            TensorPtr feat = make_tensor({1, feat_dim}, features[idx], false);
            PoseHead::Outputs out = head.forward(tape, feat);
            TensorPtr loss = homoscedastic_loss(tape, out, labels[idx]);
            tape.backward(loss);
            for (auto& [name, p] : head.params) {
                AdamState& st = opt.at(name);
                st.lr = cur_lr;
                adam_step(*p, st);
            }
            epoch_loss += loss->data[0];
        }
        if (log)
            log << epoch << ',' << epoch_loss / static_cast<double>(order.size()) << ','
                << cur_lr << '\n';
    }
    return head;
}

}  // namespace blindnet
