#pragma once

#include <cstdint>
#include <string>

namespace blindnet {

// Everything that, together with the code version, determines a run.
// Serialized into every checkpoint; line-oriented "key = value" on disk.
// Environment variables BLINDNET_<KEY> (upper-cased key) override file values.
struct RunConfig {
    uint64_t seed = 7;
    std::string corpus_dir = "corpus";
    std::string out_dir = "runs";
    std::string mode = "blind";  // "blind" | "nonblind"

    // architecture
    int image_size = 48;
    int base_channels = 32;
    int bottom_codes = 128;
    int bottom_dim = 32;
    int top_codes = 64;
    int top_dim = 32;

    // loss weights
    double beta = 0.25;
    double gamma_q = 1.0;
    double gamma_o = 1.0;
    double omega = 1.0;
    bool use_mask_exclusion = true;
    bool latent_pre_quant = false;

    // schedule
    double lr = 1e-4;
    int lr_step_epochs = 30;
    double lr_gamma = 0.5;
    int epochs = 100;
    int batch_size = 8;
    int natural_every = 4;
    int checkpoint_every = 500;
    int max_steps = 0;  // 0 = no cap; otherwise stops early

    // codebook maintenance
    double ema_decay = 0.99;
    int dead_code_every = 50;

    // pose task
    int pose_hidden = 128;
    int pose_epochs = 100;
    double pose_lr = 1e-4;
    int pose_lr_step_epochs = 30;
    int pose_train_samples = 300;
    int pose_eval_samples = 150;
    double occupancy = 0.55;

    // evaluation
    int eval_pairs = 200;

    std::string serialize() const;
    void apply_line(const std::string& line);        // one "key = value"
    void apply_env_overrides();                      // BLINDNET_* variables
    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

}  // namespace blindnet
