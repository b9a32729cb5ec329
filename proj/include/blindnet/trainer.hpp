#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blindnet/config.hpp"
#include "blindnet/data.hpp"
#include "blindnet/losses.hpp"
#include "blindnet/model.hpp"
#include "blindnet/pose.hpp"

namespace blindnet {

// Owns the model, optimizer and step counter for one training run. All
// randomness is keyed by (config seed, step), so a run resumed from a
// checkpoint replays the original byte for byte.
class Trainer {
public:
    Trainer(const RunConfig& cfg, const Corpus& corpus);

    void resume_from(const std::string& checkpoint_path);
    LossReport train_step();  // one optimizer update over one batch
    void save(const std::string& path) const;

    // Runs to the configured step budget, appending CSV rows to log_path
    // and dropping periodic checkpoints under out_dir. Returns the final
    // checkpoint path.
    std::string run(const std::string& out_dir, const std::string& log_path,
                    const std::function<void(const LossReport&)>& on_step = {});

    uint64_t step() const { return step_; }
    int total_steps() const;
    int steps_per_epoch() const;
    BlindNet& model() { return model_; }
    const BlindNet& model() const { return model_; }
    const RunConfig& config() const { return cfg_; }

private:
    RunConfig cfg_;
    const Corpus* corpus_;
    BlindNet model_;
    std::map<std::string, AdamState> opt_;
    uint64_t step_ = 0;

    friend void trainer_pack(struct Checkpoint&, const Trainer&);
};

void append_csv_row(const std::string& path, const LossReport& r, bool header_if_new);

// Pose-head training on frozen encoder features. Deterministic in
// (features, labels, seed).
PoseHead train_pose_head(const std::vector<std::vector<Scalar>>& features,
                         const std::vector<PoseLabel>& labels, int hidden,
                         int epochs, double lr, int lr_step_epochs, double lr_gamma,
                         uint64_t seed, const std::string& log_path = "");

// Pose dataset plumbing: renders views along sampled valid poses and encodes
// them with the frozen model.
struct PoseDataset {
    std::vector<std::vector<Scalar>> features;
    std::vector<PoseLabel> labels;
};
PoseDataset build_pose_dataset(const BlindNet& model, const CarparkWorld& world,
                               int count, uint64_t seed);

}  // namespace blindnet
