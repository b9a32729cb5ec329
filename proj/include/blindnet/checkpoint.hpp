#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blindnet/model.hpp"
#include "blindnet/pose.hpp"
#include "blindnet/tensor.hpp"

namespace blindnet {

// Binary checkpoint: magic, version, config text, step counter, then
// length-prefixed named f64 tensors (little-endian on every supported
// platform). Full-precision storage makes save/load a byte-exact round
// trip, which resume-determinism depends on.
struct Checkpoint {
    uint32_t version = 1;
    std::string config_text;
    uint64_t step = 0;
    std::vector<std::pair<std::string, TensorPtr>> tensors;

    TensorPtr find(const std::string& name) const;  // throws if absent
    void add(const std::string& name, const TensorPtr& t);
    void add_values(const std::string& name, const std::vector<Scalar>& v,
                    const std::vector<int>& shape);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Model/optimizer <-> checkpoint plumbing.
void pack_model(Checkpoint& ckpt, const BlindNet& model);
void unpack_model(const Checkpoint& ckpt, BlindNet& model);
void pack_adam(Checkpoint& ckpt, const std::map<std::string, AdamState>& opt);
void unpack_adam(const Checkpoint& ckpt, std::map<std::string, AdamState>& opt,
                 const std::map<std::string, TensorPtr>& params);
void pack_pose_head(Checkpoint& ckpt, const PoseHead& head);
void unpack_pose_head(const Checkpoint& ckpt, PoseHead& head);

// Hex digest of a file's bytes (FNV-1a 64); used to verify the encoder
// checkpoint is untouched by pose-head training.
std::string file_digest(const std::string& path);

}  // namespace blindnet
