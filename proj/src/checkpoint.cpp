#include "blindnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace blindnet {
namespace {

constexpr uint32_t kMagic = 0x424e434bu;  // "BNCK"

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace

TensorPtr Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
}

void Checkpoint::add(const std::string& name, const TensorPtr& t) {
    tensors.emplace_back(name, t);
}

void Checkpoint::add_values(const std::string& name, const std::vector<Scalar>& v,
                            const std::vector<int>& shape) {
    tensors.emplace_back(name, make_tensor(shape, v, false));
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    write_u32(out, kMagic);
    write_u32(out, ckpt.version);
    write_u64(out, ckpt.config_text.size());
    out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
    write_u64(out, ckpt.step);
    write_u64(out, ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
        write_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(out, t->shape.size());
        for (int d : t->shape) write_u64(out, static_cast<uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(Scalar)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    if (read_u32(in) != kMagic)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    Checkpoint ckpt;
    ckpt.version = read_u32(in);
    if (ckpt.version != 1)
        throw std::runtime_error("checkpoint: unsupported version in '" + path + "'");
    uint64_t cfg_len = read_u64(in);
    ckpt.config_text.resize(cfg_len);
    in.read(ckpt.config_text.data(), static_cast<std::streamsize>(cfg_len));
    ckpt.step = read_u64(in);
    uint64_t count = read_u64(in);
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t name_len = read_u64(in);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        uint64_t ndim = read_u64(in);
        std::vector<int> shape(ndim);
        size_t numel = 1;
        for (uint64_t d = 0; d < ndim; ++d) {
            shape[d] = static_cast<int>(read_u64(in));
            numel *= static_cast<size_t>(shape[d]);
        }
        std::vector<Scalar> data(numel);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(Scalar)));
        if (!in) throw std::runtime_error("checkpoint: truncated file '" + path + "'");
        ckpt.tensors.emplace_back(name, make_tensor(shape, data, false));
    }
    return ckpt;
}

void pack_model(Checkpoint& ckpt, const BlindNet& model) {
    for (const auto& [name, t] : model.params) ckpt.add("model." + name, t);
    const Codebook* cbs[2] = {&model.cb_bottom, &model.cb_top};
    const char* tags[2] = {"cb_bottom", "cb_top"};
    for (int i = 0; i < 2; ++i) {
        const Codebook& cb = *cbs[i];
        std::string tag = tags[i];
        ckpt.add_values(tag + ".embeddings", cb.embeddings, {cb.K, cb.D});
        ckpt.add_values(tag + ".ema_cluster_size", cb.ema_cluster_size, {cb.K});
        ckpt.add_values(tag + ".ema_embed_sum", cb.ema_embed_sum, {cb.K, cb.D});
    }
}

void unpack_model(const Checkpoint& ckpt, BlindNet& model) {
    for (auto& [name, t] : model.params) {
        TensorPtr stored = ckpt.find("model." + name);
        if (stored->shape != t->shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        t->data = stored->data;
        t->zero_grad();
    }
    Codebook* cbs[2] = {&model.cb_bottom, &model.cb_top};
    const char* tags[2] = {"cb_bottom", "cb_top"};
    for (int i = 0; i < 2; ++i) {
        Codebook& cb = *cbs[i];
        std::string tag = tags[i];
        cb.embeddings = ckpt.find(tag + ".embeddings")->data;
        cb.ema_cluster_size = ckpt.find(tag + ".ema_cluster_size")->data;
        cb.ema_embed_sum = ckpt.find(tag + ".ema_embed_sum")->data;
        if (cb.embeddings.size() != static_cast<size_t>(cb.K) * cb.D)
            throw std::runtime_error("checkpoint: codebook size mismatch for " + tag);
    }
}

void pack_adam(Checkpoint& ckpt, const std::map<std::string, AdamState>& opt) {
    for (const auto& [name, st] : opt) {
        ckpt.add_values("adam." + name + ".m", st.m, {static_cast<int>(st.m.size())});
        ckpt.add_values("adam." + name + ".v", st.v, {static_cast<int>(st.v.size())});
        ckpt.add_values("adam." + name + ".t", {static_cast<Scalar>(st.step)}, {1});
    }
}

void unpack_adam(const Checkpoint& ckpt, std::map<std::string, AdamState>& opt,
                 const std::map<std::string, TensorPtr>& params) {
    opt.clear();
    for (const auto& [name, p] : params) {
        AdamState st;
        st.m = ckpt.find("adam." + name + ".m")->data;
        st.v = ckpt.find("adam." + name + ".v")->data;
        st.step = static_cast<long>(ckpt.find("adam." + name + ".t")->data.at(0));
        if (st.m.size() != p->data.size())
            throw std::runtime_error("checkpoint: optimizer state mismatch for '" + name + "'");
        opt.emplace(name, std::move(st));
    }
}

void pack_pose_head(Checkpoint& ckpt, const PoseHead& head) {
    for (const auto& [name, t] : head.params) ckpt.add("pose." + name, t);
}

void unpack_pose_head(const Checkpoint& ckpt, PoseHead& head) {
    for (auto& [name, t] : head.params) {
        TensorPtr stored = ckpt.find("pose." + name);
        if (stored->shape != t->shape)
            throw std::runtime_error("checkpoint: shape mismatch for pose '" + name + "'");
        t->data = stored->data;
        t->zero_grad();
    }
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("digest: cannot open '" + path + "'");
    uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

}  // namespace blindnet
