#include "blindnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace blindnet {
namespace {

struct Field {
    const char* key;
    enum { U64, I32, F64, BOOL, STR } kind;
    void* ptr;
};

std::vector<Field> fields(RunConfig& c) {
    return {
        {"seed", Field::U64, &c.seed},
        {"corpus_dir", Field::STR, &c.corpus_dir},
        {"out_dir", Field::STR, &c.out_dir},
        {"mode", Field::STR, &c.mode},
        {"image_size", Field::I32, &c.image_size},
        {"base_channels", Field::I32, &c.base_channels},
        {"bottom_codes", Field::I32, &c.bottom_codes},
        {"bottom_dim", Field::I32, &c.bottom_dim},
        {"top_codes", Field::I32, &c.top_codes},
        {"top_dim", Field::I32, &c.top_dim},
        {"beta", Field::F64, &c.beta},
        {"gamma_q", Field::F64, &c.gamma_q},
        {"gamma_o", Field::F64, &c.gamma_o},
        {"omega", Field::F64, &c.omega},
        {"use_mask_exclusion", Field::BOOL, &c.use_mask_exclusion},
        {"latent_pre_quant", Field::BOOL, &c.latent_pre_quant},
        {"lr", Field::F64, &c.lr},
        {"lr_step_epochs", Field::I32, &c.lr_step_epochs},
        {"lr_gamma", Field::F64, &c.lr_gamma},
        {"epochs", Field::I32, &c.epochs},
        {"batch_size", Field::I32, &c.batch_size},
        {"natural_every", Field::I32, &c.natural_every},
        {"checkpoint_every", Field::I32, &c.checkpoint_every},
        {"max_steps", Field::I32, &c.max_steps},
        {"ema_decay", Field::F64, &c.ema_decay},
        {"dead_code_every", Field::I32, &c.dead_code_every},
        {"pose_hidden", Field::I32, &c.pose_hidden},
        {"pose_epochs", Field::I32, &c.pose_epochs},
        {"pose_lr", Field::F64, &c.pose_lr},
        {"pose_lr_step_epochs", Field::I32, &c.pose_lr_step_epochs},
        {"pose_train_samples", Field::I32, &c.pose_train_samples},
        {"pose_eval_samples", Field::I32, &c.pose_eval_samples},
        {"occupancy", Field::F64, &c.occupancy},
        {"eval_pairs", Field::I32, &c.eval_pairs},
    };
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void assign(const Field& f, const std::string& value, const std::string& context) {
    try {
        switch (f.kind) {
            case Field::U64: *static_cast<uint64_t*>(f.ptr) = std::stoull(value); break;
            case Field::I32: *static_cast<int*>(f.ptr) = std::stoi(value); break;
            case Field::F64: *static_cast<double*>(f.ptr) = std::stod(value); break;
            case Field::BOOL: {
                if (value == "true" || value == "1")
                    *static_cast<bool*>(f.ptr) = true;
                else if (value == "false" || value == "0")
                    *static_cast<bool*>(f.ptr) = false;
                else
                    throw std::invalid_argument("expected true/false");
                break;
            }
            case Field::STR: *static_cast<std::string*>(f.ptr) = value; break;
        }
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad value '" + value + "' for key '" +
                                 f.key + "' (" + context + ")");
    }
}

}  // namespace

std::string RunConfig::serialize() const {
    RunConfig& self = const_cast<RunConfig&>(*this);
    std::ostringstream out;
    for (const Field& f : fields(self)) {
        out << f.key << " = ";
        switch (f.kind) {
            case Field::U64: out << *static_cast<uint64_t*>(f.ptr); break;
            case Field::I32: out << *static_cast<int*>(f.ptr); break;
            case Field::F64: {
                std::ostringstream v;
                v.precision(17);
                v << *static_cast<double*>(f.ptr);
                out << v.str();
                break;
            }
            case Field::BOOL: out << (*static_cast<bool*>(f.ptr) ? "true" : "false"); break;
            case Field::STR: out << *static_cast<std::string*>(f.ptr); break;
        }
        out << "\n";
    }
    return out.str();
}

void RunConfig::apply_line(const std::string& raw) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') return;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("config: missing '=' in line '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    for (const Field& f : fields(*this)) {
        if (key == f.key) {
            assign(f, value, "config line");
            return;
        }
    }
    throw std::runtime_error("config: unknown key '" + key + "'");
}

void RunConfig::apply_env_overrides() {
    for (const Field& f : fields(*this)) {
        std::string env = "BLINDNET_";
        for (const char* p = f.key; *p; ++p)
            env += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
        const char* v = std::getenv(env.c_str());
        if (v) assign(f, v, "env " + env);
    }
}

void RunConfig::validate() const {
    auto bad = [](const std::string& msg) { throw std::runtime_error("config: " + msg); };
    if (image_size < 16 || image_size % 8 != 0) bad("image_size must be a multiple of 8 and >= 16");
    if (base_channels < 1) bad("base_channels must be positive");
    if (bottom_codes < 1 || top_codes < 1) bad("codebook sizes must be positive");
    if (bottom_dim < 1 || top_dim < 1) bad("code dimensions must be positive");
    if (beta < 0.0) bad("beta must be non-negative");
    if (lr <= 0.0 || pose_lr <= 0.0) bad("learning rates must be positive");
    if (lr_gamma <= 0.0 || lr_gamma > 1.0) bad("lr_gamma must be in (0, 1]");
    if (epochs < 1 || pose_epochs < 1) bad("epochs must be positive");
    if (batch_size < 1) bad("batch_size must be positive");
    if (natural_every < 1) bad("natural_every must be positive");
    if (ema_decay < 0.0 || ema_decay >= 1.0) bad("ema_decay must be in [0, 1)");
    if (occupancy < 0.0 || occupancy > 1.0) bad("occupancy must be in [0, 1]");
    if (mode != "blind" && mode != "nonblind") bad("mode must be 'blind' or 'nonblind'");
    if (pose_train_samples < 2 || pose_eval_samples < 1) bad("pose sample counts too small");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) cfg.apply_line(line);
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace blindnet
