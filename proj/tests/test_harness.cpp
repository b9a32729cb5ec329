#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "blindnet/checkpoint.hpp"
#include "blindnet/config.hpp"
#include "blindnet/trainer.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace blindnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("blindnet_harness_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(BLINDNET_CLI) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config serialization round trips every field") {
    RunConfig cfg;
    cfg.seed = 123;
    cfg.mode = "nonblind";
    cfg.lr = 3.25e-4;
    cfg.omega = 0.0;
    cfg.use_mask_exclusion = false;
    cfg.corpus_dir = "some/dir";
    RunConfig back = parse_config_text(cfg.serialize());
    CHECK(back.serialize() == cfg.serialize());
    CHECK(back.seed == 123);
    CHECK(back.lr == 3.25e-4);
    CHECK(back.mode == "nonblind");
    CHECK(!back.use_mask_exclusion);
}

TEST_CASE("config rejects unknown keys and bad values") {
    RunConfig cfg;
    CHECK_THROWS(cfg.apply_line("no_such_key = 5"));
    CHECK_THROWS(cfg.apply_line("lr = banana"));
    CHECK_THROWS(cfg.apply_line("use_mask_exclusion = maybe"));
    CHECK_THROWS(cfg.apply_line("just some text"));
    cfg.apply_line("# a comment");
    cfg.apply_line("");
    cfg.apply_line("epochs = 5");
    CHECK(cfg.epochs == 5);
}

TEST_CASE("environment variables override config keys") {
    RunConfig cfg;
    setenv("BLINDNET_BATCH_SIZE", "13", 1);
    setenv("BLINDNET_MODE", "nonblind", 1);
    cfg.apply_env_overrides();
    unsetenv("BLINDNET_BATCH_SIZE");
    unsetenv("BLINDNET_MODE");
    CHECK(cfg.batch_size == 13);
    CHECK(cfg.mode == "nonblind");
}

TEST_CASE("config validation names broken constraints") {
    RunConfig cfg;
    cfg.image_size = 50;
    try {
        cfg.validate();
        FAIL("expected a validation error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("multiple of 8") != std::string::npos);
    }
}

TEST_CASE("checkpoint save and load round trips byte-identically") {
    TempDir dir("ckpt");
    GenConfig gc;
    gc.seed = 19;
    gc.count = 12;
    Corpus corpus = generate_corpus(gc);
    RunConfig rc;
    rc.seed = 19;
    Trainer tr(rc, corpus);
    tr.train_step();
    fs::path a = dir.path / "a.ckpt";
    fs::path b = dir.path / "b.ckpt";
    tr.save(a.string());

    Checkpoint loaded = load_checkpoint(a.string());
    save_checkpoint(b.string(), loaded);
    CHECK(slurp(a) == slurp(b));
    CHECK(loaded.step == 1);
    CHECK(parse_config_text(loaded.config_text).seed == 19);
    CHECK_THROWS(load_checkpoint((dir.path / "missing.ckpt").string()));
    CHECK_THROWS(loaded.find("no_such_tensor"));
}

TEST_CASE("resume reproduces an uninterrupted run bit for bit") {
    GenConfig gc;
    gc.seed = 23;
    gc.count = 16;
    Corpus corpus = generate_corpus(gc);
    RunConfig rc;
    rc.seed = 23;

    Trainer full(rc, corpus);
    std::vector<LossReport> straight;
    TempDir dir("resume");
    fs::path mid = dir.path / "mid.ckpt";
    for (int i = 0; i < 6; ++i) {
        if (i == 3) full.save(mid.string());
        straight.push_back(full.train_step());
    }

    Trainer resumed(rc, corpus);
    resumed.resume_from(mid.string());
    CHECK(resumed.step() == 3);
    for (int i = 3; i < 6; ++i) {
        LossReport r = resumed.train_step();
        CHECK(r.total == straight[i].total);
        CHECK(r.l_r == straight[i].l_r);
        CHECK(r.l_l == straight[i].l_l);
    }
    for (auto& [name, p] : full.model().params)
        CHECK(p->data == resumed.model().params.at(name)->data);
    CHECK(full.model().cb_bottom.embeddings == resumed.model().cb_bottom.embeddings);
}

TEST_CASE("nonblind mode forces omega to zero and disables mask exclusion") {
    GenConfig gc;
    gc.seed = 29;
    gc.count = 12;
    Corpus corpus = generate_corpus(gc);
    RunConfig rc;
    rc.seed = 29;
    rc.mode = "nonblind";
    Trainer tr(rc, corpus);
    CHECK(tr.config().omega == 0.0);
    CHECK(!tr.config().use_mask_exclusion);
    LossReport r = tr.train_step();
    CHECK(r.l_l == 0.0);  // siamese terms carry no weight in this mode
    CHECK(r.l_o == 0.0);

    // Shared init: the blind run's first-step reconstruction term uses the
    // same weights, inputs and clean-arm objective composition.
    RunConfig rb = rc;
    rb.mode = "blind";
    Trainer tb(rb, corpus);
    LossReport rblind = tb.train_step();
    CHECK(rblind.l_q == r.l_q);  // commitment identical before updates diverge
}

TEST_CASE("trainer writes one CSV row per step") {
    TempDir dir("csv");
    GenConfig gc;
    gc.seed = 37;
    gc.count = 12;
    Corpus corpus = generate_corpus(gc);
    RunConfig rc;
    rc.seed = 37;
    rc.max_steps = 2;
    rc.checkpoint_every = 0;
    Trainer tr(rc, corpus);
    fs::path log = dir.path / "log.csv";
    std::string final_path = tr.run(dir.path.string(), log.string());
    CHECK(fs::exists(final_path));

    std::ifstream in(log);
    std::string line;
    int rows = 0;
    std::getline(in, line);
    CHECK(line == "step,l_q,l_r,l_l,l_o,total,lr");
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);

    Checkpoint ckpt = load_checkpoint(final_path);
    CHECK(ckpt.step == 2);
}

TEST_CASE("gen-data CLI is byte-reproducible and validates its arguments") {
    TempDir dir("cli");
    std::string a = (dir.path / "a").string();
    std::string b = (dir.path / "b").string();
    REQUIRE(run_cli("gen-data --seed 7 --count 6 --out " + a) == 0);
    REQUIRE(run_cli("gen-data --seed 7 --count 6 --out " + b) == 0);
    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        fs::path other = fs::path(b) / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
        ++files;
    }
    CHECK(files > 6);  // images plus masks plus manifest

    CHECK(run_cli("gen-data --size 50 --count 2 --out " + (dir.path / "c").string()) == 2);
    CHECK(run_cli("gen-data --count 0 --out " + (dir.path / "d").string()) == 0);
    CHECK(run_cli("definitely-not-a-command") == 1);
}

TEST_CASE("training CLI smoke run resumes to identical logs") {
    TempDir dir("clitrain");
    std::string corpus = (dir.path / "corpus").string();
    REQUIRE(run_cli("gen-data --seed 11 --count 16 --out " + corpus) == 0);

    std::string full = (dir.path / "full").string();
    REQUIRE(run_cli("train-blind --corpus " + corpus + " --out " + full +
                    " --seed 11 --max-steps 4 --checkpoint-every 2") == 0);
    std::string full_log = slurp(fs::path(full) / "train_log.csv");

    std::string resumed = (dir.path / "resumed").string();
    REQUIRE(run_cli("train-blind --corpus " + corpus + " --out " + resumed +
                    " --seed 11 --max-steps 4 --checkpoint-every 2 --resume " + full +
                    "/step_2.ckpt") == 0);
    std::string resumed_log = slurp(fs::path(resumed) / "train_log.csv");

    // The resumed log holds rows 2..3; they must match the tail of the full log.
    CHECK(full_log.find(resumed_log.substr(resumed_log.find('\n') + 1)) != std::string::npos);

    // The config blobs differ in out_dir, so compare the stored tensors.
    Checkpoint ca = load_checkpoint((fs::path(full) / "final.ckpt").string());
    Checkpoint cb = load_checkpoint((fs::path(resumed) / "final.ckpt").string());
    CHECK(ca.step == cb.step);
    REQUIRE(ca.tensors.size() == cb.tensors.size());
    for (size_t i = 0; i < ca.tensors.size(); ++i) {
        CHECK(ca.tensors[i].first == cb.tensors[i].first);
        CHECK(ca.tensors[i].second->data == cb.tensors[i].second->data);
    }
}
