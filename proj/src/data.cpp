#include "blindnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace blindnet {

namespace {
constexpr uint64_t kStreamScene = 0x5ce4eULL;
constexpr uint64_t kStreamOverlay = 0xba7c4ULL;
constexpr uint64_t kStreamEval = 0xe7a1ULL;

std::string mask_name(const std::string& image_name) {
    auto dot = image_name.rfind(".ppm");
    return image_name.substr(0, dot) + ".car.pgm";
}
}  // namespace

Corpus generate_corpus(const GenConfig& cfg) {
    if (cfg.size % 8 != 0)
        throw std::invalid_argument(
            "generate_corpus: size must be divisible by 8 (two-level downsampling)");
    Corpus corpus;
    corpus.image_size = cfg.size;
    uint64_t structure = hash_combine(cfg.seed, 0x5712c7ULL);
    int eval_from = cfg.count - static_cast<int>(std::lround(cfg.count * cfg.holdout_fraction));
    CarparkWorld empty_world = make_world(structure, 0, 0.0);

    for (int i = 0; i < cfg.count; ++i) {
        Rng rng = Rng::substream(cfg.seed, kStreamScene, i);
        CorpusItem item;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "scene_%05d.ppm", i);
        item.name = buf;
        item.split = i >= eval_from ? "eval" : "train";
        bool natural = rng.uniform() < cfg.natural_fraction;
        if (natural) {
            uint64_t day = rng.next_u64();
            CarparkWorld world = make_world(structure, day, cfg.occupancy);
            PoseLabel pose = sample_valid_pose(world, rng);
            item.image = render_view(world, pose, cfg.size, true, &item.mask);
            item.has_car = !item.mask.empty_region();
        } else {
            PoseLabel pose = sample_valid_pose(empty_world, rng);
            item.image = render_view(empty_world, pose, cfg.size, false, nullptr);
            item.mask = Mask(cfg.size, cfg.size);
            item.has_car = false;
        }
        corpus.items.push_back(std::move(item));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("save_corpus: cannot write manifest in " + dir);
    for (const auto& item : corpus.items) {
        write_ppm((fs::path(dir) / item.name).string(), item.image);
        if (item.has_car)
            write_pgm((fs::path(dir) / mask_name(item.name)).string(), item.mask);
        manifest << item.name << " " << (item.has_car ? "car" : "-") << " "
                 << item.split << "\n";
    }
}

Corpus import_external(const std::string& dir) {
    Corpus corpus;
    if (!fs::exists(dir)) throw std::runtime_error("import_external: no such directory " + dir);

    std::vector<std::array<std::string, 3>> entries;
    fs::path manifest_path = fs::path(dir) / "manifest.txt";
    if (fs::exists(manifest_path)) {
        std::ifstream m(manifest_path);
        std::string line;
        while (std::getline(m, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::array<std::string, 3> e{"", "-", "train"};
            ss >> e[0] >> e[1] >> e[2];
            if (e[0].empty())
                throw std::runtime_error("import_external: malformed manifest line: " + line);
            entries.push_back(e);
        }
    } else {
        std::vector<std::string> names;
        for (const auto& p : fs::directory_iterator(dir))
            if (p.path().extension() == ".ppm") names.push_back(p.path().filename().string());
        std::sort(names.begin(), names.end());
        for (const auto& n : names) {
            bool has_mask = fs::exists(fs::path(dir) / mask_name(n));
            entries.push_back({n, has_mask ? "car" : "-", "train"});
        }
    }

    for (const auto& e : entries) {
        CorpusItem item;
        item.name = e[0];
        item.split = e[2];
        fs::path img_path = fs::path(dir) / e[0];
        if (!fs::exists(img_path))
            throw std::runtime_error("import_external: missing image file " + img_path.string());
        item.image = read_ppm(img_path.string());
        if (corpus.image_size == 0) corpus.image_size = item.image.width;
        if (item.image.width != corpus.image_size || item.image.height != corpus.image_size)
            throw std::runtime_error("import_external: size mismatch in " + img_path.string());
        if (e[1] == "car") {
            fs::path mp = fs::path(dir) / mask_name(e[0]);
            if (!fs::exists(mp))
                throw std::runtime_error("import_external: missing mask file " + mp.string());
            item.mask = read_pgm(mp.string());
            if (item.mask.width != item.image.width || item.mask.height != item.image.height)
                throw std::runtime_error("import_external: mask size mismatch in " + mp.string());
            item.has_car = !item.mask.empty_region();
        } else {
            item.mask = Mask(item.image.height, item.image.width);
            item.has_car = false;
        }
        corpus.items.push_back(std::move(item));
    }
    return corpus;
}

void partition(const Corpus& corpus, int class_id, std::vector<size_t>& contains,
               std::vector<size_t>& lacks) {
    if (class_id != kClassCar)
        throw std::invalid_argument("partition: unknown class id " + std::to_string(class_id));
    contains.clear();
    lacks.clear();
    for (size_t i = 0; i < corpus.items.size(); ++i)
        (corpus.items[i].has_car ? contains : lacks).push_back(i);
}

OverlaySample overlay(const Image& clean, Rng& rng, uint64_t provenance_seed) {
    OverlaySample s;
    s.clean = clean;
    s.overlaid = clean;
    s.mask = Mask(clean.height, clean.width);
    s.provenance_seed = provenance_seed;

    const int nominal_h = std::max(6, static_cast<int>(std::lround(clean.height * 0.25)));
    double scale = rng.uniform(0.5, 1.5);
    int h = std::max(4, static_cast<int>(std::lround(nominal_h * scale)));
    int w = std::max(6, static_cast<int>(std::lround(h * 1.8)));
    if (h > clean.height || w > clean.width)
        throw std::invalid_argument("overlay: sprite does not fit the image");

    Sprite sp = draw_car_sprite(random_vehicle_params(rng), h, w);
    int y0 = static_cast<int>(rng.uniform_int(clean.height - h + 1));
    int x0 = static_cast<int>(rng.uniform_int(clean.width - w + 1));
    // Distance-style shading so composited sprites span the brightness range
    // of vehicles seen in rendered scenes.
    double shade = rng.uniform(0.5, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!sp.alpha.at(y, x)) continue;
            for (int c = 0; c < 3; ++c)
                s.overlaid.at(c, y0 + y, x0 + x) = sp.patch.at(c, y, x) * shade;
            s.mask.at(y0 + y, x0 + x) = 1;
        }
    return s;
}

std::vector<TrainSample> next_training_batch(const Corpus& corpus,
                                             const BatchConfig& cfg, uint64_t seed,
                                             uint64_t step) {
    std::vector<size_t> contains, lacks;
    partition(corpus, kClassCar, contains, lacks);
    std::vector<size_t> train_contains, train_lacks;
    for (size_t i : contains)
        if (corpus.items[i].split == "train") train_contains.push_back(i);
    for (size_t i : lacks)
        if (corpus.items[i].split == "train") train_lacks.push_back(i);
    if (train_lacks.empty())
        throw std::runtime_error("next_training_batch: no class-free training images");

    std::vector<TrainSample> batch;
    for (int j = 0; j < cfg.batch_size; ++j) {
        uint64_t item_seed = hash_combine(hash_combine(seed, kStreamOverlay),
                                          step * 1000003ULL + j);
        Rng rng(item_seed);
        bool natural = cfg.natural_every > 0 && (j % cfg.natural_every) == cfg.natural_every - 1 &&
                       !train_contains.empty();
        TrainSample ts;
        if (natural) {
            ts.natural = true;
            ts.item = &corpus.items[train_contains[rng.uniform_int(train_contains.size())]];
        } else {
            ts.natural = false;
            const CorpusItem& it = corpus.items[train_lacks[rng.uniform_int(train_lacks.size())]];
            ts.overlay = overlay(it.image, rng, item_seed);
        }
        batch.push_back(std::move(ts));
    }
    return batch;
}

std::vector<OverlaySample> make_eval_pairs(const Corpus& corpus, int count,
                                           uint64_t seed) {
    std::vector<size_t> contains, lacks;
    partition(corpus, kClassCar, contains, lacks);
    std::vector<size_t> eval_lacks;
    for (size_t i : lacks)
        if (corpus.items[i].split == "eval") eval_lacks.push_back(i);
    if (eval_lacks.empty()) {
        for (size_t i : lacks) eval_lacks.push_back(i);  // fall back to train split
    }
    if (eval_lacks.empty())
        throw std::runtime_error("make_eval_pairs: no class-free images available");
    std::vector<OverlaySample> out;
    for (int i = 0; i < count; ++i) {
        uint64_t s = hash_combine(hash_combine(seed, kStreamEval), i);
        Rng rng(s);
        const CorpusItem& it = corpus.items[eval_lacks[rng.uniform_int(eval_lacks.size())]];
        out.push_back(overlay(it.image, rng, s));
    }
    return out;
}

}  // namespace blindnet
