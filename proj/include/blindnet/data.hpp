#pragma once

#include "blindnet/image.hpp"
#include "blindnet/rng.hpp"
#include "blindnet/sprites.hpp"
#include "blindnet/world.hpp"

#include <string>
#include <vector>

namespace blindnet {

inline constexpr int kClassCar = 0;

struct CorpusItem {
    std::string name;
    Image image;
    Mask mask;  // class-car pixels; empty mask when the class is absent
    bool has_car = false;
    std::string split = "train";
};

struct Corpus {
    int image_size = 0;
    std::vector<CorpusItem> items;
};

// The Siamese training unit: x_c, x_{c'} and the binary overlay mask.
// x_{c'} equals x_c bit-exactly wherever the mask is 0.
struct OverlaySample {
    Image clean;
    Image overlaid;
    Mask mask;
    int class_id = kClassCar;
    uint64_t provenance_seed = 0;
};

// A natural sample carries its annotated class mask but no paired clean image.
struct TrainSample {
    bool natural = false;
    OverlaySample overlay;       // valid when !natural
    const CorpusItem* item = nullptr;  // valid when natural
};

struct GenConfig {
    uint64_t seed = 7;
    int count = 100;
    int size = 48;
    double natural_fraction = 0.4;  // corpus items rendered with vehicles
    double occupancy = 0.55;
    double holdout_fraction = 0.1;  // split = "eval"
};

// Deterministic synthetic corpus: raycast carpark views, some populated with
// vehicles (natural samples, mask from the renderer), the rest structure-only.
Corpus generate_corpus(const GenConfig& cfg);

void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus import_external(const std::string& dir);

// Splits item indices by presence of the class. The two sets are disjoint and
// cover the corpus.
void partition(const Corpus& corpus, int class_id, std::vector<size_t>& contains,
               std::vector<size_t>& lacks);

// Alpha-composites a fresh sprite at a uniformly random position and scale
// (0.5..1.5 of nominal).
OverlaySample overlay(const Image& clean, Rng& rng, uint64_t provenance_seed = 0);

struct BatchConfig {
    int batch_size = 8;
    int natural_every = 4;  // 1 natural per (natural_every - 1) overlay samples
};

// Pure function of (corpus, seed, step); the same pair reproduces the batch.
std::vector<TrainSample> next_training_batch(const Corpus& corpus,
                                             const BatchConfig& cfg, uint64_t seed,
                                             uint64_t step);

// Fixed held-out overlay pairs for evaluation, keyed by seed.
std::vector<OverlaySample> make_eval_pairs(const Corpus& corpus, int count,
                                           uint64_t seed);

}  // namespace blindnet
