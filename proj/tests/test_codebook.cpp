#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "blindnet/codebook.hpp"
#include "testutil.hpp"

#include <cmath>

using namespace blindnet;
using testutil::gradcheck;
using testutil::random_tensor;

namespace {

Codebook make_cb(int k, int d, uint64_t seed = 1) {
    Rng rng(seed);
    return Codebook(k, d, rng);
}

// Exhaustive distance-matrix argmin, independent of the quantize path.
int argmin_oracle(const Scalar* vec, const Codebook& cb) {
    int best = 0;
    Scalar best_d = 1e300;
    for (int k = 0; k < cb.K; ++k) {
        Scalar d = 0;
        for (int c = 0; c < cb.D; ++c) {
            Scalar diff = vec[c] - cb.row(k)[c];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("quantize picks the nearest row") {
    Codebook cb = make_cb(2, 2);
    cb.embeddings = {0, 0, 1, 1};
    Tape t;
    auto z = make_tensor({2, 1, 1}, {0.9, 1.2});
    auto r = quantize(t, z, cb);
    CHECK(r.indices == std::vector<int>{1});
    CHECK(r.quantized->data == std::vector<Scalar>{1.0, 1.0});
}

TEST_CASE("commit loss is zero when z equals a code row") {
    Codebook cb = make_cb(2, 3);
    cb.embeddings = {1, 2, 3, 4, 5, 6};
    Tape t;
    auto z = make_tensor({3, 1, 1}, {4, 5, 6});
    auto r = quantize(t, z, cb);
    CHECK(r.commit_loss->data[0] == 0.0);
}

TEST_CASE("indices match the exhaustive argmin oracle, ties to lowest index") {
    Rng rng(42);
    Codebook cb = make_cb(7, 4, 3);
    auto z = random_tensor({4, 4, 4}, rng, false);  // 16 positions
    Tape t;
    auto r = quantize(t, z, cb);
    for (int p = 0; p < 16; ++p) {
        Scalar vec[4];
        for (int c = 0; c < 4; ++c) vec[c] = z->data[c * 16 + p];
        CHECK(r.indices[p] == argmin_oracle(vec, cb));
    }

    // duplicate rows: nearest distance ties, lowest index must win
    Codebook dup = make_cb(4, 2);
    dup.embeddings = {5, 5, 2, 2, 2, 2, 5, 5};
    auto z2 = make_tensor({2, 1, 1}, {2.1, 1.9});
    auto r2 = quantize(t, z2, dup);
    CHECK(r2.indices == std::vector<int>{1});
}

TEST_CASE("quantize errors") {
    Codebook cb = make_cb(3, 2);
    Tape t;
    auto z = make_tensor({5, 1, 1});
    CHECK_THROWS_AS(quantize(t, z, cb), std::invalid_argument);
    Codebook empty;
    CHECK_THROWS_AS(quantize(t, z, empty), std::invalid_argument);
}

TEST_CASE("quantize is idempotent on its own output") {
    Rng rng(8);
    Codebook cb = make_cb(5, 3, 9);
    auto z = random_tensor({3, 2, 2}, rng, false);
    Tape t;
    auto r1 = quantize(t, z, cb);
    auto r2 = quantize(t, r1.quantized, cb);
    CHECK(r1.indices == r2.indices);
}

TEST_CASE("straight_through forward equals quantized, identity Jacobian") {
    Rng rng(4);
    auto z = random_tensor({2, 2, 2}, rng, true);
    Codebook cb = make_cb(4, 2);
    Tape t;
    auto r = quantize(t, z, cb);
    auto st = straight_through(t, z, r.quantized);
    CHECK(st->data == r.quantized->data);

    auto loss = ops::sum(t, st);
    t.backward(loss);
    for (Scalar g : z->grad) CHECK(g == 1.0);
}

TEST_CASE("straight_through shape mismatch") {
    Tape t;
    auto z = make_tensor({2, 2, 2});
    auto q = make_tensor({2, 2, 3});
    CHECK_THROWS_AS(straight_through(t, z, q), std::invalid_argument);
}

TEST_CASE("straight_through gradient equals the identity-surrogate gradient") {
    // The straight-through backward rule is, by definition, the gradient of
    // the graph with the quantizer replaced by identity. Finite differences
    // run on that surrogate; reverse mode runs through straight_through.
    Rng rng(17);
    Codebook cb = make_cb(6, 3, 21);
    auto z = random_tensor({3, 2, 2}, rng, true);

    Tape tape;
    z->zero_grad();
    auto r = quantize(tape, z, cb);
    auto st = straight_through(tape, z, r.quantized);
    auto loss = ops::add(tape, ops::sum_sq(tape, st), r.commit_loss);
    tape.backward(loss);
    auto analytic = z->grad;

    auto frozen_q = r.quantized->data;  // assignments frozen at the base point
    std::vector<Scalar> offset(frozen_q);  // q0 - z0: st(z) == z + offset locally
    for (size_t i = 0; i < offset.size(); ++i) offset[i] -= z->data[i];
    auto surrogate = [&](Tape& t, const std::vector<TensorPtr>& p) {
        auto st_local = ops::add(t, p[0], make_tensor(p[0]->shape, offset));
        auto diff = ops::sub(t, p[0], make_tensor(p[0]->shape, frozen_q));
        auto commit = ops::scale(t, ops::sum_sq(t, diff),
                                 cb.beta / static_cast<Scalar>(p[0]->numel()));
        return ops::add(t, ops::sum_sq(t, st_local), commit);
    };
    const double h = 1e-6;
    for (size_t i = 0; i < z->numel(); ++i) {
        double orig = z->data[i];
        Tape t1, t2;
        z->data[i] = orig + h;
        double up = surrogate(t1, {z})->data[0];
        z->data[i] = orig - h;
        double dn = surrogate(t2, {z})->data[0];
        z->data[i] = orig;
        double numeric = (up - dn) / (2.0 * h);
        CHECK(std::abs(numeric - analytic[i]) /
                  std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8}) < 1e-4);
    }
}

TEST_CASE("codebook receives no gradient through the reconstruction path") {
    Rng rng(13);
    Codebook cb = make_cb(4, 2, 2);
    auto z = random_tensor({2, 3, 3}, rng, true);
    Tape t;
    auto r = quantize(t, z, cb);
    auto st = straight_through(t, z, r.quantized);
    auto loss = ops::add(t, ops::sum_sq(t, st), r.commit_loss);
    t.backward(loss);
    // embeddings are plain vectors outside the tape; nothing to check beyond
    // the quantized tensor being grad-free by construction
    CHECK_FALSE(r.quantized->requires_grad);
    CHECK(r.quantized->grad.empty());
}

TEST_CASE("ema fixed point: constant assignment converges to the vector") {
    Codebook cb = make_cb(2, 2);
    auto z = make_tensor({2, 2, 2}, {3, 3, 3, 3, -1, -1, -1, -1});  // all (3,-1)
    std::vector<int> idx{0, 0, 0, 0};
    for (int i = 0; i < 2000; ++i) ema_update(cb, z, idx);
    CHECK(std::abs(cb.row(0)[0] - 3.0) < 1e-3);
    CHECK(std::abs(cb.row(0)[1] + 1.0) < 1e-3);
}

TEST_CASE("ema decay=0 gives the batch cluster mean") {
    Codebook cb = make_cb(2, 1);
    cb.decay = 0.0;
    cb.laplace_eps = 1e-12;
    auto z = make_tensor({1, 2, 2}, {1.0, 2.0, 3.0, 10.0});
    std::vector<int> idx{0, 0, 0, 1};
    ema_update(cb, z, idx);
    CHECK(cb.row(0)[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(cb.row(1)[0] == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("ema converges to cluster means under a random stream") {
    Rng rng(31);
    Codebook cb = make_cb(3, 2, 5);
    cb.decay = 0.99;
    // three fixed cluster centers; frozen assignments
    const double centers[3][2] = {{1, 0}, {-2, 2}, {0.5, -3}};
    std::vector<double> running_sum(6, 0.0);
    std::vector<double> running_n(3, 0.0);
    for (int step = 0; step < 500; ++step) {
        auto z = make_tensor({2, 3, 3});
        std::vector<int> idx(9);
        for (int p = 0; p < 9; ++p) {
            int k = static_cast<int>(rng.uniform_int(3));
            idx[p] = k;
            for (int c = 0; c < 2; ++c) {
                double v = centers[k][c] + rng.normal() * 0.05;
                z->data[static_cast<size_t>(c) * 9 + p] = v;
                running_sum[static_cast<size_t>(k) * 2 + c] += v;
            }
            running_n[k] += 1.0;
        }
        ema_update(cb, z, idx);
    }
    // brute-force running-mean oracle
    for (int k = 0; k < 3; ++k)
        for (int c = 0; c < 2; ++c)
            CHECK(std::abs(cb.row(k)[c] -
                           running_sum[static_cast<size_t>(k) * 2 + c] / running_n[k]) < 1e-2);
}

TEST_CASE("ema count conservation") {
    Rng rng(6);
    Codebook cb = make_cb(4, 2, 7);
    auto z = random_tensor({2, 2, 5, 5}, rng, false);
    Tape t;
    auto r = quantize(t, z, cb);
    std::vector<size_t> counts(4, 0);
    for (int k : r.indices) counts[k]++;
    size_t total = 0;
    for (size_t c : counts) total += c;
    CHECK(total == 2u * 5u * 5u);
}

TEST_CASE("reinit_dead_codes") {
    Rng rng(12);
    Codebook cb = make_cb(3, 2, 4);
    cb.ema_cluster_size = {5.0, 5.0, 5.0};
    auto z = testutil::random_tensor({2, 4, 4}, rng, false);

    SUBCASE("all codes live: unchanged") {
        auto before = cb.embeddings;
        Rng r2(1);
        CHECK(reinit_dead_codes(cb, z, 0.1, r2) == 0);
        CHECK(cb.embeddings == before);
    }
    SUBCASE("dead code reassigned to a row of z") {
        cb.ema_cluster_size[1] = 0.0;
        Rng r2(1);
        CHECK(reinit_dead_codes(cb, z, 0.1, r2) == 1);
        bool found = false;
        for (int p = 0; p < 16 && !found; ++p) {
            found = cb.row(1)[0] == z->data[p] && cb.row(1)[1] == z->data[16 + p];
        }
        CHECK(found);
        CHECK(cb.ema_cluster_size[1] == 1.0);
    }
}
