#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "blindnet/pose.hpp"
#include "blindnet/trainer.hpp"
#include "blindnet/world.hpp"
#include "testutil.hpp"

#include <cmath>

using namespace blindnet;

TEST_CASE("rendering is deterministic") {
    CarparkWorld world = make_world(77, 5);
    Rng rng(1);
    PoseLabel pose = sample_valid_pose(world, rng);
    Image a = render_view(world, pose);
    Image b = render_view(world, pose);
    CHECK(a.data == b.data);
    CHECK(a.height == 48);
    CHECK(a.width == 48);
}

TEST_CASE("vehicle population does not disturb the structure") {
    CarparkWorld day1 = make_world(77, 5);
    CarparkWorld day2 = make_world(77, 6);
    Rng rng(2);
    PoseLabel pose = sample_valid_pose(day1, rng);
    Image a = render_view(day1, pose, 48, false);
    Image b = render_view(day2, pose, 48, false);
    CHECK(a.data == b.data);  // structure-only views are day-independent
}

TEST_CASE("vehicles change exactly the pixels the renderer masks") {
    CarparkWorld world = make_world(78, 9, 0.9);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        PoseLabel pose = sample_valid_pose(world, rng);
        Mask mask(48, 48);
        Image with = render_view(world, pose, 48, true, &mask);
        Image without = render_view(world, pose, 48, false);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x) {
                bool differs = false;
                for (int c = 0; c < 3; ++c)
                    differs |= with.at(c, y, x) != without.at(c, y, x);
                if (differs) CHECK(mask.at(y, x) == 1);
                if (!mask.at(y, x)) CHECK(!differs);
            }
    }
}

TEST_CASE("sampled poses are always valid") {
    CarparkWorld world = make_world(79, 1);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        PoseLabel p = sample_valid_pose(world, rng);
        CHECK(is_valid_pose(world, p));
        CHECK(p.theta > -M_PI);
        CHECK(p.theta <= M_PI);
    }
}

TEST_CASE("untrained head produces finite deterministic predictions") {
    PoseHead head(32, 16, 11);
    Rng rng(5);
    std::vector<Scalar> feat(32);
    for (auto& v : feat) v = rng.normal();
    PoseLabel a = head.predict(feat);
    PoseLabel b = head.predict(feat);
    CHECK(std::isfinite(a.x));
    CHECK(std::isfinite(a.y));
    CHECK(std::isfinite(a.theta));
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.theta == b.theta);
}

TEST_CASE("homoscedastic loss closed-form cases") {
    PoseHead head(8, 8, 12);

    auto eval_loss = [&](double px, double py, double theta, double s_t, double s_r,
                         const PoseLabel& gt) {
        Tape t;
        PoseHead::Outputs out;
        out.pos = make_tensor({1, 2}, std::vector<Scalar>{px, py}, false);
        out.cos_sin = make_tensor(
            {1, 2}, std::vector<Scalar>{std::cos(theta), std::sin(theta)}, false);
        out.s_t = make_scalar(s_t);
        out.s_r = make_scalar(s_r);
        return homoscedastic_loss(t, out, gt)->data[0];
    };

    SUBCASE("exact prediction with zero log-variances is zero") {
        PoseLabel gt{2.0, 3.0, 0.7};
        CHECK(eval_loss(2.0, 3.0, 0.7, 0.0, 0.0, gt) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("one meter of position error gives loss one") {
        PoseLabel gt{2.0, 3.0, 0.7};
        CHECK(eval_loss(3.0, 3.0, 0.7, 0.0, 0.0, gt) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("angle residual wraps across the branch cut") {
        PoseLabel gt{0.0, 0.0, 3.0};
        double l = eval_loss(0.0, 0.0, -3.0, 0.0, 0.0, gt);
        // |wrap(-3 - 3)| = |2*pi - 6|, not 6.
        CHECK(l == doctest::Approx(2 * M_PI - 6.0).epsilon(1e-9));
    }
}

TEST_CASE("s_t gradient vanishes where exp(s_t) equals the position residual") {
    PoseLabel gt{1.0, 2.0, 0.3};
    double resid = 0.7;  // |dx| + |dy|
    auto s_t = make_scalar(std::log(resid), true);
    auto loss_fn = [&](Tape& t, double sv) {
        PoseHead::Outputs out;
        out.pos = make_tensor({1, 2}, std::vector<Scalar>{1.4, 2.3}, false);
        out.cos_sin = make_tensor(
            {1, 2}, std::vector<Scalar>{std::cos(0.3), std::sin(0.3)}, false);
        out.s_t = make_scalar(sv, false);
        out.s_r = make_scalar(0.0);
        return homoscedastic_loss(t, out, gt)->data[0];
    };
    {
        Tape t;
        PoseHead::Outputs out;
        out.pos = make_tensor({1, 2}, std::vector<Scalar>{1.4, 2.3}, false);
        out.cos_sin = make_tensor(
            {1, 2}, std::vector<Scalar>{std::cos(0.3), std::sin(0.3)}, false);
        out.s_t = s_t;
        out.s_r = make_scalar(0.0);
        t.backward(homoscedastic_loss(t, out, gt));
    }
    // Both the reverse-mode gradient and the finite-difference slope must
    // vanish (absolute tolerance; relative error is meaningless at zero).
    CHECK(std::abs(s_t->grad[0]) < 1e-9);
    double h = 1e-5;
    Tape t1, t2;
    double fd = (loss_fn(t1, std::log(resid) + h) - loss_fn(t2, std::log(resid) - h)) / (2 * h);
    CHECK(std::abs(fd) < 1e-6);
}

TEST_CASE("pose loss gradients match finite differences") {
    PoseLabel gt{0.5, -1.0, 1.2};
    Rng rng(6);
    auto pos = testutil::random_tensor({1, 2}, rng);
    auto cs = testutil::random_tensor({1, 2}, rng);
    auto s_t = make_scalar(0.2, true);
    auto s_r = make_scalar(-0.1, true);
    double err = testutil::gradcheck(
        [&](Tape& t, const std::vector<TensorPtr>& p) {
            PoseHead::Outputs out{p[0], p[1], p[2], p[3]};
            return homoscedastic_loss(t, out, gt);
        },
        {pos, cs, s_t, s_r});
    CHECK(err < 1e-4);
}

TEST_CASE("median conventions") {
    PoseHead head(4, 4, 13);
    std::vector<std::vector<Scalar>> feats;
    std::vector<PoseLabel> labels;

    SUBCASE("empty trajectory is an explicit error") {
        CHECK_THROWS(evaluate_pose(head, feats, labels));
    }
    SUBCASE("odd count takes the middle, even count the lower middle") {
        // Build labels so position errors against the head's constant-zero
        // behavior are irrelevant; instead check the median helper through
        // evaluate_pose with crafted ground truths.
        std::vector<Scalar> f(4, 0.0);
        PoseLabel base = head.predict(f);
        for (double d : {1.0, 2.0, 9.0}) {
            feats.push_back(f);
            labels.push_back({base.x + d, base.y, base.theta});
        }
        PoseErrors e = evaluate_pose(head, feats, labels);
        CHECK(e.median_position == doctest::Approx(2.0).epsilon(1e-9));
        feats.push_back(f);
        labels.push_back({base.x + 4.0, base.y, base.theta});
        e = evaluate_pose(head, feats, labels);
        CHECK(e.median_position == doctest::Approx(2.0).epsilon(1e-9));  // lower middle
    }
    SUBCASE("perfect predictions give zero errors") {
        std::vector<Scalar> f(4, 0.5);
        PoseLabel exact = head.predict(f);
        for (int i = 0; i < 4; ++i) {
            feats.push_back(f);
            labels.push_back(exact);
        }
        PoseErrors e = evaluate_pose(head, feats, labels);
        CHECK(e.median_position == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(e.median_angle == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("pose head training reduces the loss on a learnable mapping") {
    // Features linearly determine the pose; a few epochs must help.
    Rng rng(7);
    std::vector<std::vector<Scalar>> feats;
    std::vector<PoseLabel> labels;
    for (int i = 0; i < 40; ++i) {
        std::vector<Scalar> f(8);
        for (auto& v : f) v = rng.uniform();
        labels.push_back({2.0 * f[0] + 1.0, 3.0 * f[1], wrap_pi(1.5 * f[2])});
        feats.push_back(std::move(f));
    }
    PoseHead head = train_pose_head(feats, labels, 16, 40, 1e-2, 30, 0.5, 99);
    PoseErrors e = evaluate_pose(head, feats, labels);
    CHECK(e.median_position < 0.5);

    // Determinism of the whole training run.
    PoseHead again = train_pose_head(feats, labels, 16, 40, 1e-2, 30, 0.5, 99);
    for (auto& [n, p] : head.params)
        CHECK(p->data == again.params.at(n)->data);
}
