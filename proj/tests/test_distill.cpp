#include "support.hpp"

#include "tsdial/distill.hpp"
#include "tsdial/random.hpp"
#include "tsdial/train.hpp"

#include <doctest.h>

#include <cmath>

using namespace tsdial;
namespace ad = tsdial::ad;
using tsdial::testing::check_gradients;

namespace {

ModelConfig tiny() {
    ModelConfig c;
    c.embed_dim = 5;
    c.hidden_dim = 8;
    c.vocab_size = 12;
    c.max_decode_len = 6;
    c.max_input_len = 10;
    c.seed = 4;
    return c;
}

Eigen::VectorXd random_distribution(Rng& rng, int n) {
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p(i) = std::exp(2.0 * rng.normal());
    return p / p.sum();
}

TeacherInput sample_input() {
    BeliefState b;
    b.values = Eigen::VectorXd::Zero(7);
    b.values(0) = 1.0;
    b.values(5) = 1.0;
    return {{4, 5, 6}, {7, 8, 9}, "restaurant", b, encode_db_pointer(1)};
}

}  // namespace

TEST_CASE("distill mode names") {
    for (auto m : {DistillMode::None, DistillMode::OutputFull, DistillMode::OutputTopK, DistillMode::Policy,
                   DistillMode::All}) {
        CHECK(distill_mode_from_string(to_string(m)) == m);
    }
    CHECK_THROWS(distill_mode_from_string("universal"));
}

TEST_CASE("distill config validation") {
    DistillConfig c;
    c.mode = DistillMode::OutputTopK;
    c.k = 13;
    CHECK_THROWS(c.validate(12));
    c.k = 12;
    CHECK_NOTHROW(c.validate(12));
    c.alpha1 = -1.0;
    CHECK_THROWS(c.validate(12));
    c.alpha1 = std::nan("");
    CHECK_THROWS(c.validate(12));
    DistillConfig d;
    d.mode = DistillMode::All;
    CHECK(DistillConfig::from_json(d.to_json()).to_json() == d.to_json());
}

TEST_CASE("topk_truncate hand example") {
    Eigen::VectorXd logits(4);
    logits << 2, 1, 0, -1;
    const Eigen::VectorXd p = logits.array().exp() / logits.array().exp().sum();
    const SparseDistribution s = topk_truncate(p, 2);
    REQUIRE(s.ids == std::vector<TokenId>{0, 1});
    const double e = std::exp(1.0);
    CHECK(s.probs[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(s.probs[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
}

TEST_CASE("topk_truncate identities and ties") {
    const Eigen::Vector4d p(0.1, 0.2, 0.3, 0.4);
    const SparseDistribution all = topk_truncate(p, 4);
    for (std::size_t i = 0; i < all.ids.size(); ++i) CHECK(all.probs[i] == doctest::Approx(p(all.ids[i])));
    const SparseDistribution one = topk_truncate(Eigen::Vector4d(0, 0, 1, 0), 3);
    CHECK(one.ids == std::vector<TokenId>{2});
    CHECK(one.probs == std::vector<double>{1.0});
    CHECK(topk_truncate(Eigen::Vector4d(0.25, 0.25, 0.25, 0.25), 2).ids == std::vector<TokenId>{0, 1});
}

TEST_CASE("topk_truncate sums to one with bounded support") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd p = random_distribution(rng, 10);
        if (trial % 3 == 0) p(rng.index(10)) = 0.0;
        p /= p.sum();
        const int k = 1 + static_cast<int>(rng.index(12));
        const SparseDistribution s = topk_truncate(p, k);
        double sum = 0.0;
        for (double x : s.probs) sum += x;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        const int nonzero = static_cast<int>((p.array() > 0.0).count());
        CHECK(static_cast<int>(s.ids.size()) == std::min(k, nonzero));
    }
}

TEST_CASE("output distillation of a uniform student is ln |V|") {
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, std::log(0.25));
    DistillTargets t;
    t.positions.emplace_back(Eigen::VectorXd(Eigen::Vector4d(0.7, 0.1, 0.1, 0.1)));
    t.positions.emplace_back(SparseDistribution{{2}, {1.0}});
    const std::vector<Eigen::VectorXd> lp{uniform, uniform};
    CHECK(output_distill_loss(lp, t) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    const std::vector<Eigen::VectorXd> short_lp{uniform};
    CHECK_THROWS(output_distill_loss(short_lp, t));
}

TEST_CASE("one-hot targets reduce output distillation to NLL") {
    Rng rng(4);
    const Eigen::VectorXd p1 = random_distribution(rng, 6), p2 = random_distribution(rng, 6);
    const std::vector<Eigen::VectorXd> lp{p1.array().log().matrix(), p2.array().log().matrix()};
    DistillTargets t;
    Eigen::VectorXd h1 = Eigen::VectorXd::Zero(6), h2 = Eigen::VectorXd::Zero(6);
    h1(3) = 1.0;
    h2(0) = 1.0;
    t.positions = {h1, h2};
    CHECK(output_distill_loss(lp, t) == doctest::Approx(-(std::log(p1(3)) + std::log(p2(0))) / 2.0));
}

TEST_CASE("output distillation is bounded below by the target entropy") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd target = random_distribution(rng, 8);
        const Eigen::VectorXd student = random_distribution(rng, 8);
        DistillTargets t;
        t.positions.emplace_back(target);
        const std::vector<Eigen::VectorXd> lp{student.array().log().matrix()};
        const std::vector<Eigen::VectorXd> same{target.array().log().matrix()};
        const double h = target_entropy(t.positions[0]);
        CHECK(output_distill_loss(lp, t) >= h - 1e-12);
        CHECK(output_distill_loss(same, t) == doctest::Approx(h).epsilon(1e-12));
    }
}

TEST_CASE("policy distillation") {
    CHECK(policy_distill_loss(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 2.0);
    CHECK(policy_distill_loss(Eigen::Vector2d(0.3, -0.2), Eigen::Vector2d(0.3, -0.2)) == 0.0);
    CHECK_THROWS(policy_distill_loss(Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)));
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd a(5), b(5);
        for (int i = 0; i < 5; ++i) {
            a(i) = rng.normal();
            b(i) = rng.normal();
        }
        CHECK(policy_distill_loss(a, b) == policy_distill_loss(b, a));
        CHECK(policy_distill_loss(a, b) > 0.0);
        CHECK(policy_distill_loss(a, b) == doctest::Approx((a - b).squaredNorm()));
    }
}

TEST_CASE("combined loss weights by mode") {
    DistillConfig c;
    c.mode = DistillMode::All;
    CHECK(combined_loss(3.0, 2.0, 4.0, c) == doctest::Approx(3.22));
    c.mode = DistillMode::None;
    CHECK(combined_loss(3.0, 2.0, 4.0, c) == 3.0);
    c.mode = DistillMode::OutputTopK;
    CHECK(combined_loss(3.0, 2.0, 4.0, c) == doctest::Approx(3.02));
    c.mode = DistillMode::Policy;
    CHECK(combined_loss(3.0, 2.0, 4.0, c) == doctest::Approx(3.20));
    c.mode = DistillMode::All;
    c.alpha1 = c.alpha2 = 0.0;
    CHECK(combined_loss(3.0, 2.0, 4.0, c) == 3.0);

    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        DistillConfig lo, hi;
        lo.mode = hi.mode = DistillMode::All;
        lo.alpha1 = rng.uniform();
        lo.alpha2 = rng.uniform();
        hi.alpha1 = lo.alpha1 + rng.uniform();
        hi.alpha2 = lo.alpha2 + rng.uniform();
        const double kd1 = rng.uniform(0.01, 5.0), kd2 = rng.uniform(0.01, 5.0);
        CHECK(combined_loss(1.0, kd1, kd2, hi) >= combined_loss(1.0, kd1, kd2, lo));
    }
}

TEST_CASE("teacher targets: shapes, normalization and domain check") {
    const TeacherModel teacher(tiny(), "restaurant", 7);
    const TeacherInput in = sample_input();
    const DistillTargets full = teacher_targets(teacher, in, DistillMode::OutputFull, 5);
    REQUIRE(full.positions.size() == in.response.size() + 1);
    for (const auto& pos : full.positions) {
        const auto& v = std::get<Eigen::VectorXd>(pos);
        CHECK(v.size() == 12);
        CHECK(std::abs(v.sum() - 1.0) < 1e-6);
    }
    CHECK(full.action.size() == 8);
    CHECK(teacher_targets(teacher, in, DistillMode::Policy, 5).positions.empty());

    const DistillTargets sparse = teacher_targets(teacher, in, DistillMode::OutputTopK, 5);
    for (const auto& pos : sparse.positions) CHECK(std::get<SparseDistribution>(pos).ids.size() <= 5);

    const DistillTargets one = teacher_targets(teacher, in, DistillMode::OutputTopK, 1);
    for (std::size_t i = 0; i < one.positions.size(); ++i) {
        const auto& s = std::get<SparseDistribution>(one.positions[i]);
        REQUIRE(s.ids.size() == 1);
        CHECK(s.probs[0] == 1.0);
        CHECK(s.ids[0] == argmax(Eigen::MatrixXd(std::get<Eigen::VectorXd>(full.positions[i]))));
    }

    TeacherInput other = in;
    other.domain = "hotel";
    CHECK_THROWS_AS(teacher_targets(teacher, other, DistillMode::OutputFull, 5), std::invalid_argument);
    const TeacherModel universal(tiny(), std::string(kUniversalTeacher), 7);
    CHECK_NOTHROW(teacher_targets(universal, other, DistillMode::OutputFull, 5));
}

TEST_CASE("top-|V| distillation equals full distillation") {
    const TeacherModel teacher(tiny(), "restaurant", 7);
    const TeacherInput in = sample_input();
    const DistillTargets full = teacher_targets(teacher, in, DistillMode::OutputFull, 12);
    const DistillTargets topv = teacher_targets(teacher, in, DistillMode::OutputTopK, 12);
    Rng rng(9);
    std::vector<Eigen::VectorXd> lp;
    for (std::size_t i = 0; i < full.positions.size(); ++i) lp.push_back(random_distribution(rng, 12).array().log());
    CHECK(std::abs(output_distill_loss(lp, full) - output_distill_loss(lp, topv)) < 1e-9);
}

TEST_CASE("distillation loss gradients match finite differences") {
    const TeacherModel teacher(tiny(), "restaurant", 7);
    const TeacherInput in = sample_input();
    StudentModel student(tiny());
    EncodedEpisode ep;
    ep.turns.push_back({in.user, in.response, nullptr});

    for (auto mode : {DistillMode::OutputFull, DistillMode::OutputTopK, DistillMode::Policy}) {
        CAPTURE(to_string(mode));
        const std::vector<std::optional<DistillTargets>> targets{teacher_targets(teacher, in, mode, 3)};
        DistillConfig cfg;
        cfg.mode = mode;
        check_gradients(student.parameters(), [&](ad::Tape& tape) {
            const StudentGraph g(tape, student);
            const auto terms = student_episode_terms(g, ep, targets, cfg);
            return mode == DistillMode::Policy ? terms[0].kd_policy : terms[0].kd_output;
        });
    }
}
