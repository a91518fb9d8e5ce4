#include "oracle_episodes.hpp"

#include "tsdial/eval.hpp"
#include "tsdial/synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace tsdial;
using tsdial::testing::oracle_cases;
using tsdial::testing::toy_database;

TEST_CASE("BLEU-4 of identical sentences is one") {
    const Tokens s = tokenize("i recommend [restaurant_name] for you .");
    CHECK(bleu4_sentence(s, s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("BLEU-4 of an empty hypothesis is zero") { CHECK(bleu4_sentence({}, tokenize("a b c d")) == 0.0); }

TEST_CASE("BLEU-4 hand-worked values") {
    // p1 = 3/4 unsmoothed; p2 = (2+1)/(3+1), p3 = (1+1)/(2+1), p4 = (0+1)/(1+1); equal lengths.
    const double expected = std::pow(0.75 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
    CHECK(bleu4_sentence(tokenize("a b c x"), tokenize("a b c d")) == doctest::Approx(expected).epsilon(1e-12));
    // No shared unigram: the unsmoothed first-order precision is zero.
    CHECK(bleu4_sentence(tokenize("e f g h"), tokenize("a b c d")) == 0.0);
    // Short hypothesis: brevity penalty exp(1 - 4/2); p2 = (1+1)/(1+1); p3 = p4 = 1.
    CHECK(bleu4_sentence(tokenize("a b"), tokenize("a b c d")) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("BLEU-4 stays in [0, 1] and completing a prefix never lowers unigram matches") {
    const Tokens ref = tokenize("the phone is [hotel_phone] and the address is [hotel_address] .");
    double previous = -1.0;
    for (std::size_t n = 1; n <= ref.size(); ++n) {
        const Tokens hyp(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(n));
        const double b = bleu4_sentence(hyp, ref);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0 + 1e-12);
        CHECK(b >= previous);
        previous = b;
    }
}

TEST_CASE("hand-labelled Inform / Success oracle") {
    const Database db = toy_database();
    for (const auto& c : oracle_cases()) {
        CAPTURE(c.episode.episode_id);
        CHECK(informed(c.episode, c.generated, db) == c.informed);
        CHECK(succeeded(c.episode, c.generated, db) == c.succeeded);
        if (c.succeeded) CHECK(c.informed);
    }
}

TEST_CASE("misaligned responses are rejected") {
    const auto cases = oracle_cases();
    std::vector<Tokens> short_gen(cases[0].generated.begin(), cases[0].generated.end() - 1);
    CHECK_THROWS_AS(informed(cases[0].episode, short_gen, toy_database()), std::invalid_argument);
}

TEST_CASE("score_responses aggregates rates and keeps success below inform") {
    const auto cases = oracle_cases();
    std::vector<Episode> eps;
    std::vector<std::vector<Tokens>> gen;
    int inf = 0, suc = 0;
    for (const auto& c : cases) {
        eps.push_back(c.episode);
        gen.push_back(c.generated);
        inf += c.informed;
        suc += c.succeeded;
    }
    const EvalReport r = score_responses(eps, gen, toy_database());
    CHECK(r.inform_rate == doctest::Approx(100.0 * inf / 20.0));
    CHECK(r.success_rate == doctest::Approx(100.0 * suc / 20.0));
    CHECK(r.success_rate <= r.inform_rate);
    CHECK(r.per_episode.size() == 20);
    const auto j = r.to_json();
    CHECK(j.at("per_episode").size() == 20);
    CHECK(r.to_text().find("Success(%)") != std::string::npos);
}

TEST_CASE("gold responses score 100 / 100 on the synthetic corpus") {
    SynthesisSpec spec = SynthesisSpec::standard();
    spec.episodes_per_domain = 40;
    const SyntheticCorpus corpus = generate_synthetic_corpus(spec, 5);
    std::vector<Episode> eps;
    std::vector<std::vector<Tokens>> gold;
    for (const auto& ep : corpus.episodes) {
        eps.push_back(delexicalize(ep, corpus.ontology, corpus.database));
        std::vector<Tokens> g;
        for (const auto& t : eps.back().turns) g.push_back(t.response);
        gold.push_back(g);
    }
    const EvalReport r = score_responses(eps, gold, corpus.database);
    CHECK(r.inform_rate == 100.0);
    CHECK(r.success_rate == 100.0);
    CHECK(r.bleu == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<std::vector<Tokens>> empty;
    for (const auto& ep : eps) empty.emplace_back(ep.turns.size());
    const EvalReport none = score_responses(eps, empty, corpus.database);
    CHECK(none.bleu == 0.0);
    CHECK(none.inform_rate == 0.0);
}
