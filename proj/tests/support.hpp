#pragma once

#include "tsdial/model.hpp"
#include "tsdial/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

namespace tsdial::testing {

/// Two-domain toy world: ten restaurants (three italian) and three taxis.
inline Ontology toy_ontology() {
    return Ontology({
        {"restaurant",
         {{"food", {"british", "italian", "chinese"}}, {"area", {"north", "south"}}},
         {"phone", "address"}},
        {"taxi", {{"leave", {"morning", "evening"}}}, {"phone"}},
    });
}

inline Database toy_database() {
    Database db;
    const char* names[] = {"golden curry", "pizza hut", "da vinci", "royal spice", "the eagle",
                           "bangkok city", "rice house", "sala thong", "ugly duckling", "la mimosa"};
    const char* foods[] = {"british", "italian", "italian", "chinese", "british",
                           "chinese", "chinese", "british", "chinese", "italian"};
    for (int i = 0; i < 10; ++i) {
        db.push_back({"restaurant",
                      "r" + std::to_string(i),
                      {{"name", names[i]},
                       {"food", foods[i]},
                       {"area", i % 2 ? "south" : "north"},
                       {"phone", "01223 32373" + std::to_string(i)},
                       {"address", std::to_string(i + 1) + " mill road"}}});
    }
    db.push_back({"taxi", "t0", {{"name", "blue cab"}, {"leave", "morning"}, {"phone", "07700 900100"}}});
    db.push_back({"taxi", "t1", {{"name", "red cab"}, {"leave", "evening"}, {"phone", "07700 900101"}}});
    db.push_back({"taxi", "t2", {{"name", "green cab"}, {"leave", "evening"}, {"phone", "07700 900102"}}});
    return db;
}

inline Turn make_turn(const std::string& user, const std::string& response,
                      std::optional<std::string> domain = std::nullopt, BeliefAnnotation belief = {},
                      int db_count = 0) {
    return {tokenize(user), tokenize(response), std::move(domain), std::move(belief), db_count};
}

/// Central-difference check of every parameter entry. `loss` must build a
/// fresh graph bound to `params` on the given tape.
inline void check_gradients(ParameterSet& params, const std::function<ad::Var(ad::Tape&)>& loss,
                            double tolerance = 1e-3, double step = 1e-6) {
    params.zero_grad();
    {
        ad::Tape tape;
        tape.backward(loss(tape));
    }
    int checked = 0;
    for (auto& p : params.items()) {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            double& x = p.value.data()[i];
            const double saved = x;
            x = saved + step;
            double up, down;
            {
                ad::Tape tape;
                up = loss(tape).scalar();
            }
            x = saved - step;
            {
                ad::Tape tape;
                down = loss(tape).scalar();
            }
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = p.grad.data()[i];
            const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            INFO(p.name << "[" << i << "] analytic " << analytic << " numeric " << numeric);
            CHECK(rel < tolerance);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

/// Delexicalized, tagged synthetic corpus with its vocabulary.
struct PreparedCorpus {
    Ontology ontology;
    Database database;
    std::vector<Episode> episodes;
    Vocabulary vocabulary;
};

inline PreparedCorpus prepared_synthetic(int episodes_per_domain, std::uint64_t seed) {
    SynthesisSpec spec = SynthesisSpec::standard();
    spec.episodes_per_domain = episodes_per_domain;
    SyntheticCorpus raw = generate_synthetic_corpus(spec, seed);
    PreparedCorpus out{std::move(raw.ontology), std::move(raw.database), {}, {}};
    for (const auto& ep : raw.episodes) {
        out.episodes.push_back(tag_turn_domains(delexicalize(ep, out.ontology, out.database), out.ontology));
    }
    out.vocabulary = build_vocabulary(out.episodes);
    return out;
}

inline ModelConfig small_config(const Vocabulary& vocabulary, std::uint64_t seed = 1) {
    ModelConfig c;
    c.embed_dim = 8;
    c.hidden_dim = 16;
    c.vocab_size = vocabulary.size();
    c.max_decode_len = 30;
    c.max_input_len = 40;
    c.seed = seed;
    return c;
}

}  // namespace tsdial::testing
