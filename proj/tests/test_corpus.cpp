#include "support.hpp"

#include "tsdial/random.hpp"
#include "tsdial/synthetic.hpp"

#include <doctest.h>

#include <set>

using namespace tsdial;
using tsdial::testing::make_turn;
using tsdial::testing::toy_database;
using tsdial::testing::toy_ontology;

namespace {

const char* kTwoEpisodes = R"([
  {"episode_id": "e1",
   "goal": {"restaurant": {"constraints": {"food": "italian"}, "requests": ["phone"]}},
   "turns": [
     {"user": "I want italian food.", "response": "pizza hut is nice.", "domain": "restaurant",
      "belief": {"restaurant-food": "italian"}, "db_count": 3}]},
  {"episode_id": "e2",
   "turns": [{"user": "hello", "response": "hi there", "domain": null, "belief": {}, "db_count": 0}]}
])";

Episode tagged(std::vector<std::optional<std::string>> tags) {
    Episode ep;
    ep.episode_id = "x";
    for (auto& t : tags) ep.turns.push_back(make_turn("u", "r", t));
    return ep;
}

}  // namespace

TEST_CASE("tokenize lower-cases, splits punctuation and keeps placeholders whole") {
    const Tokens t = tokenize("The phone is [restaurant_phone]. Thanks!");
    CHECK(t == Tokens{"the", "phone", "is", "[restaurant_phone]", ".", "thanks", "!"});
    CHECK(join_tokens(t) == "the phone is [restaurant_phone] . thanks !");
}

TEST_CASE("parse_corpus loads episodes in file order") {
    const auto eps = parse_corpus(kTwoEpisodes, toy_ontology());
    REQUIRE(eps.size() == 2);
    CHECK(eps[0].episode_id == "e1");
    CHECK(eps[1].episode_id == "e2");
    CHECK(eps[0].turns[0].belief.at({"restaurant", "food"}) == "italian");
    CHECK(eps[0].goal.at("restaurant").requests == std::vector<std::string>{"phone"});
    CHECK_FALSE(eps[1].turns[0].domain.has_value());
}

TEST_CASE("parse_corpus accepts an empty list") { CHECK(parse_corpus("[]", toy_ontology()).empty()); }

TEST_CASE("belief value outside the ontology is rejected naming the slot") {
    const std::string bad = R"([{"episode_id": "b", "turns": [{"user": "x", "response": "y",
        "belief": {"restaurant-food": "thai"}, "db_count": 0}]}])";
    try {
        parse_corpus(bad, toy_ontology());
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("food") != std::string::npos);
        CHECK(msg.find("b") != std::string::npos);
    }
}

TEST_CASE("malformed JSON reports line context") {
    try {
        parse_corpus("[\n  {\"episode_id\": \"a\",\n  oops}\n]", toy_ontology());
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("db_count mismatch against the database is rejected") {
    const std::string bad = R"([{"episode_id": "c", "turns": [{"user": "x", "response": "y", "domain": "restaurant",
        "belief": {"restaurant-food": "italian"}, "db_count": 7}]}])";
    const Database db = toy_database();
    CHECK_THROWS_AS(parse_corpus(bad, toy_ontology(), &db), CorpusError);
    CHECK_NOTHROW(parse_corpus(bad, toy_ontology()));
}

TEST_CASE("corpus JSON round-trips") {
    const auto eps = parse_corpus(kTwoEpisodes, toy_ontology());
    const auto again = parse_corpus(corpus_to_json(eps).dump(), toy_ontology());
    CHECK(corpus_to_json(again) == corpus_to_json(eps));
}

TEST_CASE("ontology rejects duplicate domains and empty value lists") {
    CHECK_THROWS(Ontology({{"a", {{"s", {"x"}}}, {}}, {"a", {{"s", {"x"}}}, {}}}));
    CHECK_THROWS(Ontology({{"a", {{"s", {}}}, {}}}));
    CHECK_THROWS(Ontology({{"a", {{"s", {"x", "x"}}}, {}}}));
}

TEST_CASE("delexicalize replaces database values in responses only") {
    Episode ep;
    ep.episode_id = "d";
    ep.turns.push_back(make_turn("call pizza hut on 01223 323731", "the phone is 01223 323731", "restaurant"));
    ep.turns.push_back(make_turn("thanks", "pizza hut is at 2 mill road .", "restaurant"));
    ep.turns.push_back(make_turn("ok", "nothing to see here", "restaurant"));
    const Episode out = delexicalize(ep, toy_ontology(), toy_database());
    CHECK(join_tokens(out.turns[0].response) == "the phone is [restaurant_phone]");
    CHECK(out.turns[0].user == ep.turns[0].user);
    CHECK(join_tokens(out.turns[1].response) == "[restaurant_name] is at [restaurant_address] .");
    CHECK(out.turns[2].response == ep.turns[2].response);
    const Episode twice = delexicalize(out, toy_ontology(), toy_database());
    for (std::size_t i = 0; i < out.turns.size(); ++i) CHECK(twice.turns[i].response == out.turns[i].response);
}

TEST_CASE("delexicalize prefers the longest match") {
    Ontology onto({{"restaurant", {{"food", {"chinese", "modern chinese"}}}, {"phone"}}});
    Database db{{"restaurant", "a", {{"name", "wok"}, {"food", "chinese"}}},
                {"restaurant", "b", {{"name", "new wok"}, {"food", "modern chinese"}}}};
    Episode ep;
    ep.turns.push_back(make_turn("x", "new wok serves modern chinese", "restaurant"));
    const Episode out = delexicalize(ep, onto, db);
    CHECK(join_tokens(out.turns[0].response) == "[restaurant_name] serves [restaurant_food]");
}

TEST_CASE("tag_turn_domains uses placeholders, belief deltas, then carry-forward") {
    Episode ep;
    ep.episode_id = "t";
    ep.turns.push_back(make_turn("hello", "hi", std::nullopt));
    ep.turns.push_back(make_turn("a hotel", "[taxi_phone] is the number", std::nullopt));
    ep.turns.push_back(make_turn("italian", "ok", std::nullopt, {{{"restaurant", "food"}, "italian"}}));
    ep.turns.push_back(make_turn("fine", "ok", std::nullopt, {{{"restaurant", "food"}, "italian"}}));
    ep.turns.push_back(make_turn("evening", "ok", std::nullopt,
                                 {{{"restaurant", "food"}, "italian"}, {{"taxi", "leave"}, "evening"}}));
    const Episode out = tag_turn_domains(ep, toy_ontology());
    CHECK_FALSE(out.turns[0].domain.has_value());
    CHECK(out.turns[1].domain == "taxi");
    CHECK(out.turns[2].domain == "restaurant");
    CHECK(out.turns[3].domain == "restaurant");
    CHECK(out.turns[4].domain == "taxi");
}

TEST_CASE("alternating restaurant / taxi signals give alternating tags") {
    Episode ep;
    ep.episode_id = "alt";
    ep.turns.push_back(make_turn("x", "[restaurant_name] is good", std::nullopt));
    ep.turns.push_back(make_turn("x", "[taxi_phone] is the cab", std::nullopt));
    ep.turns.push_back(make_turn("x", "try [restaurant_name]", std::nullopt));
    ep.turns.push_back(make_turn("x", "call [taxi_phone]", std::nullopt));
    const Episode out = tag_turn_domains(ep, toy_ontology());
    const std::vector<std::optional<std::string>> expect{"restaurant", "taxi", "restaurant", "taxi"};
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.turns[i].domain == expect[i]);
}

TEST_CASE("multi-domain turns are reported") {
    Episode ep;
    ep.episode_id = "m";
    ep.turns.push_back(make_turn("x", "[restaurant_name] then [taxi_phone]", std::nullopt));
    TaggingDiagnostics diag;
    const Episode out = tag_turn_domains(ep, toy_ontology(), &diag);
    CHECK(out.turns[0].domain == "restaurant");
    REQUIRE(diag.multi_domain_turns.size() == 1);
    CHECK(diag.multi_domain_turns[0].first == "m");
}

TEST_CASE("split_by_domain cuts runs") {
    const Episode ep = tagged({"r", "r", "t", "t", "r"});
    const std::vector<Episode> in{ep};
    auto out = split_by_domain(in);
    REQUIRE(out["r"].size() == 2);
    CHECK(out["r"][0].turns.size() == 2);
    CHECK(out["r"][1].turns.size() == 1);
    REQUIRE(out["t"].size() == 1);
    CHECK(out["t"][0].turns.size() == 2);
}

TEST_CASE("split_by_domain: single-domain identity and all-NONE absence") {
    const std::vector<Episode> in{tagged({"r", "r", "r"}), tagged({std::nullopt, std::nullopt})};
    auto out = split_by_domain(in);
    CHECK(out.size() == 1);
    REQUIRE(out["r"].size() == 1);
    CHECK(out["r"][0].turns.size() == 3);
}

TEST_CASE("split_by_domain conserves tagged turns on random tag sequences") {
    Rng rng(7);
    const std::vector<std::optional<std::string>> choices{std::nullopt, "a", "b", "c"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Episode> eps;
        int tagged_turns = 0;
        for (int e = 0; e < 5; ++e) {
            std::vector<std::optional<std::string>> tags;
            const int n = 1 + static_cast<int>(rng.index(8));
            for (int i = 0; i < n; ++i) {
                tags.push_back(choices[rng.index(choices.size())]);
                tagged_turns += tags.back().has_value();
            }
            eps.push_back(tagged(tags));
        }
        int out_turns = 0;
        for (const auto& [d, pieces] : split_by_domain(eps)) {
            for (const auto& p : pieces) {
                for (const auto& t : p.turns) CHECK(t.domain == d);
                out_turns += static_cast<int>(p.turns.size());
            }
        }
        CHECK(out_turns == tagged_turns);
    }
}

TEST_CASE("vocabulary size, round-trip and tie-break") {
    Episode ep;
    ep.turns.push_back(make_turn("a b", "c"));
    const std::vector<Episode> in{ep};
    const Vocabulary v = build_vocabulary(in, 400);
    CHECK(v.size() == 7);
    CHECK(v.decode(v.encode(Tokens{"b"})) == Tokens{"b"});
    CHECK(v.encode(Tokens{"zzz"})[0] == Vocabulary::kUnk);

    const Vocabulary small = build_vocabulary(in, 6);
    CHECK(small.entries() == std::vector<std::string>{"a", "b"});

    Episode freq;
    freq.turns.push_back(make_turn("z z y", "x"));
    const std::vector<Episode> in2{freq};
    CHECK(build_vocabulary(in2, 5).entries() == std::vector<std::string>{"z"});
    CHECK(Vocabulary::from_json(v.to_json()).entries() == v.entries());
}

TEST_CASE("belief state encoding") {
    const Ontology onto = toy_ontology();
    const int size = belief_state_size(onto, BeliefScope::all());
    CHECK(size == (3 + 1) + (2 + 1) + (2 + 1));
    const BeliefState empty = encode_belief_state({}, onto, BeliefScope::all());
    CHECK(empty.values.sum() == 3.0);
    CHECK(empty.values(0) == 1.0);
    CHECK(empty.values(4) == 1.0);
    CHECK(empty.values(7) == 1.0);

    const BeliefState it = encode_belief_state({{{"restaurant", "food"}, "italian"}}, onto, BeliefScope::only("restaurant"));
    REQUIRE(it.values.size() == 7);
    CHECK(it.values.head(4) == Eigen::Vector4d(0, 0, 1, 0));

    const BeliefState scoped =
        encode_belief_state({{{"taxi", "leave"}, "morning"}}, onto, BeliefScope::only("restaurant"));
    CHECK(scoped.values == encode_belief_state({}, onto, BeliefScope::only("restaurant")).values);

    CHECK_THROWS(encode_belief_state({{{"restaurant", "stars"}, "two"}}, onto, BeliefScope::all()));
}

TEST_CASE("query_db_count matches a linear scan") {
    const Database db = toy_database();
    CHECK(query_db_count(BeliefAnnotation{}, Database{}, "restaurant") == 0);
    CHECK(query_db_count(BeliefAnnotation{{{"restaurant", "food"}, "italian"}}, db, "restaurant") == 3);
    CHECK(query_db_count(BeliefAnnotation{}, db, "restaurant") == 10);
    CHECK(query_db_count(BeliefAnnotation{{{"taxi", "leave"}, "evening"}}, db, "restaurant") == 10);
    int scan = 0;
    for (const auto& e : db) {
        scan += e.domain == "restaurant" && e.attributes.at("food") == "chinese" && e.attributes.at("area") == "south";
    }
    CHECK(query_db_count(std::map<std::string, std::string>{{"food", "chinese"}, {"area", "south"}}, db,
                         "restaurant") == scan);
}

TEST_CASE("db pointer buckets") {
    CHECK(encode_db_pointer(0).values == (Eigen::VectorXd(6) << 1, 0, 0, 0, 0, 0).finished());
    CHECK(encode_db_pointer(4).values == (Eigen::VectorXd(6) << 0, 0, 0, 0, 1, 0).finished());
    CHECK(encode_db_pointer(9).values == (Eigen::VectorXd(6) << 0, 0, 0, 0, 0, 1).finished());
    for (int c = 0; c <= 100; ++c) {
        const DbPointer p = encode_db_pointer(c);
        CHECK(p.values.sum() == 1.0);
        CHECK(p.bucket() == std::min(c, 5));
    }
}

TEST_CASE("synthetic corpus is deterministic, valid and covers both domains") {
    SynthesisSpec spec = SynthesisSpec::standard();
    spec.episodes_per_domain = 5;
    const SyntheticCorpus a = generate_synthetic_corpus(spec, 3);
    const SyntheticCorpus b = generate_synthetic_corpus(spec, 3);
    CHECK(a.episodes.size() == 10);
    CHECK(corpus_to_json(a.episodes) == corpus_to_json(b.episodes));
    std::set<std::string> tags;
    for (const auto& ep : a.episodes) {
        CHECK_NOTHROW(validate_episode(ep, a.ontology, &a.database));
        for (const auto& t : ep.turns) {
            if (t.domain) tags.insert(*t.domain);
        }
    }
    CHECK(tags == std::set<std::string>{"hotel", "restaurant"});
    CHECK(corpus_to_json(generate_synthetic_corpus(spec, 4).episodes) != corpus_to_json(a.episodes));
}

TEST_CASE("synthesis spec validation") {
    SynthesisSpec spec = SynthesisSpec::standard();
    spec.domains[0].informable[0].values.resize(1);
    CHECK_THROWS_AS(spec.validate(), CorpusError);
    CHECK(SynthesisSpec::from_json(SynthesisSpec::standard().to_json()).to_json() ==
          SynthesisSpec::standard().to_json());
}
