#pragma once

#include "support.hpp"

// Hand-labelled Inform / Success cases over the toy database.
namespace tsdial::testing {

struct OracleCase {
    Episode episode;
    std::vector<Tokens> generated;
    bool informed;
    bool succeeded;
};

inline OracleCase oracle_case(const std::string& id, std::map<std::string, DomainGoal> goal,
                              const std::vector<std::string>& responses, bool informed, bool succeeded) {
    OracleCase c;
    c.episode.episode_id = id;
    c.episode.goal = std::move(goal);
    for (const auto& r : responses) {
        c.episode.turns.push_back(make_turn("user text", "gold response"));
        c.generated.push_back(tokenize(r));
    }
    c.informed = informed;
    c.succeeded = succeeded;
    return c;
}

inline std::vector<OracleCase> oracle_cases() {
    const DomainGoal italian{{{"food", "italian"}}, {}};
    const DomainGoal italian_north_phone{{{"food", "italian"}, {"area", "north"}}, {"phone"}};
    const DomainGoal thai{{{"food", "thai"}}, {}};
    const DomainGoal thai_phone{{{"food", "thai"}}, {"phone"}};
    const DomainGoal italian_phone{{{"food", "italian"}}, {"phone"}};
    const DomainGoal italian_address{{{"food", "italian"}}, {"address"}};
    const DomainGoal taxi_morning{{{"leave", "morning"}}, {}};
    const DomainGoal taxi_morning_phone{{{"leave", "morning"}}, {"phone"}};
    const DomainGoal requests_only{{}, {"phone"}};

    std::vector<OracleCase> v;
    v.push_back(oracle_case("o01", {{"restaurant", italian}}, {"hi", "try [restaurant_name] ."}, true, true));
    v.push_back(oracle_case("o02", {{"restaurant", italian}}, {"hi", "what area ?"}, false, false));
    v.push_back(oracle_case("o03", {{"restaurant", italian_north_phone}},
                            {"[restaurant_name] is good", "phone is [restaurant_phone]"}, true, true));
    v.push_back(oracle_case("o04", {{"restaurant", italian_north_phone}}, {"[restaurant_name] is good", "bye"},
                            true, false));
    v.push_back(oracle_case("o05", {{"restaurant", italian_north_phone}}, {"what food ?", "[restaurant_phone]"},
                            false, false));
    v.push_back(oracle_case("o06", {{"restaurant", thai}}, {"sorry there is none", "bye"}, true, true));
    v.push_back(oracle_case("o07", {{"restaurant", thai}}, {"how about [restaurant_name] ?"}, true, true));
    v.push_back(oracle_case("o08", {{"restaurant", thai}}, {"what area ?", "bye"}, false, false));
    v.push_back(oracle_case("o09", {{"restaurant", thai_phone}}, {"sorry , nothing", "bye"}, true, false));
    v.push_back(oracle_case("o10", {{"restaurant", requests_only}}, {"hello"}, true, false));
    v.push_back(oracle_case("o11", {}, {"hello", "bye"}, true, true));
    v.push_back(oracle_case("o12", {{"restaurant", italian}, {"taxi", taxi_morning}},
                            {"[restaurant_name] .", "book [taxi_name] ."}, true, true));
    v.push_back(oracle_case("o13", {{"restaurant", italian}, {"taxi", taxi_morning}},
                            {"[restaurant_name] .", "when ?"}, false, false));
    v.push_back(oracle_case("o14", {{"restaurant", italian_phone}, {"taxi", taxi_morning_phone}},
                            {"[restaurant_name] [restaurant_phone]", "[taxi_name]"}, true, false));
    v.push_back(oracle_case("o15", {{"restaurant", italian_phone}, {"taxi", taxi_morning_phone}},
                            {"[restaurant_name]", "[restaurant_phone]", "[taxi_name]", "[taxi_phone]"}, true, true));
    v.push_back(oracle_case("o16", {{"restaurant", italian}}, {"[taxi_name] it is"}, false, false));
    v.push_back(oracle_case("o17", {{"restaurant", italian}}, {"sorry , no match"}, false, false));
    v.push_back(oracle_case("o18", {{"restaurant", italian_address}},
                            {"[restaurant_name] .", "anything else ?", "at [restaurant_address] ."}, true, true));
    v.push_back(oracle_case("o19", {{"restaurant", italian_phone}}, {"[restaurant_phone] first", "[restaurant_name]"},
                            true, true));
    v.push_back(oracle_case("o20", {{"restaurant", italian_phone}}, {"pizza hut it is", "[restaurant_phone]"}, false,
                            false));
    return v;
}

}  // namespace tsdial::testing
