#include "tsdial/synthetic.hpp"

#include "tsdial/random.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace tsdial {

using nlohmann::ordered_json;

void SynthesisSpec::validate() const {
    if (domains.empty()) throw CorpusError("synthesis spec: at least one domain required");
    if (episodes_per_domain < 0) throw CorpusError("synthesis spec: episodes_per_domain must be >= 0");
    std::set<std::string> names;
    for (const auto& d : domains) {
        if (!names.insert(d.name).second) throw CorpusError("synthesis spec: duplicate domain '" + d.name + "'");
        if (d.informable.empty()) throw CorpusError("synthesis spec: domain '" + d.name + "' has no slots");
        for (const auto& s : d.informable) {
            if (s.values.size() < 2) {
                throw CorpusError("synthesis spec: slot '" + d.name + "-" + s.slot + "' needs at least 2 values");
            }
        }
        if (d.entities < 1) throw CorpusError("synthesis spec: domain '" + d.name + "' needs at least 1 entity");
    }
    for (double f : {multi_domain_fraction, greeting_fraction, no_result_fraction}) {
        if (!(f >= 0.0 && f <= 1.0)) throw CorpusError("synthesis spec: fractions must lie in [0, 1]");
    }
}

ordered_json SynthesisSpec::to_json() const {
    ordered_json doms = ordered_json::array();
    for (const auto& d : domains) {
        ordered_json inf = ordered_json::object();
        for (const auto& s : d.informable) inf[s.slot] = s.values;
        doms.push_back({{"name", d.name}, {"informable", inf}, {"requestable", d.requestable}, {"entities", d.entities}});
    }
    ordered_json j;
    j["domains"] = doms;
    j["episodes_per_domain"] = episodes_per_domain;
    j["multi_domain_fraction"] = multi_domain_fraction;
    j["greeting_fraction"] = greeting_fraction;
    j["no_result_fraction"] = no_result_fraction;
    return j;
}

SynthesisSpec SynthesisSpec::from_json(const ordered_json& j) {
    SynthesisSpec spec;
    try {
        for (const auto& jd : j.at("domains")) {
            SyntheticDomainSpec d;
            d.name = jd.at("name").get<std::string>();
            for (const auto& [slot, values] : jd.at("informable").items()) {
                d.informable.push_back({slot, values.get<std::vector<std::string>>()});
            }
            d.requestable = jd.value("requestable", std::vector<std::string>{});
            d.entities = jd.value("entities", 12);
            spec.domains.push_back(std::move(d));
        }
        spec.episodes_per_domain = j.value("episodes_per_domain", spec.episodes_per_domain);
        spec.multi_domain_fraction = j.value("multi_domain_fraction", spec.multi_domain_fraction);
        spec.greeting_fraction = j.value("greeting_fraction", spec.greeting_fraction);
        spec.no_result_fraction = j.value("no_result_fraction", spec.no_result_fraction);
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(std::string("synthesis spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

SynthesisSpec SynthesisSpec::standard() {
    SynthesisSpec spec;
    spec.domains = {
        {"restaurant",
         {{"food", {"italian", "chinese", "indian", "british"}},
          {"area", {"north", "south", "centre", "east"}},
          {"pricerange", {"cheap", "moderate", "expensive"}}},
         {"phone", "address", "postcode"},
         14},
        {"hotel",
         {{"area", {"north", "south", "centre", "east"}},
          {"stars", {"two", "three", "four"}},
          {"parking", {"free", "paid"}}},
         {"phone", "address", "postcode"},
         12},
    };
    return spec;
}

namespace {

constexpr std::array kAdjectives = {"golden", "royal",  "little", "grand", "blue",   "green", "silver", "old",
                                    "lucky",  "happy",  "red",    "jade",  "bright", "quiet", "sunny",  "misty"};
constexpr std::array kNouns = {"house", "garden", "palace", "kitchen", "lodge", "inn",
                               "star",  "dragon", "lotus",  "bridge",  "manor", "court"};
constexpr std::array kStreets = {"mill", "regent", "trinity", "castle", "bridge", "market", "station", "church"};
constexpr std::array kLetters = {"a", "b", "d", "e", "f", "h", "j", "l", "n", "p", "q", "r", "s", "t", "u", "w"};

std::string digits(Rng& rng, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng.index(10)));
    return s;
}

std::string property_value(Rng& rng, const std::string& property, int entity_index) {
    if (property == "phone") return "01223 " + digits(rng, 6);
    if (property == "address") {
        return std::to_string(1 + rng.index(98)) + " " + kStreets[rng.index(kStreets.size())] + " street";
    }
    if (property == "postcode") {
        return "cb" + std::to_string(1 + rng.index(9)) + " " + digits(rng, 1) + kLetters[rng.index(kLetters.size())] +
               kLetters[rng.index(kLetters.size())];
    }
    return property + "-" + std::to_string(entity_index) + "-" + digits(rng, 3);
}

Database generate_database(const SynthesisSpec& spec, Rng& rng) {
    Database db;
    std::set<std::string> used;
    std::size_t name_cursor = rng.index(kAdjectives.size() * kNouns.size());
    for (const auto& d : spec.domains) {
        for (int i = 0; i < d.entities; ++i) {
            DatabaseEntry e;
            e.domain = d.name;
            e.entity_id = d.name + "-" + std::to_string(i);
            std::string name;
            do {
                const std::size_t k = name_cursor++ % (kAdjectives.size() * kNouns.size());
                name = std::string(kAdjectives[k % kAdjectives.size()]) + " " + kNouns[k / kAdjectives.size()];
                if (name_cursor > kAdjectives.size() * kNouns.size()) name += " " + std::to_string(name_cursor);
            } while (used.contains(name));
            used.insert(name);
            e.attributes["name"] = name;
            for (const auto& s : d.informable) e.attributes[s.slot] = s.values[rng.index(s.values.size())];
            for (const auto& p : d.requestable) {
                std::string v;
                do {
                    v = property_value(rng, p, i);
                } while (used.contains(v));
                used.insert(v);
                e.attributes[p] = v;
            }
            db.push_back(std::move(e));
        }
    }
    return db;
}

const DatabaseEntry* first_match(const Database& db, const std::string& domain,
                                 const std::map<std::string, std::string>& constraints) {
    for (const auto& e : db) {
        if (e.domain != domain) continue;
        bool ok = true;
        for (const auto& [k, v] : constraints) {
            if (e.attributes.at(k) != v) {
                ok = false;
                break;
            }
        }
        if (ok) return &e;
    }
    return nullptr;
}

class EpisodeBuilder {
public:
    EpisodeBuilder(const Database& db, Episode& episode) : db_(db), episode_(episode) {}

    void greeting() {
        add("hello .", "hello , how can i help you ?", std::nullopt);
    }

    void segment(const SyntheticDomainSpec& d, const SynthesisSpec& spec, Rng& rng, bool first) {
        // Goal constraints come from a real entity so the goal is satisfiable.
        std::vector<const DatabaseEntry*> entities;
        for (const auto& e : db_) {
            if (e.domain == d.name) entities.push_back(&e);
        }
        const DatabaseEntry& target = *entities[rng.index(entities.size())];
        std::vector<std::size_t> slot_order(d.informable.size());
        for (std::size_t i = 0; i < slot_order.size(); ++i) slot_order[i] = i;
        rng.shuffle(std::span(slot_order));
        const std::size_t n_constraints = std::min<std::size_t>(2, slot_order.size());
        std::vector<std::string> slots;
        for (std::size_t i = 0; i < n_constraints; ++i) slots.push_back(d.informable[slot_order[i]].slot);

        std::vector<std::string> requests = d.requestable;
        rng.shuffle(std::span(requests));
        const std::size_t n_requests = requests.empty() ? 0 : 1 + rng.index(std::min<std::size_t>(2, requests.size()));
        requests.resize(n_requests);

        DomainGoal goal;
        for (const auto& s : slots) goal.constraints[s] = target.attributes.at(s);
        goal.requests = requests;

        const std::string& s1 = slots[0];
        const std::string& v1 = goal.constraints[s1];
        belief_[{d.name, s1}] = v1;
        const std::string opener = first ? "i am looking for a " : "i also need a ";
        const std::string ask = opener + d.name + " with " + s1 + " " + v1 + " .";

        std::map<std::string, std::string> stated = {{s1, v1}};
        if (slots.size() == 1) {
            add(ask, offer(d.name, stated), d.name);
        } else {
            const std::string& s2 = slots[1];
            const std::string& v2 = goal.constraints[s2];
            add(ask, "what " + s2 + " would you like ?", d.name);

            std::optional<std::string> bad;
            if (rng.bernoulli(spec.no_result_fraction)) {
                const SlotValues& sv = *std::find_if(d.informable.begin(), d.informable.end(),
                                                     [&](const SlotValues& x) { return x.slot == s2; });
                for (const auto& candidate : sv.values) {
                    auto trial = stated;
                    trial[s2] = candidate;
                    if (candidate != v2 && query_db_count(trial, db_, d.name) == 0) {
                        bad = candidate;
                        break;
                    }
                }
            }
            if (bad) {
                belief_[{d.name, s2}] = *bad;
                add(s2 + " " + *bad + " please .", "sorry there is no " + d.name + " like that .", d.name);
                belief_[{d.name, s2}] = v2;
                stated[s2] = v2;
                add("how about " + v2 + " then ?", offer(d.name, stated), d.name);
            } else {
                belief_[{d.name, s2}] = v2;
                stated[s2] = v2;
                add(s2 + " " + v2 + " please .", offer(d.name, stated), d.name);
            }
        }

        if (!requests.empty()) {
            const DatabaseEntry& offered = *first_match(db_, d.name, stated);
            std::string ask_props = "can i get the " + requests[0];
            std::string answer = "the " + requests[0] + " is " + offered.attributes.at(requests[0]);
            for (std::size_t i = 1; i < requests.size(); ++i) {
                ask_props += " and the " + requests[i];
                answer += " and the " + requests[i] + " is " + offered.attributes.at(requests[i]);
            }
            add(ask_props + " ?", answer + " .", d.name);
        }
        episode_.goal[d.name] = std::move(goal);
        last_domain_ = d.name;
    }

    void goodbye() { add("thank you , goodbye .", "you are welcome . goodbye .", last_domain_); }

private:
    std::string offer(const std::string& domain, const std::map<std::string, std::string>& stated) const {
        const DatabaseEntry& e = *first_match(db_, domain, stated);
        std::string text = "i recommend " + e.attributes.at("name") + " . it has";
        bool first = true;
        for (const auto& [slot, value] : stated) {
            text += (first ? " " : " and ") + slot + " " + value;
            first = false;
        }
        return text + " .";
    }

    void add(const std::string& user, const std::string& response, const std::optional<std::string>& domain) {
        Turn t;
        t.user = tokenize(user);
        t.response = tokenize(response);
        t.domain = domain;
        t.belief = belief_;
        t.db_count = domain ? query_db_count(belief_, db_, *domain) : 0;
        episode_.turns.push_back(std::move(t));
    }

    const Database& db_;
    Episode& episode_;
    BeliefAnnotation belief_;
    std::optional<std::string> last_domain_;
};

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SynthesisSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    SyntheticCorpus corpus;
    std::vector<DomainOntology> onto;
    for (const auto& d : spec.domains) onto.push_back({d.name, d.informable, d.requestable});
    corpus.ontology = Ontology(std::move(onto));
    corpus.database = generate_database(spec, rng);

    int counter = 0;
    for (std::size_t k = 0; k < spec.domains.size(); ++k) {
        for (int n = 0; n < spec.episodes_per_domain; ++n) {
            Episode ep;
            char id[32];
            std::snprintf(id, sizeof id, "syn-%05d", counter++);
            ep.episode_id = id;
            EpisodeBuilder builder(corpus.database, ep);
            if (rng.bernoulli(spec.greeting_fraction)) builder.greeting();
            builder.segment(spec.domains[k], spec, rng, true);
            if (spec.domains.size() > 1 && rng.bernoulli(spec.multi_domain_fraction)) {
                std::size_t other = rng.index(spec.domains.size() - 1);
                if (other >= k) ++other;
                builder.segment(spec.domains[other], spec, rng, false);
            }
            builder.goodbye();
            corpus.episodes.push_back(std::move(ep));
        }
    }
    return corpus;
}

}  // namespace tsdial
