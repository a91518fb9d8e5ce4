#include "tsdial/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace tsdial {

using nlohmann::ordered_json;

namespace {

bool is_split_punct(char c) {
    return c == ',' || c == '.' || c == '?' || c == '!' || c == ';' || c == ':';
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Attaches line/column context to a JSON syntax error.
[[noreturn]] void throw_parse_error(std::string_view what_file, std::string_view text,
                                    const nlohmann::json::parse_error& e) {
    const std::size_t byte = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
    std::size_t line = 1, line_start = 0;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            line_start = i + 1;
        }
    }
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    std::ostringstream msg;
    msg << what_file << ": JSON parse error at line " << line << ", column " << (byte - line_start + 1)
        << ": " << e.what() << "\n  " << text.substr(line_start, std::min<std::size_t>(line_end - line_start, 160));
    throw CorpusError(msg.str());
}

ordered_json parse_json(std::string_view what_file, std::string_view text) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw_parse_error(what_file, text, e);
    }
}

std::string episode_context(const std::string& episode_id, std::string_view field) {
    return "episode '" + episode_id + "': " + std::string(field);
}

}  // namespace

// ---- text -----------------------------------------------------------------

Tokens tokenize(std::string_view text) {
    Tokens tokens;
    std::string current;
    bool in_placeholder = false;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (char raw : text) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (in_placeholder) {
            current.push_back(c);
            if (c == ']') {
                in_placeholder = false;
                flush();
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (c == '[') {
            flush();
            in_placeholder = true;
            current.push_back(c);
        } else if (is_split_punct(c)) {
            flush();
            tokens.emplace_back(1, c);
        } else {
            current.push_back(c);
        }
    }
    flush();
    return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

// ---- ontology ---------------------------------------------------------------

const SlotValues* DomainOntology::find_slot(std::string_view slot) const {
    for (const auto& s : informable) {
        if (s.slot == slot) return &s;
    }
    return nullptr;
}

Ontology::Ontology(std::vector<DomainOntology> domains) : domains_(std::move(domains)) {
    std::set<std::string> names;
    for (const auto& d : domains_) {
        if (d.name.empty()) throw CorpusError("ontology: empty domain name");
        if (d.name.find('-') != std::string::npos) {
            throw CorpusError("ontology: domain name '" + d.name + "' must not contain '-'");
        }
        if (!names.insert(d.name).second) throw CorpusError("ontology: duplicate domain '" + d.name + "'");
        std::set<std::string> slots;
        for (const auto& s : d.informable) {
            if (!slots.insert(s.slot).second) {
                throw CorpusError("ontology: duplicate slot '" + d.name + "-" + s.slot + "'");
            }
            if (s.values.empty()) throw CorpusError("ontology: slot '" + d.name + "-" + s.slot + "' has no values");
            std::set<std::string> seen(s.values.begin(), s.values.end());
            if (seen.size() != s.values.size()) {
                throw CorpusError("ontology: slot '" + d.name + "-" + s.slot + "' has duplicate values");
            }
        }
    }
}

const DomainOntology* Ontology::find(std::string_view domain) const {
    for (const auto& d : domains_) {
        if (d.name == domain) return &d;
    }
    return nullptr;
}

std::vector<std::string> Ontology::domain_names() const {
    std::vector<std::string> out;
    for (const auto& d : domains_) out.push_back(d.name);
    return out;
}

int Ontology::value_index(std::string_view domain, std::string_view slot, std::string_view value) const {
    const DomainOntology* d = find(domain);
    if (!d) return -1;
    const SlotValues* s = d->find_slot(slot);
    if (!s) return -1;
    auto it = std::find(s->values.begin(), s->values.end(), value);
    return it == s->values.end() ? -1 : static_cast<int>(it - s->values.begin());
}

ordered_json Ontology::to_json() const {
    ordered_json j = ordered_json::object();
    for (const auto& d : domains_) {
        ordered_json inf = ordered_json::object();
        for (const auto& s : d.informable) inf[s.slot] = s.values;
        j[d.name] = {{"informable", inf}, {"requestable", d.requestable}};
    }
    return j;
}

Ontology Ontology::from_json(const ordered_json& j) {
    if (!j.is_object()) throw CorpusError("ontology: expected a JSON object of domains");
    std::vector<DomainOntology> domains;
    try {
        for (const auto& [name, body] : j.items()) {
            DomainOntology d;
            d.name = name;
            for (const auto& [slot, values] : body.at("informable").items()) {
                d.informable.push_back({slot, values.get<std::vector<std::string>>()});
            }
            if (body.contains("requestable")) d.requestable = body.at("requestable").get<std::vector<std::string>>();
            domains.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(std::string("ontology: ") + e.what());
    }
    return Ontology(std::move(domains));
}

Ontology load_ontology(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    return Ontology::from_json(parse_json(path.string(), text));
}

// ---- database ---------------------------------------------------------------

ordered_json database_to_json(const Database& database) {
    ordered_json arr = ordered_json::array();
    for (const auto& e : database) {
        ordered_json attrs = ordered_json::object();
        for (const auto& [k, v] : e.attributes) attrs[k] = v;
        arr.push_back({{"domain", e.domain}, {"entity_id", e.entity_id}, {"attributes", attrs}});
    }
    return arr;
}

Database database_from_json(const ordered_json& j, const Ontology& ontology) {
    if (!j.is_array()) throw CorpusError("database: expected a JSON array");
    Database db;
    std::set<std::string> ids;
    try {
        for (const auto& item : j) {
            DatabaseEntry e;
            e.domain = item.at("domain").get<std::string>();
            e.entity_id = item.at("entity_id").get<std::string>();
            for (const auto& [k, v] : item.at("attributes").items()) e.attributes[k] = v.get<std::string>();
            const DomainOntology* d = ontology.find(e.domain);
            if (!d) throw CorpusError("database entity '" + e.entity_id + "': unknown domain '" + e.domain + "'");
            for (const auto& s : d->informable) {
                if (!e.attributes.contains(s.slot)) {
                    throw CorpusError("database entity '" + e.entity_id + "': missing informable slot '" + s.slot +
                                      "'");
                }
            }
            if (!ids.insert(e.entity_id).second) {
                throw CorpusError("database: duplicate entity_id '" + e.entity_id + "'");
            }
            db.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(std::string("database: ") + e.what());
    }
    return db;
}

Database load_database(const std::filesystem::path& path, const Ontology& ontology) {
    const std::string text = read_file(path);
    return database_from_json(parse_json(path.string(), text), ontology);
}

int query_db_count(const std::map<std::string, std::string>& constraints, const Database& database,
                   std::string_view domain) {
    int count = 0;
    for (const auto& e : database) {
        if (e.domain != domain) continue;
        bool ok = true;
        for (const auto& [slot, value] : constraints) {
            auto it = e.attributes.find(slot);
            if (it == e.attributes.end() || it->second != value) {
                ok = false;
                break;
            }
        }
        if (ok) ++count;
    }
    return count;
}

int query_db_count(const BeliefAnnotation& annotation, const Database& database, std::string_view domain) {
    std::map<std::string, std::string> constraints;
    for (const auto& [key, value] : annotation) {
        if (key.first == domain) constraints[key.second] = value;
    }
    return query_db_count(constraints, database, domain);
}

// ---- corpus -----------------------------------------------------------------

void validate_episode(const Episode& episode, const Ontology& ontology, const Database* database) {
    const std::string& id = episode.episode_id;
    if (id.empty()) throw CorpusError("episode with empty episode_id");
    if (episode.turns.empty()) throw CorpusError(episode_context(id, "turns: at least one turn required"));
    for (const auto& [domain, goal] : episode.goal) {
        const DomainOntology* d = ontology.find(domain);
        if (!d) throw CorpusError(episode_context(id, "goal: unknown domain '" + domain + "'"));
        for (const auto& [slot, value] : goal.constraints) {
            if (ontology.value_index(domain, slot, value) < 0) {
                throw CorpusError(episode_context(id, "goal." + domain + ".constraints: illegal value '" + value +
                                                          "' for slot '" + slot + "'"));
            }
        }
        for (const auto& p : goal.requests) {
            if (std::find(d->requestable.begin(), d->requestable.end(), p) == d->requestable.end()) {
                throw CorpusError(episode_context(id, "goal." + domain + ".requests: unknown property '" + p + "'"));
            }
        }
    }
    for (std::size_t t = 0; t < episode.turns.size(); ++t) {
        const Turn& turn = episode.turns[t];
        const std::string where = "turns[" + std::to_string(t) + "]";
        if (turn.user.empty()) throw CorpusError(episode_context(id, where + ".user: empty after tokenization"));
        if (turn.response.empty()) {
            throw CorpusError(episode_context(id, where + ".response: empty after tokenization"));
        }
        if (turn.db_count < 0) throw CorpusError(episode_context(id, where + ".db_count: negative"));
        if (turn.domain && !ontology.has_domain(*turn.domain)) {
            throw CorpusError(episode_context(id, where + ".domain: unknown domain '" + *turn.domain + "'"));
        }
        for (const auto& [key, value] : turn.belief) {
            const std::string slot = key.first + "-" + key.second;
            if (ontology.value_index(key.first, key.second, value) < 0) {
                const DomainOntology* d = ontology.find(key.first);
                const bool known_slot = d && d->find_slot(key.second);
                throw CorpusError(episode_context(
                    id, where + ".belief: " +
                            (known_slot ? "value '" + value + "' not in ontology for slot '" + slot + "'"
                                        : "unknown slot '" + slot + "'")));
            }
        }
        if (database && turn.domain) {
            const int expected = query_db_count(turn.belief, *database, *turn.domain);
            if (expected != turn.db_count) {
                throw CorpusError(episode_context(id, where + ".db_count: labeled " + std::to_string(turn.db_count) +
                                                          " but database query gives " + std::to_string(expected)));
            }
        }
    }
}

ordered_json episode_to_json(const Episode& episode) {
    ordered_json goal = ordered_json::object();
    for (const auto& [domain, g] : episode.goal) {
        ordered_json constraints = ordered_json::object();
        for (const auto& [k, v] : g.constraints) constraints[k] = v;
        goal[domain] = {{"constraints", constraints}, {"requests", g.requests}};
    }
    ordered_json turns = ordered_json::array();
    for (const auto& t : episode.turns) {
        ordered_json belief = ordered_json::object();
        for (const auto& [key, value] : t.belief) belief[key.first + "-" + key.second] = value;
        ordered_json jt;
        jt["user"] = join_tokens(t.user);
        jt["response"] = join_tokens(t.response);
        jt["domain"] = t.domain ? ordered_json(*t.domain) : ordered_json(nullptr);
        jt["belief"] = belief;
        jt["db_count"] = t.db_count;
        turns.push_back(std::move(jt));
    }
    ordered_json j;
    j["episode_id"] = episode.episode_id;
    j["goal"] = goal;
    j["turns"] = turns;
    return j;
}

ordered_json corpus_to_json(std::span<const Episode> episodes) {
    ordered_json arr = ordered_json::array();
    for (const auto& e : episodes) arr.push_back(episode_to_json(e));
    return arr;
}

namespace {

Episode episode_from_json(const ordered_json& j, std::size_t index) {
    Episode ep;
    ep.episode_id = j.contains("episode_id") ? j.at("episode_id").get<std::string>() : "";
    const std::string id = ep.episode_id.empty() ? "#" + std::to_string(index) : ep.episode_id;
    try {
        if (j.contains("goal")) {
            for (const auto& [domain, body] : j.at("goal").items()) {
                DomainGoal g;
                if (body.contains("constraints")) {
                    for (const auto& [k, v] : body.at("constraints").items()) g.constraints[k] = v.get<std::string>();
                }
                if (body.contains("requests")) g.requests = body.at("requests").get<std::vector<std::string>>();
                ep.goal[domain] = std::move(g);
            }
        }
        for (const auto& jt : j.at("turns")) {
            Turn t;
            t.user = tokenize(jt.at("user").get<std::string>());
            t.response = tokenize(jt.at("response").get<std::string>());
            if (jt.contains("domain") && !jt.at("domain").is_null()) t.domain = jt.at("domain").get<std::string>();
            if (jt.contains("belief")) {
                for (const auto& [key, value] : jt.at("belief").items()) {
                    const auto dash = key.find('-');
                    if (dash == std::string::npos || dash == 0 || dash + 1 == key.size()) {
                        throw CorpusError(episode_context(id, "belief key '" + key + "' is not 'domain-slot'"));
                    }
                    t.belief[{key.substr(0, dash), key.substr(dash + 1)}] = value.get<std::string>();
                }
            }
            t.db_count = jt.value("db_count", 0);
            ep.turns.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(episode_context(id, e.what()));
    }
    return ep;
}

}  // namespace

std::vector<Episode> parse_corpus(std::string_view text, const Ontology& ontology, const Database* database) {
    const ordered_json j = parse_json("corpus", text);
    if (!j.is_array()) throw CorpusError("corpus: expected a JSON array of episodes");
    std::vector<Episode> episodes;
    episodes.reserve(j.size());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j.size(); ++i) {
        Episode ep = episode_from_json(j[i], i);
        validate_episode(ep, ontology, database);
        if (!ids.insert(ep.episode_id).second) {
            throw CorpusError("corpus: duplicate episode_id '" + ep.episode_id + "'");
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

std::vector<Episode> load_corpus(const std::filesystem::path& path, const Ontology& ontology,
                                 const Database* database) {
    const std::string text = read_file(path);
    try {
        return parse_corpus(text, ontology, database);
    } catch (const CorpusError& e) {
        throw CorpusError(path.string() + ": " + e.what());
    }
}

// ---- delexicalization ---------------------------------------------------------

std::string placeholder(std::string_view domain, std::string_view property) {
    std::string out = "[";
    out += domain;
    out += '_';
    out += property;
    out += ']';
    return out;
}

std::optional<std::pair<std::string, std::string>> parse_placeholder(std::string_view token) {
    if (token.size() < 4 || token.front() != '[' || token.back() != ']') return std::nullopt;
    const std::string_view inner = token.substr(1, token.size() - 2);
    const auto us = inner.find('_');
    if (us == std::string_view::npos || us == 0 || us + 1 == inner.size()) return std::nullopt;
    return std::make_pair(std::string(inner.substr(0, us)), std::string(inner.substr(us + 1)));
}

namespace {

struct LexicalValue {
    Tokens tokens;
    std::string domain;
    std::string property;
};

// Ordered by (length desc, domain, property) so the first match at a
// position is the longest.
std::vector<LexicalValue> collect_values(const Database& database) {
    std::set<std::tuple<Tokens, std::string, std::string>> seen;
    std::vector<LexicalValue> values;
    for (const auto& e : database) {
        for (const auto& [prop, value] : e.attributes) {
            Tokens toks = tokenize(value);
            if (toks.empty()) continue;
            const bool has_placeholder =
                std::any_of(toks.begin(), toks.end(), [](const std::string& t) { return parse_placeholder(t).has_value(); });
            if (has_placeholder) continue;
            if (seen.emplace(toks, e.domain, prop).second) values.push_back({std::move(toks), e.domain, prop});
        }
    }
    std::stable_sort(values.begin(), values.end(), [](const LexicalValue& a, const LexicalValue& b) {
        if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
        return std::tie(a.domain, a.property) < std::tie(b.domain, b.property);
    });
    return values;
}

std::vector<std::string> belief_delta_domains(const BeliefAnnotation& prev, const BeliefAnnotation& cur,
                                              const Ontology& ontology) {
    std::set<std::string> changed;
    for (const auto& [key, value] : cur) {
        auto it = prev.find(key);
        if (it == prev.end() || it->second != value) changed.insert(key.first);
    }
    std::vector<std::string> ordered;
    for (const auto& d : ontology.domains()) {
        if (changed.contains(d.name)) ordered.push_back(d.name);
    }
    return ordered;
}

}  // namespace

Episode delexicalize(const Episode& episode, const Ontology& ontology, const Database& database) {
    const std::vector<LexicalValue> values = collect_values(database);
    Episode out = episode;
    const BeliefAnnotation empty;
    for (std::size_t t = 0; t < out.turns.size(); ++t) {
        Turn& turn = out.turns[t];
        // Domain preference for ambiguous values: labeled domain, then domains
        // whose belief changed this turn, then any believed domain, then file order.
        std::vector<std::string> priority;
        auto prefer = [&](const std::string& d) {
            if (std::find(priority.begin(), priority.end(), d) == priority.end()) priority.push_back(d);
        };
        if (turn.domain) prefer(*turn.domain);
        for (const auto& d : belief_delta_domains(t ? out.turns[t - 1].belief : empty, turn.belief, ontology)) prefer(d);
        for (const auto& d : ontology.domains()) {
            for (const auto& [key, value] : turn.belief) {
                if (key.first == d.name) {
                    prefer(d.name);
                    break;
                }
            }
        }
        for (const auto& d : ontology.domains()) prefer(d.name);
        auto rank = [&](const std::string& d) {
            auto it = std::find(priority.begin(), priority.end(), d);
            return it == priority.end() ? priority.size() : static_cast<std::size_t>(it - priority.begin());
        };

        Tokens result;
        const Tokens& src = turn.response;
        std::size_t i = 0;
        while (i < src.size()) {
            const LexicalValue* best = nullptr;
            for (const auto& v : values) {
                if (best && v.tokens.size() < best->tokens.size()) break;
                if (i + v.tokens.size() > src.size()) continue;
                if (!std::equal(v.tokens.begin(), v.tokens.end(), src.begin() + static_cast<std::ptrdiff_t>(i))) continue;
                if (!best || rank(v.domain) < rank(best->domain)) best = &v;
            }
            if (best) {
                result.push_back(placeholder(best->domain, best->property));
                i += best->tokens.size();
            } else {
                result.push_back(src[i]);
                ++i;
            }
        }
        turn.response = std::move(result);
    }
    return out;
}

// ---- domain tagging and splitting ----------------------------------------------

Episode tag_turn_domains(const Episode& episode, const Ontology& ontology, TaggingDiagnostics* diagnostics) {
    Episode out = episode;
    std::optional<std::string> previous;
    const BeliefAnnotation empty;
    for (std::size_t t = 0; t < out.turns.size(); ++t) {
        Turn& turn = out.turns[t];
        std::vector<std::string> mentioned;
        for (const Tokens* toks : {&turn.user, &turn.response}) {
            for (const auto& tok : *toks) {
                if (auto ph = parse_placeholder(tok); ph && ontology.has_domain(ph->first) &&
                                                       std::find(mentioned.begin(), mentioned.end(), ph->first) ==
                                                           mentioned.end()) {
                    mentioned.push_back(ph->first);
                }
            }
        }
        std::optional<std::string> tag;
        if (!mentioned.empty()) {
            tag = mentioned.front();
            if (mentioned.size() > 1 && diagnostics) {
                diagnostics->multi_domain_turns.emplace_back(out.episode_id, static_cast<int>(t));
            }
        } else {
            const auto delta = belief_delta_domains(t ? out.turns[t - 1].belief : empty, turn.belief, ontology);
            if (!delta.empty()) {
                tag = delta.front();
                if (delta.size() > 1 && diagnostics) {
                    diagnostics->multi_domain_turns.emplace_back(out.episode_id, static_cast<int>(t));
                }
            } else {
                tag = previous;
            }
        }
        turn.domain = tag;
        previous = tag;
    }
    return out;
}

std::map<std::string, std::vector<Episode>> split_by_domain(std::span<const Episode> episodes) {
    std::map<std::string, std::vector<Episode>> buckets;
    for (const Episode& ep : episodes) {
        std::map<std::string, int> run_counter;
        std::size_t t = 0;
        while (t < ep.turns.size()) {
            const auto& tag = ep.turns[t].domain;
            if (!tag) {
                ++t;
                continue;
            }
            std::size_t end = t;
            while (end < ep.turns.size() && ep.turns[end].domain == tag) ++end;
            Episode piece;
            piece.episode_id = ep.episode_id + "/" + *tag + "/" + std::to_string(run_counter[*tag]++);
            if (auto it = ep.goal.find(*tag); it != ep.goal.end()) piece.goal[*tag] = it->second;
            piece.turns.assign(ep.turns.begin() + static_cast<std::ptrdiff_t>(t),
                               ep.turns.begin() + static_cast<std::ptrdiff_t>(end));
            buckets[*tag].push_back(std::move(piece));
            t = end;
        }
    }
    return buckets;
}

// ---- vocabulary -----------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
    id_to_token_ = {"<pad>", "<unk>", "<s>", "</s>"};
    for (auto& t : tokens) id_to_token_.push_back(std::move(t));
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
            throw CorpusError("vocabulary: duplicate token '" + id_to_token_[i] + "'");
        }
    }
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

Tokens Vocabulary::decode(std::span<const TokenId> ids) const {
    Tokens out;
    for (TokenId i : ids) {
        if (i == kPad || i == kBos || i == kEos) continue;
        out.push_back(token(i));
    }
    return out;
}

std::vector<std::string> Vocabulary::entries() const {
    return {id_to_token_.begin() + kReserved, id_to_token_.end()};
}

ordered_json Vocabulary::to_json() const { return entries(); }

Vocabulary Vocabulary::from_json(const ordered_json& j) { return Vocabulary(j.get<std::vector<std::string>>()); }

Vocabulary build_vocabulary(std::span<const Episode> episodes, int max_size) {
    if (max_size < 5) throw std::invalid_argument("build_vocabulary: max_size must be at least 5");
    std::map<std::string, long> counts;
    const std::set<std::string> reserved = {"<pad>", "<unk>", "<s>", "</s>"};
    for (const auto& ep : episodes) {
        for (const auto& t : ep.turns) {
            for (const Tokens* toks : {&t.user, &t.response}) {
                for (const auto& tok : *toks) {
                    if (!reserved.contains(tok)) ++counts[tok];
                }
            }
        }
    }
    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(max_size - Vocabulary::kReserved));
    std::vector<std::string> tokens;
    tokens.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
    return Vocabulary(std::move(tokens));
}

// ---- state encodings ----------------------------------------------------------------

int belief_state_size(const Ontology& ontology, const BeliefScope& scope) {
    int n = 0;
    for (const auto& d : ontology.domains()) {
        if (!scope.includes(d.name)) continue;
        for (const auto& s : d.informable) n += static_cast<int>(s.values.size()) + 1;
    }
    return n;
}

BeliefState encode_belief_state(const BeliefAnnotation& annotation, const Ontology& ontology,
                                 const BeliefScope& scope) {
    for (const auto& [key, value] : annotation) {
        const DomainOntology* d = ontology.find(key.first);
        if (!d || !d->find_slot(key.second)) {
            throw CorpusError("belief state: unknown slot '" + key.first + "-" + key.second + "'");
        }
        if (ontology.value_index(key.first, key.second, value) < 0) {
            throw CorpusError("belief state: illegal value '" + value + "' for slot '" + key.first + "-" + key.second +
                              "'");
        }
    }
    BeliefState state;
    state.values = Eigen::VectorXd::Zero(belief_state_size(ontology, scope));
    Eigen::Index offset = 0;
    for (const auto& d : ontology.domains()) {
        if (!scope.includes(d.name)) continue;
        for (const auto& s : d.informable) {
            int index = 0;
            if (auto it = annotation.find({d.name, s.slot}); it != annotation.end()) {
                index = ontology.value_index(d.name, s.slot, it->second) + 1;
            }
            state.values(offset + index) = 1.0;
            offset += static_cast<Eigen::Index>(s.values.size()) + 1;
        }
    }
    return state;
}

int DbPointer::bucket() const {
    Eigen::Index idx = 0;
    values.maxCoeff(&idx);
    return static_cast<int>(idx);
}

DbPointer encode_db_pointer(int count) {
    if (count < 0) throw std::invalid_argument("encode_db_pointer: negative count");
    DbPointer p;
    p.values = Eigen::VectorXd::Zero(DbPointer::kBuckets);
    p.values(std::min(count, DbPointer::kBuckets - 1)) = 1.0;
    return p;
}

}  // namespace tsdial
