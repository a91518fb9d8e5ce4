#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tsdial {

using Tokens = std::vector<std::string>;
using TokenId = int;

/// Error raised for malformed corpus, ontology, or database input.
class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lower-cases and splits on whitespace; `, . ? ! ; :` become separate tokens
/// except inside `[placeholder]` tokens.
Tokens tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

// ---- ontology and database ---------------------------------------------------

struct SlotValues {
    std::string slot;
    std::vector<std::string> values;
};

struct DomainOntology {
    std::string name;
    std::vector<SlotValues> informable;  // file order
    std::vector<std::string> requestable;

    const SlotValues* find_slot(std::string_view slot) const;
};

/// Slot/value universe. Domain and slot order follow the ontology file and
/// define the belief-state vector layout.
class Ontology {
public:
    Ontology() = default;
    explicit Ontology(std::vector<DomainOntology> domains);

    const std::vector<DomainOntology>& domains() const { return domains_; }
    const DomainOntology* find(std::string_view domain) const;
    bool has_domain(std::string_view domain) const { return find(domain) != nullptr; }
    std::vector<std::string> domain_names() const;

    /// Index of `value` within its slot's value list, or -1.
    int value_index(std::string_view domain, std::string_view slot, std::string_view value) const;

    nlohmann::ordered_json to_json() const;
    static Ontology from_json(const nlohmann::ordered_json& j);

private:
    std::vector<DomainOntology> domains_;
};

struct DatabaseEntry {
    std::string domain;
    std::string entity_id;
    std::map<std::string, std::string> attributes;
};

using Database = std::vector<DatabaseEntry>;

// ---- dialogue data -------------------------------------------------------

using SlotKey = std::pair<std::string, std::string>;  // (domain, slot)
using BeliefAnnotation = std::map<SlotKey, std::string>;

struct Turn {
    Tokens user;
    Tokens response;
    std::optional<std::string> domain;  // nullopt == NONE
    BeliefAnnotation belief;            // cumulative
    int db_count = 0;
};

struct DomainGoal {
    std::map<std::string, std::string> constraints;
    std::vector<std::string> requests;
};

struct Episode {
    std::string episode_id;
    std::map<std::string, DomainGoal> goal;
    std::vector<Turn> turns;
};

// ---- file formats ----------------------------------------------------------

Ontology load_ontology(const std::filesystem::path& path);
Database load_database(const std::filesystem::path& path, const Ontology& ontology);
/// Parses and validates a corpus file. Belief values are checked against the
/// ontology; when `database` is given, labeled db_counts are checked too.
std::vector<Episode> load_corpus(const std::filesystem::path& path, const Ontology& ontology,
                                 const Database* database = nullptr);
std::vector<Episode> parse_corpus(std::string_view text, const Ontology& ontology,
                                  const Database* database = nullptr);

nlohmann::ordered_json episode_to_json(const Episode& episode);
nlohmann::ordered_json corpus_to_json(std::span<const Episode> episodes);
nlohmann::ordered_json database_to_json(const Database& database);
Database database_from_json(const nlohmann::ordered_json& j, const Ontology& ontology);

/// Throws CorpusError naming the episode and field on the first violation.
void validate_episode(const Episode& episode, const Ontology& ontology, const Database* database = nullptr);

// ---- preprocessing ---------------------------------------------------------

/// Placeholder token `[domain_property]`.
std::string placeholder(std::string_view domain, std::string_view property);
/// Splits `[domain_property]` into its parts; nullopt for ordinary tokens.
std::optional<std::pair<std::string, std::string>> parse_placeholder(std::string_view token);

/// Replaces database entity names and property values in system responses
/// with placeholders, longest match first. Idempotent.
Episode delexicalize(const Episode& episode, const Ontology& ontology, const Database& database);

struct TaggingDiagnostics {
    /// (episode_id, turn index) of turns that mention more than one domain.
    std::vector<std::pair<std::string, int>> multi_domain_turns;
};

/// Assigns each turn's domain from placeholders, then belief deltas, then the
/// previous turn's domain.
Episode tag_turn_domains(const Episode& episode, const Ontology& ontology,
                         TaggingDiagnostics* diagnostics = nullptr);

/// Cuts every episode into runs of consecutive same-domain turns. NONE turns
/// are dropped. Each run keeps the goal entry for its own domain only.
std::map<std::string, std::vector<Episode>> split_by_domain(std::span<const Episode> episodes);

// ---- vocabulary ----------------------------------------------------------

class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kBos = 2;
    static constexpr TokenId kEos = 3;
    static constexpr int kReserved = 4;
    static constexpr int kDefaultMaxSize = 400;

    Vocabulary();
    /// Reserved tokens are implied; `tokens` lists ids 4.. in order.
    explicit Vocabulary(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const;
    bool contains(std::string_view token) const;

    std::vector<TokenId> encode(std::span<const std::string> tokens) const;
    /// Drops PAD/BOS/EOS.
    Tokens decode(std::span<const TokenId> ids) const;

    /// Non-reserved tokens in id order.
    std::vector<std::string> entries() const;
    nlohmann::ordered_json to_json() const;
    static Vocabulary from_json(const nlohmann::ordered_json& j);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Keeps the max_size - 4 most frequent user/response tokens; ties broken
/// lexicographically.
Vocabulary build_vocabulary(std::span<const Episode> episodes, int max_size = Vocabulary::kDefaultMaxSize);

// ---- state encodings ---------------------------------------------------------

/// Concatenated per-slot one-hot blocks; index 0 of a block is "not mentioned".
struct BeliefState {
    Eigen::VectorXd values;
};

/// Encoding scope: one domain (teacher input) or every domain.
struct BeliefScope {
    std::optional<std::string> domain;  // nullopt == ALL

    static BeliefScope all() { return {}; }
    static BeliefScope only(std::string d) { return {std::move(d)}; }
    bool includes(std::string_view d) const { return !domain || *domain == d; }
};

int belief_state_size(const Ontology& ontology, const BeliefScope& scope);
BeliefState encode_belief_state(const BeliefAnnotation& annotation, const Ontology& ontology,
                                 const BeliefScope& scope);

/// Six buckets: counts 0, 1, 2, 3, 4, and more than 4.
struct DbPointer {
    static constexpr int kBuckets = 6;
    Eigen::VectorXd values;

    int bucket() const;
};

DbPointer encode_db_pointer(int count);

/// Entries of `domain` satisfying every annotated constraint of that domain.
int query_db_count(const BeliefAnnotation& annotation, const Database& database, std::string_view domain);
/// Same, for a plain slot -> value constraint map.
int query_db_count(const std::map<std::string, std::string>& constraints, const Database& database,
                   std::string_view domain);

}  // namespace tsdial
