#pragma once

#include "tsdial/model.hpp"

#include <string>
#include <vector>

namespace tsdial {

/// Token a response uses to report an empty database result.
inline constexpr std::string_view kNoResultToken = "sorry";

/// Sentence BLEU-4: uniform weights, brevity penalty, add-one smoothing on
/// orders 2-4. Empty hypothesis scores 0.
double bleu4_sentence(std::span<const std::string> hypothesis, std::span<const std::string> reference);

/// Every constrained goal domain had its name placeholder offered (or, when
/// the database has no match, a name placeholder or the no-result token).
bool informed(const Episode& episode, std::span<const Tokens> generated, const Database& database);
/// Informed, and every requested `[domain_property]` was produced.
bool succeeded(const Episode& episode, std::span<const Tokens> generated, const Database& database);

struct EpisodeEval {
    std::string episode_id;
    bool informed = false;
    bool succeeded = false;
    std::vector<double> turn_bleu;
    std::vector<Tokens> responses;
};

struct EvalReport {
    std::string label;
    double bleu = 0.0;          // mean sentence BLEU-4 over all turns, in [0, 1]
    double inform_rate = 0.0;   // percent
    double success_rate = 0.0;  // percent
    std::vector<EpisodeEval> per_episode;

    nlohmann::ordered_json to_json() const;
    /// Aligned table with the BLEU / Inform(%) / Success(%) columns.
    std::string to_text() const;
};

/// Scores pre-generated responses, aligned episode by episode, turn by turn.
EvalReport score_responses(std::span<const Episode> episodes, std::span<const std::vector<Tokens>> generated,
                           const Database& database);

/// Greedy responses of the student for every turn, conditioned on the gold
/// user history of the episode.
std::vector<Tokens> generate_episode(const StudentModel& model, const Episode& episode, const Vocabulary& vocabulary);
/// Teacher responses from gold (manual) belief states and DB counts.
std::vector<Tokens> generate_episode(const TeacherModel& model, const Episode& episode, const Vocabulary& vocabulary,
                                     const Ontology& ontology);

EvalReport evaluate_corpus(const StudentModel& model, std::span<const Episode> episodes, const Database& database,
                           const Vocabulary& vocabulary);
EvalReport evaluate_corpus(const TeacherModel& model, std::span<const Episode> episodes, const Database& database,
                           const Ontology& ontology, const Vocabulary& vocabulary);

}  // namespace tsdial
