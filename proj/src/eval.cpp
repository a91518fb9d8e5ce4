#include "tsdial/eval.hpp"

#include "tsdial/train.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tsdial {

using nlohmann::ordered_json;

double bleu4_sentence(std::span<const std::string> hypothesis, std::span<const std::string> reference) {
    if (reference.empty()) throw std::invalid_argument("bleu4_sentence: empty reference");
    if (hypothesis.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::vector<std::string>, int> ref_counts;
        for (std::size_t i = 0; i + n <= reference.size(); ++i) {
            ++ref_counts[{reference.begin() + static_cast<std::ptrdiff_t>(i),
                          reference.begin() + static_cast<std::ptrdiff_t>(i + n)}];
        }
        std::map<std::vector<std::string>, int> hyp_counts;
        int total = 0;
        for (std::size_t i = 0; i + n <= hypothesis.size(); ++i) {
            ++hyp_counts[{hypothesis.begin() + static_cast<std::ptrdiff_t>(i),
                          hypothesis.begin() + static_cast<std::ptrdiff_t>(i + n)}];
            ++total;
        }
        int matched = 0;
        for (const auto& [gram, count] : hyp_counts) {
            if (auto it = ref_counts.find(gram); it != ref_counts.end()) matched += std::min(count, it->second);
        }
        double precision;
        if (n == 1) {
            if (matched == 0) return 0.0;
            precision = static_cast<double>(matched) / total;
        } else {
            precision = (matched + 1.0) / (total + 1.0);
        }
        log_sum += 0.25 * std::log(precision);
    }
    const double c = static_cast<double>(hypothesis.size());
    const double r = static_cast<double>(reference.size());
    const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
    return brevity * std::exp(log_sum);
}

namespace {

std::set<std::string> token_set(std::span<const Tokens> generated) {
    std::set<std::string> out;
    for (const auto& response : generated) out.insert(response.begin(), response.end());
    return out;
}

}  // namespace

bool informed(const Episode& episode, std::span<const Tokens> generated, const Database& database) {
    if (generated.size() != episode.turns.size()) {
        throw std::invalid_argument("informed: " + std::to_string(generated.size()) + " responses for " +
                                    std::to_string(episode.turns.size()) + " turns in episode '" +
                                    episode.episode_id + "'");
    }
    const std::set<std::string> said = token_set(generated);
    for (const auto& [domain, goal] : episode.goal) {
        if (goal.constraints.empty()) continue;
        const bool offered = said.contains(placeholder(domain, "name"));
        if (query_db_count(goal.constraints, database, domain) > 0) {
            if (!offered) return false;
        } else if (!offered && !said.contains(std::string(kNoResultToken))) {
            return false;
        }
    }
    return true;
}

bool succeeded(const Episode& episode, std::span<const Tokens> generated, const Database& database) {
    if (!informed(episode, generated, database)) return false;
    const std::set<std::string> said = token_set(generated);
    for (const auto& [domain, goal] : episode.goal) {
        for (const auto& property : goal.requests) {
            if (!said.contains(placeholder(domain, property))) return false;
        }
    }
    return true;
}

ordered_json EvalReport::to_json() const {
    ordered_json episodes = ordered_json::array();
    for (const auto& e : per_episode) {
        ordered_json responses = ordered_json::array();
        for (const auto& r : e.responses) responses.push_back(join_tokens(r));
        episodes.push_back({{"episode_id", e.episode_id},
                            {"informed", e.informed},
                            {"succeeded", e.succeeded},
                            {"turn_bleu", e.turn_bleu},
                            {"responses", responses}});
    }
    ordered_json j;
    if (!label.empty()) j["label"] = label;
    j["bleu"] = bleu;
    j["inform"] = inform_rate;
    j["success"] = success_rate;
    j["episodes"] = per_episode.size();
    j["bleu_smoothing"] = "add-one on n-gram orders 2-4";
    j["per_episode"] = episodes;
    return j;
}

std::string EvalReport::to_text() const {
    char line[160];
    std::ostringstream out;
    std::snprintf(line, sizeof line, "%-24s %8s %11s %12s\n", "model", "BLEU", "Inform(%)", "Success(%)");
    out << line;
    std::snprintf(line, sizeof line, "%-24s %8.3f %11.1f %12.1f\n", label.empty() ? "-" : label.c_str(), bleu,
                  inform_rate, success_rate);
    out << line;
    return out.str();
}

EvalReport score_responses(std::span<const Episode> episodes, std::span<const std::vector<Tokens>> generated,
                           const Database& database) {
    if (episodes.size() != generated.size()) throw std::invalid_argument("score_responses: episode count mismatch");
    EvalReport report;
    double bleu_sum = 0.0;
    long turns = 0;
    int n_informed = 0, n_succeeded = 0;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const Episode& ep = episodes[e];
        EpisodeEval row;
        row.episode_id = ep.episode_id;
        row.informed = informed(ep, generated[e], database);
        row.succeeded = row.informed && succeeded(ep, generated[e], database);
        for (std::size_t t = 0; t < ep.turns.size(); ++t) {
            const double b = bleu4_sentence(generated[e][t], ep.turns[t].response);
            row.turn_bleu.push_back(b);
            bleu_sum += b;
            ++turns;
        }
        row.responses = generated[e];
        n_informed += row.informed;
        n_succeeded += row.succeeded;
        report.per_episode.push_back(std::move(row));
    }
    if (turns > 0) report.bleu = bleu_sum / static_cast<double>(turns);
    if (!episodes.empty()) {
        report.inform_rate = 100.0 * n_informed / static_cast<double>(episodes.size());
        report.success_rate = 100.0 * n_succeeded / static_cast<double>(episodes.size());
    }
    return report;
}

std::vector<Tokens> generate_episode(const StudentModel& model, const Episode& episode, const Vocabulary& vocabulary) {
    const EncodedEpisode enc = encode_episode(episode, vocabulary, model.config());
    ad::Tape tape;
    const StudentGraph graph(tape, model);
    LstmState context = graph.initial_context();
    std::vector<Tokens> out;
    for (const auto& turn : enc.turns) {
        const UtteranceEncoding u = graph.encode_utterance(turn.user);
        auto [action, next] = graph.student_action(u.final_state, context);
        context = next;
        out.push_back(vocabulary.decode(graph.generate_response(action, u.outputs, model.config().max_decode_len)));
    }
    return out;
}

std::vector<Tokens> generate_episode(const TeacherModel& model, const Episode& episode, const Vocabulary& vocabulary,
                                     const Ontology& ontology) {
    const EncodedEpisode enc = encode_episode(episode, vocabulary, model.config());
    std::vector<Tokens> out;
    for (const auto& turn : enc.turns) {
        const TeacherInput in = make_teacher_input(model, turn, ontology);
        ad::Tape tape;
        const TeacherGraph graph(tape, model);
        const UtteranceEncoding u = graph.encode_utterance(in.user);
        const ad::Var action = graph.teacher_action(u.final_state, in.belief, in.db);
        out.push_back(vocabulary.decode(graph.generate_response(action, u.outputs, model.config().max_decode_len)));
    }
    return out;
}

EvalReport evaluate_corpus(const StudentModel& model, std::span<const Episode> episodes, const Database& database,
                           const Vocabulary& vocabulary) {
    std::vector<std::vector<Tokens>> generated;
    generated.reserve(episodes.size());
    for (const auto& ep : episodes) generated.push_back(generate_episode(model, ep, vocabulary));
    return score_responses(episodes, generated, database);
}

EvalReport evaluate_corpus(const TeacherModel& model, std::span<const Episode> episodes, const Database& database,
                           const Ontology& ontology, const Vocabulary& vocabulary) {
    std::vector<std::vector<Tokens>> generated;
    generated.reserve(episodes.size());
    for (const auto& ep : episodes) generated.push_back(generate_episode(model, ep, vocabulary, ontology));
    return score_responses(episodes, generated, database);
}

}  // namespace tsdial
