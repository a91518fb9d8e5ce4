#include "tsdial/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tsdial {

using nlohmann::ordered_json;

std::string_view to_string(DistillMode mode) {
    switch (mode) {
        case DistillMode::None: return "none";
        case DistillMode::OutputFull: return "full";
        case DistillMode::OutputTopK: return "topk";
        case DistillMode::Policy: return "policy";
        case DistillMode::All: return "all";
    }
    return "none";
}

DistillMode distill_mode_from_string(std::string_view name) {
    if (name == "none") return DistillMode::None;
    if (name == "full") return DistillMode::OutputFull;
    if (name == "topk") return DistillMode::OutputTopK;
    if (name == "policy") return DistillMode::Policy;
    if (name == "all") return DistillMode::All;
    throw std::invalid_argument("unknown distillation mode '" + std::string(name) + "'");
}

bool DistillConfig::uses_output() const {
    return mode == DistillMode::OutputFull || mode == DistillMode::OutputTopK || mode == DistillMode::All;
}

bool DistillConfig::uses_policy() const { return mode == DistillMode::Policy || mode == DistillMode::All; }

void DistillConfig::validate(int vocab_size) const {
    if (!(alpha1 >= 0.0) || !std::isfinite(alpha1) || !(alpha2 >= 0.0) || !std::isfinite(alpha2)) {
        throw std::invalid_argument("distill config: weights must be finite and non-negative");
    }
    if (k < 1) throw std::invalid_argument("distill config: k must be >= 1");
    if (mode == DistillMode::OutputTopK && k > vocab_size) {
        throw std::invalid_argument("distill config: k = " + std::to_string(k) + " exceeds vocabulary size " +
                                    std::to_string(vocab_size));
    }
}

ordered_json DistillConfig::to_json() const {
    ordered_json j;
    j["alpha1"] = alpha1;
    j["alpha2"] = alpha2;
    j["mode"] = std::string(to_string(mode));
    j["k"] = k;
    return j;
}

DistillConfig DistillConfig::from_json(const ordered_json& j) {
    DistillConfig c;
    c.alpha1 = j.value("alpha1", c.alpha1);
    c.alpha2 = j.value("alpha2", c.alpha2);
    c.mode = distill_mode_from_string(j.value("mode", std::string(to_string(c.mode))));
    c.k = j.value("k", c.k);
    return c;
}

SparseDistribution topk_truncate(const Eigen::VectorXd& probs, int k) {
    if (k < 1) throw std::invalid_argument("topk_truncate: k must be >= 1");
    std::vector<TokenId> order(static_cast<std::size_t>(probs.size()));
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](TokenId a, TokenId b) { return probs(a) > probs(b) || (probs(a) == probs(b) && a < b); });
    SparseDistribution out;
    double mass = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        if (probs(order[i]) <= 0.0) break;
        out.ids.push_back(order[i]);
        out.probs.push_back(probs(order[i]));
        mass += probs(order[i]);
    }
    if (mass <= 0.0) throw std::invalid_argument("topk_truncate: distribution has no positive mass");
    for (double& p : out.probs) p /= mass;
    return out;
}

DistillTargets teacher_targets(const TeacherModel& teacher, const TeacherInput& turn, DistillMode mode, int k) {
    if (!teacher.universal() && turn.domain != teacher.domain()) {
        throw std::invalid_argument("teacher_targets: turn domain '" + turn.domain.value_or("NONE") +
                                    "' does not match teacher domain '" + teacher.domain() + "'");
    }
    ad::Tape tape;
    TeacherGraph graph(tape, teacher);
    const UtteranceEncoding enc = graph.encode_utterance(turn.user);
    const ad::Var action = graph.teacher_action(enc.final_state, turn.belief, turn.db);
    DistillTargets targets;
    targets.action = action.value().col(0);
    if (mode == DistillMode::OutputFull || mode == DistillMode::OutputTopK || mode == DistillMode::All) {
        for (const ad::Var& lp : graph.teacher_forced_log_probs(action, enc.outputs, turn.response)) {
            Eigen::VectorXd probs = lp.value().col(0).array().exp();
            probs /= probs.sum();
            if (mode == DistillMode::OutputTopK) {
                targets.positions.emplace_back(topk_truncate(probs, k));
            } else {
                targets.positions.emplace_back(std::move(probs));
            }
        }
    }
    return targets;
}

ad::Var output_distill_loss(std::span<const ad::Var> student_log_probs, const DistillTargets& targets) {
    if (student_log_probs.size() != targets.positions.size() || student_log_probs.empty()) {
        throw std::invalid_argument("output_distill_loss: " + std::to_string(student_log_probs.size()) +
                                    " student positions vs " + std::to_string(targets.positions.size()) +
                                    " target positions");
    }
    std::vector<ad::Var> terms;
    terms.reserve(student_log_probs.size());
    for (std::size_t i = 0; i < student_log_probs.size(); ++i) {
        const ad::Var& lp = student_log_probs[i];
        if (const auto* dense = std::get_if<Eigen::VectorXd>(&targets.positions[i])) {
            terms.push_back(ad::weighted_sum(lp, *dense));
        } else {
            const auto& sparse = std::get<SparseDistribution>(targets.positions[i]);
            terms.push_back(ad::weighted_pick(lp, sparse.ids, sparse.probs));
        }
    }
    return ad::scale(ad::sum(terms), -1.0 / static_cast<double>(terms.size()));
}

double output_distill_loss(std::span<const Eigen::VectorXd> student_log_probs, const DistillTargets& targets) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& lp : student_log_probs) vars.push_back(tape.constant(lp));
    return output_distill_loss(vars, targets).scalar();
}

ad::Var policy_distill_loss(const Eigen::VectorXd& teacher_action, ad::Var student_action) {
    if (teacher_action.size() != student_action.rows() || student_action.cols() != 1) {
        throw std::invalid_argument("policy_distill_loss: action lengths differ");
    }
    return ad::squared_distance(student_action, teacher_action);
}

double policy_distill_loss(const Eigen::VectorXd& teacher_action, const Eigen::VectorXd& student_action) {
    if (teacher_action.size() != student_action.size()) {
        throw std::invalid_argument("policy_distill_loss: action lengths differ");
    }
    ad::Tape tape;
    return policy_distill_loss(teacher_action, tape.constant(student_action)).scalar();
}

double combined_loss(double nll_gold, double kd_output, double kd_policy, const DistillConfig& config) {
    double total = nll_gold;
    if (config.uses_output()) total += config.alpha1 * kd_output;
    if (config.uses_policy()) total += config.alpha2 * kd_policy;
    return total;
}

ad::Var combined_loss(ad::Var nll_gold, ad::Var kd_output, ad::Var kd_policy, const DistillConfig& config) {
    std::vector<ad::Var> terms{nll_gold};
    if (config.uses_output() && kd_output.valid()) terms.push_back(ad::scale(kd_output, config.alpha1));
    if (config.uses_policy() && kd_policy.valid()) terms.push_back(ad::scale(kd_policy, config.alpha2));
    return terms.size() == 1 ? nll_gold : ad::sum(terms);
}

double target_entropy(const PositionTarget& target) {
    auto h = [](std::span<const double> p) {
        double s = 0.0;
        for (double x : p) {
            if (x > 0.0) s -= x * std::log(x);
        }
        return s;
    };
    if (const auto* dense = std::get_if<Eigen::VectorXd>(&target)) {
        return h(std::span<const double>(dense->data(), static_cast<std::size_t>(dense->size())));
    }
    return h(std::get<SparseDistribution>(target).probs);
}

}  // namespace tsdial
