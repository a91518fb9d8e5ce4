#pragma once

#include "tsdial/model.hpp"

#include <string_view>
#include <variant>

namespace tsdial {

enum class DistillMode { None, OutputFull, OutputTopK, Policy, All };

std::string_view to_string(DistillMode mode);
DistillMode distill_mode_from_string(std::string_view name);

struct DistillConfig {
    double alpha1 = 0.01;  // output distillation weight
    double alpha2 = 0.05;  // policy distillation weight
    DistillMode mode = DistillMode::None;
    int k = 128;

    bool uses_output() const;
    bool uses_policy() const;
    bool needs_teachers() const { return uses_output() || uses_policy(); }
    /// Throws std::invalid_argument on negative/non-finite weights or k out of range.
    void validate(int vocab_size) const;

    nlohmann::ordered_json to_json() const;
    static DistillConfig from_json(const nlohmann::ordered_json& j);
};

/// Top-K support with renormalized probabilities.
struct SparseDistribution {
    std::vector<TokenId> ids;
    std::vector<double> probs;
};

/// One response position: a full vocabulary distribution or a sparse one.
using PositionTarget = std::variant<Eigen::VectorXd, SparseDistribution>;

struct DistillTargets {
    std::vector<PositionTarget> positions;  // response tokens + EOS
    Eigen::VectorXd action;                 // teacher a_t
};

/// Keeps the k largest entries (ties to the lower index) and renormalizes.
SparseDistribution topk_truncate(const Eigen::VectorXd& probs, int k);

/// Inputs of one turn as seen by a teacher.
struct TeacherInput {
    std::vector<TokenId> user;
    std::vector<TokenId> response;
    std::optional<std::string> domain;
    BeliefState belief;  // already scoped to the teacher
    DbPointer db;
};

/// Runs the teacher with teacher forcing on the gold response. Full targets
/// for OutputFull; top-k for OutputTopK; the action is always filled.
/// Throws std::invalid_argument on domain mismatch.
DistillTargets teacher_targets(const TeacherModel& teacher, const TeacherInput& turn, DistillMode mode, int k);

/// -(1/N) sum_positions sum_w p_T(w) log p_S(w).
ad::Var output_distill_loss(std::span<const ad::Var> student_log_probs, const DistillTargets& targets);
double output_distill_loss(std::span<const Eigen::VectorXd> student_log_probs, const DistillTargets& targets);

/// sum_i (a_T(i) - a_S(i))^2, summed rather than averaged.
ad::Var policy_distill_loss(const Eigen::VectorXd& teacher_action, ad::Var student_action);
double policy_distill_loss(const Eigen::VectorXd& teacher_action, const Eigen::VectorXd& student_action);

/// nll + alpha1 * kd_output [output modes] + alpha2 * kd_policy [policy modes].
double combined_loss(double nll_gold, double kd_output, double kd_policy, const DistillConfig& config);
/// Graph form; absent (invalid) components count as zero.
ad::Var combined_loss(ad::Var nll_gold, ad::Var kd_output, ad::Var kd_policy, const DistillConfig& config);

/// Entropy of a target position, used for the Gibbs lower bound.
double target_entropy(const PositionTarget& target);

}  // namespace tsdial
