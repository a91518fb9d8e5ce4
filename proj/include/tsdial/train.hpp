#pragma once

#include "tsdial/distill.hpp"
#include "tsdial/model.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>

namespace tsdial {

struct TrainConfig {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 20;
    /// Episodes per optimizer step.
    int batch_size = 1;
    double grad_clip_norm = 5.0;
    std::uint64_t seed = 1;
    /// Stop after this many epochs without a better validation (Success,
    /// Inform); 0 disables early stopping.
    int patience = 0;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::ordered_json& j);
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double gradient_norm(const ParameterSet& params);
/// Scales every gradient so the global norm is at most `max_norm`; returns
/// the norm before clipping.
double clip_gradient_norm(ParameterSet& params, double max_norm);

/// Adam with bias correction, preceded by global-norm clipping.
class AdamOptimizer {
public:
    AdamOptimizer(const ParameterSet& params, const TrainConfig& config);

    /// Throws NonFiniteGradient naming the first parameter with a NaN/Inf
    /// gradient; parameters are left untouched in that case.
    void step(ParameterSet& params);
    long steps() const { return steps_; }

private:
    TrainConfig config_;
    std::vector<Eigen::MatrixXd> m_;
    std::vector<Eigen::MatrixXd> v_;
    long steps_ = 0;
};

// ---- data -----------------------------------------------------------------

struct DatasetContext {
    const Ontology& ontology;
    const Vocabulary& vocabulary;
    const Database& database;
};

struct EncodedTurn {
    std::vector<TokenId> user;      // truncated to max_input_len
    std::vector<TokenId> response;  // without BOS/EOS
    const Turn* source = nullptr;
};

struct EncodedEpisode {
    const Episode* source = nullptr;
    std::vector<EncodedTurn> turns;
};

EncodedEpisode encode_episode(const Episode& episode, const Vocabulary& vocabulary, const ModelConfig& config);

TeacherInput make_teacher_input(const TeacherModel& teacher, const EncodedTurn& turn, const Ontology& ontology);

// ---- losses ----------------------------------------------------------------

/// Mean negative log-likelihood of `gold` (plus EOS) under `log_probs`.
ad::Var sequence_nll(std::span<const ad::Var> log_probs, std::span<const TokenId> gold);

/// Teacher-forced per-token NLL of one turn.
ad::Var teacher_turn_nll(const TeacherGraph& graph, const TeacherInput& turn);

struct StudentTurnTerms {
    ad::Var nll;
    ad::Var kd_output;  // invalid when the turn has no output guidance
    ad::Var kd_policy;  // invalid when the turn has no policy guidance
    ad::Var total;
};

/// Runs the student over a whole episode from the reset context state.
/// `targets[t]` is the guidance for turn t (nullopt: NLL only).
std::vector<StudentTurnTerms> student_episode_terms(const StudentGraph& graph, const EncodedEpisode& episode,
                                                    std::span<const std::optional<DistillTargets>> targets,
                                                    const DistillConfig& config);

// ---- teachers --------------------------------------------------------------

struct TeacherCheckpoint {
    int epoch = 0;
    double train_nll = 0.0;
    double val_nll = 0.0;
    double val_inform = 0.0;
    double val_success = 0.0;
    /// Serialized checkpoint bytes; a sink may move them to `path`.
    std::string blob;
    std::filesystem::path path;

    nlohmann::ordered_json to_json() const;  // metrics and path only
};

using CheckpointSink = std::function<void(TeacherCheckpoint&)>;

/// Trains one teacher on turn-level data. `domain` is an ontology domain or
/// kUniversalTeacher (all tagged turns, belief over all domains). One
/// checkpoint per epoch, each scored on `val`.
std::vector<TeacherCheckpoint> train_teacher(const std::string& domain, std::span<const Episode> train,
                                             std::span<const Episode> val, const DatasetContext& data,
                                             const ModelConfig& model_config, const TrainConfig& train_config,
                                             const CheckpointSink& sink = {});

/// Index of the best checkpoint: highest val Success, then Inform, then
/// lowest val NLL, then earliest epoch.
std::size_t best_checkpoint_index(std::span<const TeacherCheckpoint> checkpoints);
TeacherModel select_best_teacher(std::span<const TeacherCheckpoint> checkpoints);

// ---- student ----------------------------------------------------------------

struct TeacherSet {
    std::map<std::string, TeacherModel> by_domain;
    std::optional<TeacherModel> universal;

    /// Teacher for a turn tagged `domain`; nullptr for NONE or no teacher.
    const TeacherModel* route(const std::optional<std::string>& domain) const;
    bool empty() const { return by_domain.empty() && !universal; }
};

struct StudentEpochLog {
    int epoch = 0;
    double nll = 0.0;
    double kd_output = 0.0;
    double kd_policy = 0.0;
    double val_nll = 0.0;
    double val_inform = 0.0;
    double val_success = 0.0;
    std::map<std::string, int> teacher_turns;
    int none_turns = 0;
    int unrouted_turns = 0;

    nlohmann::ordered_json to_json() const;
};

struct StudentTrainingResult {
    StudentModel model;
    int best_epoch = 0;
    std::vector<StudentEpochLog> log;
    std::vector<std::string> warnings;
};

using EpochLogSink = std::function<void(const StudentEpochLog&)>;

/// Episode-level updates; guidance routed per turn by domain tag. Returns
/// the epoch with the best validation (Success, Inform, -NLL).
StudentTrainingResult train_student(std::span<const Episode> train, std::span<const Episode> val,
                                    const TeacherSet& teachers, const DistillConfig& distill,
                                    const TrainConfig& train_config, const ModelConfig& model_config,
                                    const DatasetContext& data, const EpochLogSink& on_epoch = {});

}  // namespace tsdial
