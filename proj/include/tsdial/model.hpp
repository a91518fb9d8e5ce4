#pragma once

#include "tsdial/autodiff.hpp"
#include "tsdial/corpus.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tsdial {

struct ModelConfig {
    int embed_dim = 50;
    int hidden_dim = 150;
    int vocab_size = Vocabulary::kDefaultMaxSize;
    int max_decode_len = 40;
    int max_input_len = 100;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::ordered_json& j);
    bool operator==(const ModelConfig&) const = default;
};

/// Parameters in a fixed creation order. Addresses are stable after
/// construction, so tapes may bind to them.
class ParameterSet {
public:
    ad::Parameter& add(std::string name, Eigen::Index rows, Eigen::Index cols);
    ad::Parameter& at(std::string_view name);
    const ad::Parameter& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::vector<ad::Parameter>& items() { return params_; }
    const std::vector<ad::Parameter>& items() const { return params_; }
    std::size_t count() const;  // total scalar count

    void zero_grad();
    /// uniform(-range, range) in creation order.
    void init_uniform(std::uint64_t seed, double range);

private:
    std::vector<ad::Parameter> params_;
};

/// Hierarchical encoder-decoder: utterance encoder, context-level policy
/// recurrence, attention decoder.
class StudentModel {
public:
    explicit StudentModel(const ModelConfig& config);
    /// Adopts checkpointed parameters; shapes are checked against `config`.
    StudentModel(const ModelConfig& config, ParameterSet params);

    const ModelConfig& config() const { return config_; }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }

private:
    ModelConfig config_;
    ParameterSet params_;
};

inline constexpr std::string_view kUniversalTeacher = "universal";

/// State-conditioned turn-level model for one domain (or all domains when
/// domain() == kUniversalTeacher).
class TeacherModel {
public:
    TeacherModel(const ModelConfig& config, std::string domain, int belief_dim);
    TeacherModel(const ModelConfig& config, std::string domain, int belief_dim, ParameterSet params);

    const ModelConfig& config() const { return config_; }
    const std::string& domain() const { return domain_; }
    bool universal() const { return domain_ == kUniversalTeacher; }
    BeliefScope belief_scope() const;
    int belief_dim() const { return belief_dim_; }
    int policy_input_dim() const { return config_.hidden_dim + belief_dim_ + DbPointer::kBuckets; }

    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }

private:
    ModelConfig config_;
    std::string domain_;
    int belief_dim_;
    ParameterSet params_;
};

// ---- graph-level computations ------------------------------------------------

struct LstmState {
    ad::Var h;
    ad::Var c;
};

struct UtteranceEncoding {
    ad::Var final_state;  // v_u, hidden_dim x 1
    ad::Var outputs;      // hidden_dim x length, column j = encoder output at word j
};

struct DecodeStep {
    ad::Var logits;  // vocab_size x 1
    LstmState state;
};

/// One LSTM step; `weight` is 4H x (X + H), gates ordered i, f, g, o.
LstmState lstm_step(ad::Var weight, ad::Var bias, ad::Var input, const LstmState& state);

/// Scaled dot-product attention of `query` (H x 1) over the columns of
/// `keys` (H x m). Returns the context vector; optionally the weights.
ad::Var attention(ad::Var query, ad::Var keys, ad::Var* weights = nullptr);

/// Operations shared by both model families, bound to one tape.
class DecoderGraph {
public:
    ad::Tape& tape() const { return *tape_; }
    const ModelConfig& config() const { return *config_; }

    UtteranceEncoding encode_utterance(std::span<const TokenId> tokens) const;
    /// Hidden state = action, cell state = 0.
    LstmState init_decoder(ad::Var action) const;
    DecodeStep decode_step(TokenId prev_token, const LstmState& state, ad::Var encoder_outputs) const;
    /// Greedy decoding from BOS; stops at EOS or max_len. Excludes BOS/EOS.
    std::vector<TokenId> generate_response(ad::Var action, ad::Var encoder_outputs, int max_len) const;
    /// Log-probabilities at each position of `response` followed by EOS, with
    /// the gold prefix fed back (teacher forcing).
    std::vector<ad::Var> teacher_forced_log_probs(ad::Var action, ad::Var encoder_outputs,
                                                  std::span<const TokenId> response) const;

protected:
    DecoderGraph(ad::Tape& tape, const ModelConfig& config, const ParameterSet& params, ParameterSet* trainable);
    ad::Var param(std::string_view name) const;

private:
    ad::Tape* tape_;
    const ModelConfig* config_;
    std::vector<std::pair<std::string, ad::Var>> bound_;
};

class StudentGraph : public DecoderGraph {
public:
    /// Trainable binding: gradients flow into `model`.
    StudentGraph(ad::Tape& tape, StudentModel& model);
    /// Frozen binding for inference.
    StudentGraph(ad::Tape& tape, const StudentModel& model);

    /// Zero state used at the start of every episode.
    LstmState initial_context() const;
    /// Advances the context recurrence on v_u; returns (a_t, new state).
    std::pair<ad::Var, LstmState> student_action(ad::Var utterance, const LstmState& context) const;
};

class TeacherGraph : public DecoderGraph {
public:
    TeacherGraph(ad::Tape& tape, TeacherModel& model);
    TeacherGraph(ad::Tape& tape, const TeacherModel& model);

    /// a_t = tanh(W [v_u; v_b; v_kb]).
    ad::Var teacher_action(ad::Var utterance, const BeliefState& belief, const DbPointer& db) const;

private:
    int belief_dim_;
};

/// Arg-max with ties resolved to the lower index.
TokenId argmax(const Eigen::MatrixXd& column);

}  // namespace tsdial
