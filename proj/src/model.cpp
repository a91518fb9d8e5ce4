#include "tsdial/model.hpp"

#include "tsdial/random.hpp"

#include <cmath>
#include <stdexcept>

namespace tsdial {

using nlohmann::ordered_json;

namespace {

constexpr double kInitRange = 0.08;

void declare_core(ParameterSet& p, const ModelConfig& c) {
    const int e = c.embed_dim, h = c.hidden_dim, v = c.vocab_size;
    p.add("embedding", v, e);
    p.add("encoder.weight", 4 * h, e + h);
    p.add("encoder.bias", 4 * h, 1);
    p.add("decoder.weight", 4 * h, e + h + h);
    p.add("decoder.bias", 4 * h, 1);
    p.add("output.weight", v, h);
    p.add("output.bias", v, 1);
}

ParameterSet student_layout(const ModelConfig& c) {
    ParameterSet p;
    declare_core(p, c);
    p.add("context.weight", 4 * c.hidden_dim, 2 * c.hidden_dim);
    p.add("context.bias", 4 * c.hidden_dim, 1);
    return p;
}

ParameterSet teacher_layout(const ModelConfig& c, int belief_dim) {
    ParameterSet p;
    declare_core(p, c);
    p.add("policy.weight", c.hidden_dim, c.hidden_dim + belief_dim + DbPointer::kBuckets);
    return p;
}

void adopt(ParameterSet& layout, ParameterSet&& loaded) {
    if (layout.items().size() != loaded.items().size()) {
        throw std::invalid_argument("parameter set has " + std::to_string(loaded.items().size()) +
                                    " tensors, expected " + std::to_string(layout.items().size()));
    }
    for (auto& target : layout.items()) {
        if (!loaded.contains(target.name)) throw std::invalid_argument("missing parameter '" + target.name + "'");
        const ad::Parameter& src = loaded.at(target.name);
        if (src.value.rows() != target.value.rows() || src.value.cols() != target.value.cols()) {
            throw std::invalid_argument("parameter '" + target.name + "' has shape " +
                                        std::to_string(src.value.rows()) + "x" + std::to_string(src.value.cols()) +
                                        ", expected " + std::to_string(target.value.rows()) + "x" +
                                        std::to_string(target.value.cols()));
        }
        target.value = src.value;
    }
}

}  // namespace

// ---- config -------------------------------------------------------------------

void ModelConfig::validate() const {
    if (embed_dim < 1 || hidden_dim < 1 || vocab_size < Vocabulary::kReserved + 1 || max_decode_len < 1 ||
        max_input_len < 1) {
        throw std::invalid_argument("model config: dimensions must be positive and vocab_size > 4");
    }
}

ordered_json ModelConfig::to_json() const {
    ordered_json j;
    j["embed_dim"] = embed_dim;
    j["hidden_dim"] = hidden_dim;
    j["vocab_size"] = vocab_size;
    j["max_decode_len"] = max_decode_len;
    j["max_input_len"] = max_input_len;
    j["seed"] = seed;
    return j;
}

ModelConfig ModelConfig::from_json(const ordered_json& j) {
    ModelConfig c;
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
    c.max_input_len = j.value("max_input_len", c.max_input_len);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

// ---- parameters ---------------------------------------------------------------

ad::Parameter& ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    ad::Parameter p;
    p.name = std::move(name);
    p.value = ad::Matrix::Zero(rows, cols);
    p.grad = ad::Matrix::Zero(rows, cols);
    params_.push_back(std::move(p));
    return params_.back();
}

ad::Parameter& ParameterSet::at(std::string_view name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

const ad::Parameter& ParameterSet::at(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

bool ParameterSet::contains(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return true;
    }
    return false;
}

std::size_t ParameterSet::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void ParameterSet::init_uniform(std::uint64_t seed, double range) {
    Rng rng(seed);
    for (auto& p : params_) {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-range, range);
    }
}

// ---- models -------------------------------------------------------------------

StudentModel::StudentModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    params_ = student_layout(config_);
    params_.init_uniform(config_.seed, kInitRange);
}

StudentModel::StudentModel(const ModelConfig& config, ParameterSet params) : config_(config) {
    config_.validate();
    params_ = student_layout(config_);
    adopt(params_, std::move(params));
}

TeacherModel::TeacherModel(const ModelConfig& config, std::string domain, int belief_dim)
    : config_(config), domain_(std::move(domain)), belief_dim_(belief_dim) {
    config_.validate();
    if (belief_dim_ < 0) throw std::invalid_argument("teacher: negative belief dimension");
    params_ = teacher_layout(config_, belief_dim_);
    params_.init_uniform(config_.seed, kInitRange);
}

TeacherModel::TeacherModel(const ModelConfig& config, std::string domain, int belief_dim, ParameterSet params)
    : config_(config), domain_(std::move(domain)), belief_dim_(belief_dim) {
    config_.validate();
    params_ = teacher_layout(config_, belief_dim_);
    adopt(params_, std::move(params));
}

BeliefScope TeacherModel::belief_scope() const {
    return universal() ? BeliefScope::all() : BeliefScope::only(domain_);
}

// ---- graph operations --------------------------------------------------------------

LstmState lstm_step(ad::Var weight, ad::Var bias, ad::Var input, const LstmState& state) {
    const Eigen::Index h = state.h.rows();
    const ad::Var parts[] = {input, state.h};
    const ad::Var gates = ad::add(ad::matmul(weight, ad::concat_rows(parts)), bias);
    const ad::Var i = ad::sigmoid(ad::slice_rows(gates, 0, h));
    const ad::Var f = ad::sigmoid(ad::slice_rows(gates, h, h));
    const ad::Var g = ad::tanh(ad::slice_rows(gates, 2 * h, h));
    const ad::Var o = ad::sigmoid(ad::slice_rows(gates, 3 * h, h));
    const ad::Var c = ad::add(ad::hadamard(f, state.c), ad::hadamard(i, g));
    return {ad::hadamard(o, ad::tanh(c)), c};
}

ad::Var attention(ad::Var query, ad::Var keys, ad::Var* weights) {
    if (query.cols() != 1 || keys.rows() != query.rows()) {
        throw std::invalid_argument("attention: query/key widths differ");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(query.rows()));
    const ad::Var w = ad::softmax(ad::scale(ad::matmul_tn(keys, query), scale));
    if (weights) *weights = w;
    return ad::matmul(keys, w);
}

TokenId argmax(const Eigen::MatrixXd& column) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < column.rows(); ++i) {
        if (column(i, 0) > column(best, 0)) best = i;
    }
    return static_cast<TokenId>(best);
}

DecoderGraph::DecoderGraph(ad::Tape& tape, const ModelConfig& config, const ParameterSet& params,
                           ParameterSet* trainable)
    : tape_(&tape), config_(&config) {
    for (std::size_t k = 0; k < params.items().size(); ++k) {
        const ad::Parameter& p = params.items()[k];
        bound_.emplace_back(p.name, trainable ? tape.parameter(trainable->items()[k]) : tape.frozen(p));
    }
}

ad::Var DecoderGraph::param(std::string_view name) const {
    for (const auto& [n, v] : bound_) {
        if (n == name) return v;
    }
    throw std::out_of_range("graph has no parameter '" + std::string(name) + "'");
}

UtteranceEncoding DecoderGraph::encode_utterance(std::span<const TokenId> tokens) const {
    const ModelConfig& c = config();
    if (tokens.empty()) throw std::invalid_argument("encode_utterance: empty token sequence");
    if (static_cast<int>(tokens.size()) > c.max_input_len) {
        throw std::invalid_argument("encode_utterance: " + std::to_string(tokens.size()) +
                                    " tokens exceed max_input_len " + std::to_string(c.max_input_len));
    }
    const ad::Var emb = param("embedding");
    const ad::Var w = param("encoder.weight");
    const ad::Var b = param("encoder.bias");
    LstmState s{tape().constant(ad::Matrix(ad::Matrix::Zero(c.hidden_dim, 1))), tape().constant(ad::Matrix(ad::Matrix::Zero(c.hidden_dim, 1)))};
    std::vector<ad::Var> outputs;
    outputs.reserve(tokens.size());
    for (TokenId t : tokens) {
        if (t < 0 || t >= c.vocab_size) {
            throw std::out_of_range("encode_utterance: token id " + std::to_string(t) + " outside vocabulary");
        }
        s = lstm_step(w, b, ad::row(emb, t), s);
        outputs.push_back(s.h);
    }
    return {s.h, ad::concat_cols(outputs)};
}

LstmState DecoderGraph::init_decoder(ad::Var action) const {
    if (action.rows() != config().hidden_dim || action.cols() != 1) {
        throw std::invalid_argument("init_decoder: action length differs from hidden_dim");
    }
    return {action, tape().constant(ad::Matrix(ad::Matrix::Zero(config().hidden_dim, 1)))};
}

DecodeStep DecoderGraph::decode_step(TokenId prev_token, const LstmState& state, ad::Var encoder_outputs) const {
    if (prev_token < 0 || prev_token >= config().vocab_size) {
        throw std::out_of_range("decode_step: token id outside vocabulary");
    }
    const ad::Var context = attention(state.h, encoder_outputs);
    const ad::Var parts[] = {ad::row(param("embedding"), prev_token), context};
    const LstmState next = lstm_step(param("decoder.weight"), param("decoder.bias"), ad::concat_rows(parts), state);
    const ad::Var logits = ad::add(ad::matmul(param("output.weight"), next.h), param("output.bias"));
    return {logits, next};
}

std::vector<TokenId> DecoderGraph::generate_response(ad::Var action, ad::Var encoder_outputs, int max_len) const {
    if (max_len < 1) throw std::invalid_argument("generate_response: max_len must be >= 1");
    std::vector<TokenId> out;
    LstmState state = init_decoder(action);
    TokenId prev = Vocabulary::kBos;
    for (int i = 0; i < max_len; ++i) {
        DecodeStep step = decode_step(prev, state, encoder_outputs);
        const TokenId next = argmax(step.logits.value());
        if (next == Vocabulary::kEos) break;
        out.push_back(next);
        prev = next;
        state = step.state;
    }
    return out;
}

std::vector<ad::Var> DecoderGraph::teacher_forced_log_probs(ad::Var action, ad::Var encoder_outputs,
                                                            std::span<const TokenId> response) const {
    std::vector<ad::Var> out;
    out.reserve(response.size() + 1);
    LstmState state = init_decoder(action);
    TokenId prev = Vocabulary::kBos;
    for (std::size_t i = 0; i <= response.size(); ++i) {
        DecodeStep step = decode_step(prev, state, encoder_outputs);
        out.push_back(ad::log_softmax(step.logits));
        if (i < response.size()) prev = response[i];
        state = step.state;
    }
    return out;
}

StudentGraph::StudentGraph(ad::Tape& tape, StudentModel& model)
    : DecoderGraph(tape, model.config(), model.parameters(), &model.parameters()) {}

StudentGraph::StudentGraph(ad::Tape& tape, const StudentModel& model)
    : DecoderGraph(tape, model.config(), model.parameters(), nullptr) {}

LstmState StudentGraph::initial_context() const {
    const int h = config().hidden_dim;
    return {tape().constant(ad::Matrix(ad::Matrix::Zero(h, 1))), tape().constant(ad::Matrix(ad::Matrix::Zero(h, 1)))};
}

std::pair<ad::Var, LstmState> StudentGraph::student_action(ad::Var utterance, const LstmState& context) const {
    if (utterance.rows() != config().hidden_dim) throw std::invalid_argument("student_action: v_u width mismatch");
    LstmState next = lstm_step(param("context.weight"), param("context.bias"), utterance, context);
    return {next.h, next};
}

TeacherGraph::TeacherGraph(ad::Tape& tape, TeacherModel& model)
    : DecoderGraph(tape, model.config(), model.parameters(), &model.parameters()),
      belief_dim_(model.belief_dim()) {}

TeacherGraph::TeacherGraph(ad::Tape& tape, const TeacherModel& model)
    : DecoderGraph(tape, model.config(), model.parameters(), nullptr), belief_dim_(model.belief_dim()) {}

ad::Var TeacherGraph::teacher_action(ad::Var utterance, const BeliefState& belief, const DbPointer& db) const {
    if (utterance.rows() != config().hidden_dim || utterance.cols() != 1) {
        throw std::invalid_argument("teacher_action: v_u width mismatch");
    }
    if (belief.values.size() != belief_dim_) {
        throw std::invalid_argument("teacher_action: belief state has " + std::to_string(belief.values.size()) +
                                    " entries, teacher expects " + std::to_string(belief_dim_));
    }
    if (db.values.size() != DbPointer::kBuckets) throw std::invalid_argument("teacher_action: db pointer must have 6 entries");
    ad::Matrix state(belief_dim_ + DbPointer::kBuckets, 1);
    state << belief.values, db.values;
    const ad::Var parts[] = {utterance, tape().constant(std::move(state))};
    return ad::tanh(ad::matmul(param("policy.weight"), ad::concat_rows(parts)));
}

}  // namespace tsdial
