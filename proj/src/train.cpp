#include "tsdial/train.hpp"

#include "tsdial/checkpoint.hpp"
#include "tsdial/eval.hpp"
#include "tsdial/random.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace tsdial {

using nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("train config: learning_rate must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("train config: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be positive");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("train config: grad_clip_norm must be positive");
    if (patience < 0) throw std::invalid_argument("train config: patience must be >= 0");
}

ordered_json TrainConfig::to_json() const {
    ordered_json j;
    j["learning_rate"] = learning_rate;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["epsilon"] = epsilon;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["grad_clip_norm"] = grad_clip_norm;
    j["seed"] = seed;
    j["patience"] = patience;
    return j;
}

TrainConfig TrainConfig::from_json(const ordered_json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.seed = j.value("seed", c.seed);
    c.patience = j.value("patience", c.patience);
    c.validate();
    return c;
}

double gradient_norm(const ParameterSet& params) {
    double sq = 0.0;
    for (const auto& p : params.items()) {
        if (p.grad.size() != 0) sq += p.grad.squaredNorm();
    }
    return std::sqrt(sq);
}

double clip_gradient_norm(ParameterSet& params, double max_norm) {
    const double norm = gradient_norm(params);
    if (norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& p : params.items()) {
            if (p.grad.size() != 0) p.grad *= factor;
        }
    }
    return norm;
}

AdamOptimizer::AdamOptimizer(const ParameterSet& params, const TrainConfig& config) : config_(config) {
    config_.validate();
    for (const auto& p : params.items()) {
        m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    }
}

void AdamOptimizer::step(ParameterSet& params) {
    auto& items = params.items();
    if (items.size() != m_.size()) throw std::invalid_argument("AdamOptimizer: parameter set changed");
    for (auto& p : items) {
        if (p.grad.size() == 0) p.zero_grad();
        if (!p.grad.allFinite()) throw NonFiniteGradient("non-finite gradient in parameter '" + p.name + "'");
    }
    clip_gradient_norm(params, config_.grad_clip_norm);
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& p = items[i];
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
        p.value.array() -= config_.learning_rate * (m_[i].array() / c1) /
                           ((v_[i].array() / c2).sqrt() + config_.epsilon);
    }
}

// ---- data -----------------------------------------------------------------

EncodedEpisode encode_episode(const Episode& episode, const Vocabulary& vocabulary, const ModelConfig& config) {
    EncodedEpisode out;
    out.source = &episode;
    for (const auto& turn : episode.turns) {
        EncodedTurn t;
        t.user = vocabulary.encode(turn.user);
        if (static_cast<int>(t.user.size()) > config.max_input_len) t.user.resize(config.max_input_len);
        if (t.user.empty()) t.user.push_back(Vocabulary::kUnk);
        t.response = vocabulary.encode(turn.response);
        t.source = &turn;
        out.turns.push_back(std::move(t));
    }
    return out;
}

TeacherInput make_teacher_input(const TeacherModel& teacher, const EncodedTurn& turn, const Ontology& ontology) {
    TeacherInput in;
    in.user = turn.user;
    in.response = turn.response;
    in.domain = turn.source->domain;
    in.belief = encode_belief_state(turn.source->belief, ontology, teacher.belief_scope());
    in.db = encode_db_pointer(turn.source->db_count);
    return in;
}

// ---- losses ----------------------------------------------------------------

ad::Var sequence_nll(std::span<const ad::Var> log_probs, std::span<const TokenId> gold) {
    if (log_probs.size() != gold.size() + 1) {
        throw std::invalid_argument("sequence_nll: " + std::to_string(log_probs.size()) + " positions for " +
                                    std::to_string(gold.size()) + " tokens plus EOS");
    }
    std::vector<ad::Var> picks;
    picks.reserve(log_probs.size());
    for (std::size_t i = 0; i < log_probs.size(); ++i) {
        picks.push_back(ad::pick(log_probs[i], i < gold.size() ? gold[i] : Vocabulary::kEos));
    }
    return ad::scale(ad::sum(picks), -1.0 / static_cast<double>(picks.size()));
}

ad::Var teacher_turn_nll(const TeacherGraph& graph, const TeacherInput& turn) {
    const UtteranceEncoding enc = graph.encode_utterance(turn.user);
    const ad::Var action = graph.teacher_action(enc.final_state, turn.belief, turn.db);
    const auto log_probs = graph.teacher_forced_log_probs(action, enc.outputs, turn.response);
    return sequence_nll(log_probs, turn.response);
}

std::vector<StudentTurnTerms> student_episode_terms(const StudentGraph& graph, const EncodedEpisode& episode,
                                                    std::span<const std::optional<DistillTargets>> targets,
                                                    const DistillConfig& config) {
    if (!targets.empty() && targets.size() != episode.turns.size()) {
        throw std::invalid_argument("student_episode_terms: targets not aligned with turns");
    }
    std::vector<StudentTurnTerms> out;
    LstmState context = graph.initial_context();
    for (std::size_t t = 0; t < episode.turns.size(); ++t) {
        const EncodedTurn& turn = episode.turns[t];
        const UtteranceEncoding enc = graph.encode_utterance(turn.user);
        auto [action, next] = graph.student_action(enc.final_state, context);
        context = next;
        const auto log_probs = graph.teacher_forced_log_probs(action, enc.outputs, turn.response);
        StudentTurnTerms terms;
        terms.nll = sequence_nll(log_probs, turn.response);
        if (!targets.empty() && targets[t]) {
            const DistillTargets& guide = *targets[t];
            if (config.uses_output() && !guide.positions.empty()) {
                terms.kd_output = output_distill_loss(log_probs, guide);
            }
            if (config.uses_policy()) terms.kd_policy = policy_distill_loss(guide.action, action);
        }
        terms.total = combined_loss(terms.nll, terms.kd_output, terms.kd_policy, config);
        out.push_back(terms);
    }
    return out;
}

// ---- teachers --------------------------------------------------------------

ordered_json TeacherCheckpoint::to_json() const {
    ordered_json j;
    j["epoch"] = epoch;
    j["train_nll"] = train_nll;
    j["val_nll"] = val_nll;
    j["val_inform"] = val_inform;
    j["val_success"] = val_success;
    if (!path.empty()) j["path"] = path.string();
    return j;
}

namespace {

bool teacher_accepts(const TeacherModel& teacher, const Turn& turn) {
    if (!turn.domain) return false;
    return teacher.universal() || *turn.domain == teacher.domain();
}

std::vector<EncodedEpisode> encode_all(std::span<const Episode> episodes, const Vocabulary& vocabulary,
                                       const ModelConfig& config) {
    std::vector<EncodedEpisode> out;
    out.reserve(episodes.size());
    for (const auto& ep : episodes) out.push_back(encode_episode(ep, vocabulary, config));
    return out;
}

double teacher_mean_nll(const TeacherModel& teacher, std::span<const EncodedEpisode> episodes,
                        const Ontology& ontology) {
    double total = 0.0;
    long count = 0;
    for (const auto& ep : episodes) {
        for (const auto& turn : ep.turns) {
            if (!teacher_accepts(teacher, *turn.source)) continue;
            ad::Tape tape;
            const TeacherGraph graph(tape, teacher);
            total += teacher_turn_nll(graph, make_teacher_input(teacher, turn, ontology)).scalar();
            ++count;
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

std::vector<TeacherCheckpoint> train_teacher(const std::string& domain, std::span<const Episode> train,
                                             std::span<const Episode> val, const DatasetContext& data,
                                             const ModelConfig& model_config, const TrainConfig& train_config,
                                             const CheckpointSink& sink) {
    model_config.validate();
    train_config.validate();
    const bool universal = domain == kUniversalTeacher;
    if (!universal && !data.ontology.has_domain(domain)) {
        throw std::invalid_argument("train_teacher: unknown domain '" + domain + "'");
    }
    const BeliefScope scope = universal ? BeliefScope::all() : BeliefScope::only(domain);
    TeacherModel teacher(model_config, domain, belief_state_size(data.ontology, scope));

    const auto train_enc = encode_all(train, data.vocabulary, model_config);
    const auto val_enc = encode_all(val, data.vocabulary, model_config);
    std::vector<const EncodedTurn*> examples;
    for (const auto& ep : train_enc) {
        for (const auto& turn : ep.turns) {
            if (teacher_accepts(teacher, *turn.source)) examples.push_back(&turn);
        }
    }
    if (examples.empty()) throw std::invalid_argument("train_teacher: no training turns for domain '" + domain + "'");

    AdamOptimizer optimizer(teacher.parameters(), train_config);
    Rng rng(train_config.seed);
    std::vector<TeacherCheckpoint> checkpoints;
    std::tuple<double, double> best{-1.0, -1.0};
    int stale = 0;
    for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
        rng.shuffle(std::span<const EncodedTurn*>(examples));
        double loss_sum = 0.0;
        teacher.parameters().zero_grad();
        int pending = 0;
        for (const EncodedTurn* turn : examples) {
            ad::Tape tape;
            const TeacherGraph graph(tape, teacher);
            const ad::Var loss = teacher_turn_nll(graph, make_teacher_input(teacher, *turn, data.ontology));
            loss_sum += loss.scalar();
            tape.backward(loss);
            if (++pending == train_config.batch_size) {
                optimizer.step(teacher.parameters());
                teacher.parameters().zero_grad();
                pending = 0;
            }
        }
        if (pending > 0) {
            optimizer.step(teacher.parameters());
            teacher.parameters().zero_grad();
        }

        TeacherCheckpoint ckpt;
        ckpt.epoch = epoch;
        ckpt.train_nll = loss_sum / static_cast<double>(examples.size());
        if (!val.empty()) {
            ckpt.val_nll = teacher_mean_nll(teacher, val_enc, data.ontology);
            const EvalReport report = evaluate_corpus(teacher, val, data.database, data.ontology, data.vocabulary);
            ckpt.val_inform = report.inform_rate;
            ckpt.val_success = report.success_rate;
        }
        ckpt.blob = encode_checkpoint(make_checkpoint(teacher, data.vocabulary, data.ontology));
        if (sink) sink(ckpt);
        checkpoints.push_back(std::move(ckpt));

        if (train_config.patience > 0 && !val.empty()) {
            const std::tuple<double, double> score{checkpoints.back().val_success, checkpoints.back().val_inform};
            if (score > best) {
                best = score;
                stale = 0;
            } else if (++stale >= train_config.patience) {
                break;
            }
        }
    }
    return checkpoints;
}

std::size_t best_checkpoint_index(std::span<const TeacherCheckpoint> checkpoints) {
    if (checkpoints.empty()) throw std::invalid_argument("best_checkpoint_index: no checkpoints");
    std::size_t best = 0;
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        const auto& a = checkpoints[i];
        const auto& b = checkpoints[best];
        if (std::tuple(a.val_success, a.val_inform, -a.val_nll) > std::tuple(b.val_success, b.val_inform, -b.val_nll)) {
            best = i;
        }
    }
    return best;
}

TeacherModel select_best_teacher(std::span<const TeacherCheckpoint> checkpoints) {
    const TeacherCheckpoint& best = checkpoints[best_checkpoint_index(checkpoints)];
    const Checkpoint ckpt = best.blob.empty() ? load_checkpoint(best.path) : decode_checkpoint(best.blob);
    return teacher_from_checkpoint(ckpt);
}

// ---- student ----------------------------------------------------------------

const TeacherModel* TeacherSet::route(const std::optional<std::string>& domain) const {
    if (!domain) return nullptr;
    if (universal) return &*universal;
    if (auto it = by_domain.find(*domain); it != by_domain.end()) return &it->second;
    return nullptr;
}

ordered_json StudentEpochLog::to_json() const {
    ordered_json j;
    j["epoch"] = epoch;
    j["nll"] = nll;
    j["kd_output"] = kd_output;
    j["kd_policy"] = kd_policy;
    j["val_nll"] = val_nll;
    j["val_inform"] = val_inform;
    j["val_success"] = val_success;
    ordered_json routed = ordered_json::object();
    for (const auto& [d, n] : teacher_turns) routed[d] = n;
    j["teacher_turns"] = routed;
    j["none_turns"] = none_turns;
    j["unrouted_turns"] = unrouted_turns;
    return j;
}

namespace {

double student_mean_nll(const StudentModel& model, std::span<const EncodedEpisode> episodes) {
    double total = 0.0;
    long count = 0;
    const DistillConfig plain;
    for (const auto& ep : episodes) {
        ad::Tape tape;
        const StudentGraph graph(tape, model);
        for (const auto& terms : student_episode_terms(graph, ep, {}, plain)) {
            total += terms.nll.scalar();
            ++count;
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

StudentTrainingResult train_student(std::span<const Episode> train, std::span<const Episode> val,
                                    const TeacherSet& teachers, const DistillConfig& distill,
                                    const TrainConfig& train_config, const ModelConfig& model_config,
                                    const DatasetContext& data, const EpochLogSink& on_epoch) {
    model_config.validate();
    train_config.validate();
    distill.validate(model_config.vocab_size);
    if (train.empty()) throw std::invalid_argument("train_student: empty training set");
    if (distill.needs_teachers() && teachers.empty()) {
        throw std::invalid_argument("train_student: mode '" + std::string(to_string(distill.mode)) +
                                    "' requires teachers");
    }
    for (const auto* t : [&] {
             std::vector<const TeacherModel*> all;
             for (const auto& [d, m] : teachers.by_domain) all.push_back(&m);
             if (teachers.universal) all.push_back(&*teachers.universal);
             return all;
         }()) {
        if (t->config().vocab_size != model_config.vocab_size || t->config().hidden_dim != model_config.hidden_dim) {
            throw std::invalid_argument("train_student: teacher '" + t->domain() +
                                        "' does not share the student's vocabulary size and hidden_dim");
        }
    }

    StudentTrainingResult result{StudentModel(model_config), 0, {}, {}};
    StudentModel& student = result.model;
    const auto train_enc = encode_all(train, data.vocabulary, model_config);
    const auto val_enc = encode_all(val, data.vocabulary, model_config);

    // Teachers are frozen, so their guidance is computed once.
    std::vector<std::vector<std::optional<DistillTargets>>> targets(train_enc.size());
    std::set<std::string> warned;
    for (std::size_t e = 0; e < train_enc.size(); ++e) {
        for (const auto& turn : train_enc[e].turns) {
            const auto& domain = turn.source->domain;
            const TeacherModel* teacher = teachers.route(domain);
            if (domain && !teacher && distill.needs_teachers() && warned.insert(*domain).second) {
                result.warnings.push_back("no teacher for domain '" + *domain + "'; NLL-only fallback");
            }
            if (teacher && distill.needs_teachers()) {
                targets[e].push_back(
                    teacher_targets(*teacher, make_teacher_input(*teacher, turn, data.ontology), distill.mode, distill.k));
            } else {
                targets[e].push_back(std::nullopt);
            }
        }
    }
    AdamOptimizer optimizer(student.parameters(), train_config);
    Rng rng(train_config.seed);
    std::vector<std::size_t> order(train_enc.size());
    std::iota(order.begin(), order.end(), 0);
    std::tuple<double, double, double> best{-1.0, -1.0, -1e300};
    std::optional<StudentModel> best_model;
    int stale = 0;
    for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        StudentEpochLog log;
        log.epoch = epoch;
        double nll_sum = 0.0, kdo_sum = 0.0, kdp_sum = 0.0;
        long turns = 0, kdo_n = 0, kdp_n = 0;
        student.parameters().zero_grad();
        int pending = 0;
        for (std::size_t e : order) {
            ad::Tape tape;
            const StudentGraph graph(tape, student);
            const auto terms = student_episode_terms(graph, train_enc[e], targets[e], distill);
            std::vector<ad::Var> totals;
            for (const auto& t : terms) {
                totals.push_back(t.total);
                nll_sum += t.nll.scalar();
                ++turns;
                if (t.kd_output.valid()) {
                    kdo_sum += t.kd_output.scalar();
                    ++kdo_n;
                }
                if (t.kd_policy.valid()) {
                    kdp_sum += t.kd_policy.scalar();
                    ++kdp_n;
                }
            }
            for (const auto& turn : train_enc[e].turns) {
                const auto& domain = turn.source->domain;
                const TeacherModel* teacher = distill.needs_teachers() ? teachers.route(domain) : nullptr;
                if (!domain) {
                    ++log.none_turns;
                } else if (teacher) {
                    ++log.teacher_turns[teacher->domain()];
                } else {
                    ++log.unrouted_turns;
                }
            }
            if (!totals.empty()) tape.backward(ad::sum(totals));
            if (++pending == train_config.batch_size) {
                optimizer.step(student.parameters());
                student.parameters().zero_grad();
                pending = 0;
            }
        }
        if (pending > 0) {
            optimizer.step(student.parameters());
            student.parameters().zero_grad();
        }
        log.nll = turns > 0 ? nll_sum / static_cast<double>(turns) : 0.0;
        log.kd_output = kdo_n > 0 ? kdo_sum / static_cast<double>(kdo_n) : 0.0;
        log.kd_policy = kdp_n > 0 ? kdp_sum / static_cast<double>(kdp_n) : 0.0;
        if (!val.empty()) {
            log.val_nll = student_mean_nll(student, val_enc);
            const EvalReport report = evaluate_corpus(student, val, data.database, data.vocabulary);
            log.val_inform = report.inform_rate;
            log.val_success = report.success_rate;
        }
        if (on_epoch) on_epoch(log);
        result.log.push_back(log);

        const std::tuple<double, double, double> score{log.val_success, log.val_inform, -log.val_nll};
        if (val.empty() || score > best) {
            best = score;
            result.best_epoch = epoch;
            best_model = student;
            stale = 0;
        } else if (train_config.patience > 0 && ++stale >= train_config.patience) {
            break;
        }
    }
    if (best_model) result.model = std::move(*best_model);
    return result;
}

}  // namespace tsdial
