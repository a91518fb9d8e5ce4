#include "tsdial/cli.hpp"

#include "tsdial/checkpoint.hpp"
#include "tsdial/eval.hpp"
#include "tsdial/random.hpp"
#include "tsdial/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace tsdial {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Bad flags or missing inputs; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---- experiment config -------------------------------------------------------

void ExperimentConfig::validate() const {
    model.validate();
    teacher_train.validate();
    student_train.validate();
    distill.validate(model.vocab_size);
    if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0) {
        throw std::invalid_argument("experiment config: split fractions must be positive and sum to at most 1");
    }
    if (eval_split != "train" && eval_split != "val" && eval_split != "test") {
        throw std::invalid_argument("experiment config: eval_split must be train, val or test");
    }
    for (const fs::path* p : {&corpus, &ontology, &database}) {
        if (!p->empty() && !fs::exists(*p)) {
            throw std::invalid_argument("experiment config: path '" + p->string() + "' does not exist");
        }
    }
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["paths"] = {{"corpus", corpus.string()},
                  {"ontology", ontology.string()},
                  {"database", database.string()},
                  {"output_dir", output_dir.string()}};
    j["model"] = model.to_json();
    j["teacher_train"] = teacher_train.to_json();
    j["student_train"] = student_train.to_json();
    j["distill"] = distill.to_json();
    j["split"] = {{"train_fraction", train_fraction}, {"val_fraction", val_fraction}, {"eval_split", eval_split}};
    j["mode_tag"] = mode_tag;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const ordered_json& j) {
    ExperimentConfig c;
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        c.corpus = p.value("corpus", std::string());
        c.ontology = p.value("ontology", std::string());
        c.database = p.value("database", std::string());
        c.output_dir = p.value("output_dir", std::string());
    }
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("teacher_train")) c.teacher_train = TrainConfig::from_json(j.at("teacher_train"));
    if (j.contains("student_train")) c.student_train = TrainConfig::from_json(j.at("student_train"));
    if (j.contains("distill")) c.distill = DistillConfig::from_json(j.at("distill"));
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.train_fraction = s.value("train_fraction", c.train_fraction);
        c.val_fraction = s.value("val_fraction", c.val_fraction);
        c.eval_split = s.value("eval_split", c.eval_split);
    }
    c.mode_tag = j.value("mode_tag", c.mode_tag);
    return c;
}

std::string ExperimentConfig::dump() const { return tsdial::dump(to_json()); }

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const ordered_json::parse_error& e) {
        throw std::invalid_argument("config '" + path.string() + "': " + e.what());
    }
    ExperimentConfig c = from_json(j);
    c.validate();
    return c;
}

// ---- commands ----------------------------------------------------------------

namespace {

struct PreparedData {
    Ontology ontology;
    Database database;
    Vocabulary vocabulary;
    ordered_json manifest;
};

PreparedData load_prepared(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        throw UsageError("'" + dir.string() + "' is not a prepared data directory (no manifest.json)");
    }
    PreparedData d;
    d.ontology = load_ontology(dir / "ontology.json");
    d.database = database_from_json(ordered_json::parse(read_file(dir / "database.json")), d.ontology);
    d.vocabulary = Vocabulary::from_json(ordered_json::parse(read_file(dir / "vocab.json")));
    d.manifest = ordered_json::parse(read_file(dir / "manifest.json"));
    return d;
}

std::vector<Episode> load_split(const fs::path& dir, const PreparedData& data, const std::string& split,
                                const std::optional<std::string>& domain = std::nullopt) {
    const fs::path path = domain ? dir / "domains" / *domain / (split + ".json") : dir / (split + ".json");
    if (!fs::exists(path)) return {};
    return load_corpus(path, data.ontology, &data.database);
}

ExperimentConfig resolve_config(const std::string& flag) {
    std::string path = flag;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
    }
    if (path.empty()) return {};
    if (!fs::exists(path)) throw UsageError("config file '" + path + "' does not exist");
    return ExperimentConfig::load(path);
}

ModelConfig model_for(const ExperimentConfig& cfg, const Vocabulary& vocabulary) {
    ModelConfig m = cfg.model;
    m.vocab_size = vocabulary.size();
    return m;
}

ordered_json split_stats(std::span<const Episode> episodes) {
    int turns = 0, tagged = 0;
    for (const auto& ep : episodes) {
        for (const auto& t : ep.turns) {
            ++turns;
            tagged += t.domain.has_value();
        }
    }
    return {{"episodes", episodes.size()}, {"turns", turns}, {"tagged_turns", tagged}, {"none_turns", turns - tagged}};
}

// prepare ----------------------------------------------------------------------

struct PrepareOptions {
    std::string corpus, ontology, database, out, synthetic, config;
    std::uint64_t seed = 1;
    bool seed_given = false;
};

int cmd_prepare(const PrepareOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o.config);
    const std::string corpus_path = !o.corpus.empty() ? o.corpus : cfg.corpus.string();
    const std::string ontology_path = !o.ontology.empty() ? o.ontology : cfg.ontology.string();
    const std::string database_path = !o.database.empty() ? o.database : cfg.database.string();
    const std::string out_dir = !o.out.empty() ? o.out : cfg.output_dir.string();
    if (out_dir.empty()) throw UsageError("prepare: --out is required");
    const std::uint64_t seed = o.seed_given ? o.seed : cfg.student_train.seed;

    Ontology ontology;
    Database database;
    std::vector<Episode> raw;
    ordered_json source;
    if (!o.synthetic.empty()) {
        if (o.synthetic != "standard" && !fs::exists(o.synthetic)) throw UsageError("synthetic spec '" + o.synthetic + "' does not exist");
        const SynthesisSpec spec =
            o.synthetic == "standard" ? SynthesisSpec::standard()
                                      : SynthesisSpec::from_json(ordered_json::parse(read_file(o.synthetic)));
        SyntheticCorpus syn = generate_synthetic_corpus(spec, seed);
        ontology = std::move(syn.ontology);
        database = std::move(syn.database);
        raw = std::move(syn.episodes);
        source = {{"kind", "synthetic"}, {"spec", spec.to_json()}};
    } else {
        if (ontology_path.empty() || !fs::exists(ontology_path)) {
            throw UsageError("prepare: ontology path '" + ontology_path + "' is missing");
        }
        if (corpus_path.empty() || !fs::exists(corpus_path)) {
            throw UsageError("prepare: corpus path '" + corpus_path + "' is missing");
        }
        if (database_path.empty() || !fs::exists(database_path)) {
            throw UsageError("prepare: database path '" + database_path + "' is missing");
        }
        ontology = load_ontology(ontology_path);
        database = load_database(database_path, ontology);
        raw = load_corpus(corpus_path, ontology, &database);
        source = {{"kind", "files"},
                  {"corpus", fs::path(corpus_path).filename().string()},
                  {"corpus_fnv1a", hex64(fnv1a64(read_file(corpus_path)))}};
    }
    if (raw.empty()) throw CorpusError("prepare: corpus has no episodes");

    TaggingDiagnostics diagnostics;
    std::vector<Episode> episodes;
    episodes.reserve(raw.size());
    for (const auto& ep : raw) episodes.push_back(tag_turn_domains(delexicalize(ep, ontology, database), ontology, &diagnostics));

    std::vector<std::size_t> order(episodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    const auto n = episodes.size();
    const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(n)));
    std::map<std::string, std::vector<Episode>> splits{{"train", {}}, {"val", {}}, {"test", {}}};
    for (std::size_t i = 0; i < n; ++i) {
        const char* name = i < n_train ? "train" : i < n_train + n_val ? "val" : "test";
        splits[name].push_back(episodes[order[i]]);
    }
    const Vocabulary vocabulary = build_vocabulary(splits["train"], cfg.model.vocab_size);

    const fs::path dir(out_dir);
    std::map<std::string, std::string> files;
    files["ontology.json"] = dump(ontology.to_json());
    files["database.json"] = dump(database_to_json(database));
    files["vocab.json"] = dump(vocabulary.to_json());
    ordered_json split_json = ordered_json::object();
    ordered_json domain_json = ordered_json::object();
    for (const auto& d : ontology.domain_names()) domain_json[d] = ordered_json::object();
    for (const char* name : {"train", "val", "test"}) {
        const auto& eps = splits[name];
        files[std::string(name) + ".json"] = dump(corpus_to_json(eps));
        split_json[name] = split_stats(eps);
        auto by_domain = split_by_domain(eps);
        for (const auto& d : ontology.domain_names()) {
            const auto& pieces = by_domain[d];
            files["domains/" + d + "/" + name + ".json"] = dump(corpus_to_json(pieces));
            domain_json[d][name] = split_stats(pieces);
        }
    }

    ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["seed"] = seed;
    manifest["source"] = source;
    manifest["domains"] = ontology.domain_names();
    manifest["vocab_size"] = vocabulary.size();
    manifest["multi_domain_turns"] = diagnostics.multi_domain_turns.size();
    manifest["splits"] = split_json;
    manifest["domain_splits"] = domain_json;
    ordered_json checksums = ordered_json::object();
    for (const auto& [name, bytes] : files) {
        write_file(dir / name, bytes);
        checksums[name] = hex64(fnv1a64(bytes));
    }
    manifest["checksums_fnv1a"] = checksums;
    write_file(dir / "manifest.json", dump(manifest));

    out << "prepared " << n << " episodes into " << dir.string() << " (train " << splits["train"].size()
        << ", val " << splits["val"].size() << ", test " << splits["test"].size() << "; vocabulary "
        << vocabulary.size() << ")\n";
    return 0;
}

// train-teacher ---------------------------------------------------------------

struct TeacherOptions {
    std::string data_dir, domain, out, config;
    int jobs = 1;
    int epochs = 0;
    bool keep_epochs = false;
};

std::string train_one_teacher(const std::string& domain, const fs::path& data_dir, const PreparedData& data,
                              const ExperimentConfig& cfg, const TeacherOptions& o, const fs::path& out_dir) {
    const bool universal = domain == kUniversalTeacher;
    const auto train = universal ? load_split(data_dir, data, "train") : load_split(data_dir, data, "train", domain);
    const auto val = universal ? load_split(data_dir, data, "val") : load_split(data_dir, data, "val", domain);
    if (train.empty()) throw std::runtime_error("no training episodes for domain '" + domain + "'");
    TrainConfig tc = cfg.teacher_train;
    if (o.epochs > 0) tc.epochs = o.epochs;
    const DatasetContext ctx{data.ontology, data.vocabulary, data.database};

    std::string log;
    const fs::path epoch_dir = out_dir / ("teacher_" + domain + "_epochs");
    auto sink = [&](TeacherCheckpoint& ckpt) {
        if (o.keep_epochs) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03d.ckpt", ckpt.epoch);
            write_file(epoch_dir / name, ckpt.blob);
            // Relative to the output directory so logs do not depend on where it lives.
            ckpt.path = epoch_dir.filename() / name;
        }
        ordered_json line = ckpt.to_json();
        line["domain"] = domain;
        log += line.dump() + "\n";
    };
    const auto checkpoints = train_teacher(domain, train, val, ctx, model_for(cfg, data.vocabulary), tc, sink);
    const std::size_t best = best_checkpoint_index(checkpoints);
    write_file(out_dir / ("teacher_" + domain + ".ckpt"), checkpoints[best].blob);
    write_file(out_dir / ("teacher_" + domain + ".log.jsonl"), log);

    ordered_json selection;
    selection["domain"] = domain;
    selection["selected_epoch"] = checkpoints[best].epoch;
    selection["criterion"] = "val success, then val inform, then lower val nll";
    selection["train_config"] = tc.to_json();
    ordered_json rows = ordered_json::array();
    for (const auto& c : checkpoints) rows.push_back(c.to_json());
    selection["checkpoints"] = rows;
    write_file(out_dir / ("teacher_" + domain + ".selection.json"), dump(selection));

    char line[200];
    std::snprintf(line, sizeof line, "teacher %-12s epoch %3d  val success %5.1f  inform %5.1f  nll %.4f\n",
                  domain.c_str(), checkpoints[best].epoch, checkpoints[best].val_success,
                  checkpoints[best].val_inform, checkpoints[best].val_nll);
    return line;
}

int cmd_train_teacher(const TeacherOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o.config);
    const fs::path data_dir(o.data_dir);
    const PreparedData data = load_prepared(data_dir);
    const fs::path out_dir = o.out.empty() ? data_dir / "teachers" : fs::path(o.out);

    std::vector<std::string> domains;
    const auto available = data.ontology.domain_names();
    if (o.domain == "all") {
        domains = available;
    } else if (o.domain == kUniversalTeacher || data.ontology.has_domain(o.domain)) {
        domains = {o.domain};
    } else {
        std::string list;
        for (const auto& d : available) list += (list.empty() ? "" : ", ") + d;
        throw std::runtime_error("unknown domain '" + o.domain + "'; available: " + list + ", " +
                                 std::string(kUniversalTeacher));
    }
    fs::create_directories(out_dir);

    std::vector<std::string> lines(domains.size());
    std::vector<std::string> errors(domains.size());
    const int jobs = std::max(1, std::min<int>(o.jobs, static_cast<int>(domains.size())));
    std::size_t next = 0;
    std::mutex lock;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> g(lock);
                if (next >= domains.size()) return;
                i = next++;
            }
            try {
                lines[i] = train_one_teacher(domains[i], data_dir, data, cfg, o, out_dir);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < domains.size(); ++i) {
        if (!errors[i].empty()) throw std::runtime_error("teacher '" + domains[i] + "': " + errors[i]);
        out << lines[i];
    }
    return 0;
}

// train-student ---------------------------------------------------------------

struct StudentOptions {
    std::string data_dir, teachers, mode, out, config;
    int k = 0;
    int epochs = 0;
};

int cmd_train_student(const StudentOptions& o, std::ostream& out) {
    ExperimentConfig cfg = resolve_config(o.config);
    const fs::path data_dir(o.data_dir);
    const PreparedData data = load_prepared(data_dir);
    DistillConfig distill = cfg.distill;
    const bool universal = o.mode == "universal";
    if (!o.mode.empty()) distill.mode = universal ? DistillMode::All : distill_mode_from_string(o.mode);
    if (o.k > 0) distill.k = o.k;
    const ModelConfig model_cfg = model_for(cfg, data.vocabulary);
    try {
        distill.validate(model_cfg.vocab_size);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    TrainConfig tc = cfg.student_train;
    if (o.epochs > 0) tc.epochs = o.epochs;

    TeacherSet teachers;
    if (distill.needs_teachers()) {
        if (o.teachers.empty() || o.teachers == "none") {
            throw UsageError("mode '" + std::string(universal ? "universal" : to_string(distill.mode)) +
                             "' needs --teachers DIR");
        }
        const fs::path tdir(o.teachers);
        if (universal) {
            const fs::path p = tdir / ("teacher_" + std::string(kUniversalTeacher) + ".ckpt");
            if (!fs::exists(p)) throw UsageError("missing universal teacher '" + p.string() + "'");
            teachers.universal = teacher_from_checkpoint(load_checkpoint(p));
        } else {
            for (const auto& d : data.ontology.domain_names()) {
                const fs::path p = tdir / ("teacher_" + d + ".ckpt");
                if (fs::exists(p)) teachers.by_domain.emplace(d, teacher_from_checkpoint(load_checkpoint(p)));
            }
            if (teachers.empty()) throw UsageError("no teacher checkpoints in '" + tdir.string() + "'");
        }
    }

    const auto train = load_split(data_dir, data, "train");
    const auto val = load_split(data_dir, data, "val");
    const fs::path out_dir = o.out.empty() ? data_dir / "student" : fs::path(o.out);
    fs::create_directories(out_dir);
    std::string log;
    const DatasetContext ctx{data.ontology, data.vocabulary, data.database};
    const StudentTrainingResult result = train_student(train, val, teachers, distill, tc, model_cfg, ctx,
                                                       [&](const StudentEpochLog& row) {
                                                           log += row.to_json().dump() + "\n";
                                                       });
    save_checkpoint(out_dir / "student.ckpt", make_checkpoint(result.model, data.vocabulary, data.ontology));
    write_file(out_dir / "student.log.jsonl", log);
    ordered_json summary;
    summary["mode"] = universal ? "universal" : std::string(to_string(distill.mode));
    summary["distill"] = distill.to_json();
    summary["train_config"] = tc.to_json();
    summary["model_config"] = model_cfg.to_json();
    summary["best_epoch"] = result.best_epoch;
    summary["warnings"] = result.warnings;
    if (!cfg.mode_tag.empty()) summary["mode_tag"] = cfg.mode_tag;
    write_file(out_dir / "student.summary.json", dump(summary));
    for (const auto& w : result.warnings) out << "warning: " << w << "\n";
    const auto& best = result.log[static_cast<std::size_t>(result.best_epoch - 1)];
    char line[200];
    std::snprintf(line, sizeof line, "student (%s) best epoch %d  val success %.1f  inform %.1f\n",
                  summary["mode"].get<std::string>().c_str(), result.best_epoch, best.val_success, best.val_inform);
    out << line;
    return 0;
}

// eval --------------------------------------------------------------------------

struct EvalOptions {
    std::string checkpoint, data_dir, out, split, label, config;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o.config);
    const fs::path data_dir(o.data_dir);
    const PreparedData data = load_prepared(data_dir);
    const std::string split = o.split.empty() ? cfg.eval_split : o.split;
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    EvalReport report;
    if (ckpt.kind == ModelKind::Student) {
        const auto episodes = load_split(data_dir, data, split);
        report = evaluate_corpus(student_from_checkpoint(ckpt), episodes, data.database, ckpt.vocabulary);
    } else {
        const TeacherModel teacher = teacher_from_checkpoint(ckpt);
        const auto episodes = teacher.universal() ? load_split(data_dir, data, split)
                                                  : load_split(data_dir, data, split, teacher.domain());
        report = evaluate_corpus(teacher, episodes, data.database, data.ontology, ckpt.vocabulary);
    }
    report.label = !o.label.empty() ? o.label : !cfg.mode_tag.empty() ? cfg.mode_tag : fs::path(o.checkpoint).stem().string();
    if (!o.out.empty()) {
        fs::path txt = o.out;
        txt.replace_extension(".txt");
        write_file(o.out, dump(report.to_json()));
        write_file(txt, report.to_text());
    }
    out << report.to_text();
    return 0;
}

// chat ------------------------------------------------------------------------

int cmd_chat(const std::string& checkpoint, std::istream& in, std::ostream& out, std::ostream& err) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    if (ckpt.kind != ModelKind::Student) {
        throw UsageError("chat needs a student checkpoint; teachers require annotated belief states");
    }
    const StudentModel model = student_from_checkpoint(ckpt);
    const ModelConfig& mc = model.config();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mc.hidden_dim, 1);
    Eigen::MatrixXd c = h;
    std::string line;
    while (std::getline(in, line)) {
        if (line == "/quit") return 0;
        if (line == "/reset") {
            h.setZero();
            c.setZero();
            continue;
        }
        const Tokens tokens = tokenize(line);
        if (tokens.empty()) continue;
        try {
            std::vector<TokenId> ids = ckpt.vocabulary.encode(tokens);
            if (static_cast<int>(ids.size()) > mc.max_input_len) ids.resize(static_cast<std::size_t>(mc.max_input_len));
            ad::Tape tape;
            const StudentGraph graph(tape, model);
            const UtteranceEncoding u = graph.encode_utterance(ids);
            auto [action, next] = graph.student_action(u.final_state, {tape.constant(h), tape.constant(c)});
            const auto reply = graph.generate_response(action, u.outputs, mc.max_decode_len);
            h = next.h.value();
            c = next.c.value();
            out << join_tokens(ckpt.vocabulary.decode(reply)) << "\n";
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
        }
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Teacher-student distillation for task-oriented dialogue generation", "tsdial"};
    app.require_subcommand(1);

    PrepareOptions prep;
    auto* prepare = app.add_subcommand("prepare", "Delexicalize, tag and split a corpus");
    prepare->add_option("--corpus", prep.corpus, "Corpus JSON");
    prepare->add_option("--ontology", prep.ontology, "Ontology JSON");
    prepare->add_option("--database", prep.database, "Database JSON");
    prepare->add_option("--out", prep.out, "Output data directory");
    prepare->add_option("--synthetic", prep.synthetic, "Synthesis spec JSON, or 'standard'");
    auto* seed_opt = prepare->add_option("--seed", prep.seed, "Seed for synthesis and splitting");
    prepare->add_option("--config", prep.config, "Experiment config");

    TeacherOptions teach;
    auto* train_teacher_cmd = app.add_subcommand("train-teacher", "Train and select domain teachers");
    train_teacher_cmd->add_option("--data-dir", teach.data_dir, "Prepared data directory")->required();
    train_teacher_cmd->add_option("--domain", teach.domain, "Domain, 'all' or 'universal'")->required();
    train_teacher_cmd->add_option("--out", teach.out, "Output directory (default DATA/teachers)");
    train_teacher_cmd->add_option("--config", teach.config, "Experiment config");
    train_teacher_cmd->add_option("--jobs", teach.jobs, "Parallel teacher jobs")->check(CLI::PositiveNumber);
    train_teacher_cmd->add_option("--epochs", teach.epochs, "Override epoch count")->check(CLI::PositiveNumber);
    train_teacher_cmd->add_flag("--keep-epochs", teach.keep_epochs, "Write every epoch's checkpoint");

    StudentOptions stud;
    auto* train_student_cmd = app.add_subcommand("train-student", "Train the student");
    train_student_cmd->add_option("--data-dir", stud.data_dir, "Prepared data directory")->required();
    train_student_cmd->add_option("--teachers", stud.teachers, "Teacher directory or 'none'");
    train_student_cmd->add_option("--mode", stud.mode, "none, full, topk, policy, all or universal")
        ->check(CLI::IsMember({"none", "full", "topk", "policy", "all", "universal"}));
    train_student_cmd->add_option("--k", stud.k, "Top-k support size")->check(CLI::PositiveNumber);
    train_student_cmd->add_option("--out", stud.out, "Output directory (default DATA/student)");
    train_student_cmd->add_option("--config", stud.config, "Experiment config");
    train_student_cmd->add_option("--epochs", stud.epochs, "Override epoch count")->check(CLI::PositiveNumber);

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--data-dir", ev.data_dir, "Prepared data directory")->required();
    eval_cmd->add_option("--out", ev.out, "Report JSON path (a .txt table is written beside it)");
    eval_cmd->add_option("--split", ev.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
    eval_cmd->add_option("--label", ev.label, "Row label for the report");
    eval_cmd->add_option("--config", ev.config, "Experiment config");

    std::string chat_ckpt;
    auto* chat = app.add_subcommand("chat", "Interactive session with a student");
    chat->add_option("--checkpoint", chat_ckpt, "Student checkpoint")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    prep.seed_given = seed_opt->count() > 0;

    try {
        if (prepare->parsed()) return cmd_prepare(prep, out);
        if (train_teacher_cmd->parsed()) return cmd_train_teacher(teach, out);
        if (train_student_cmd->parsed()) return cmd_train_student(stud, out);
        if (eval_cmd->parsed()) return cmd_eval(ev, out);
        if (chat->parsed()) return cmd_chat(chat_ckpt, in, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace tsdial
