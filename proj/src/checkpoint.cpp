#include "tsdial/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tsdial {

using nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'T', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        out.append(bytes.data(), bytes.size());
    } else {
        char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        out.append(bytes, sizeof(T));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        if constexpr (std::endian::native == std::endian::big) {
            std::array<char, sizeof(T)> raw;
            std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
            std::reverse(raw.begin(), raw.end());
            value = std::bit_cast<T>(raw);
        } else {
            std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        std::string_view s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

ordered_json header_json(const Checkpoint& c) {
    ordered_json j;
    j["format_version"] = kCheckpointVersion;
    j["kind"] = c.kind == ModelKind::Student ? "student" : "teacher";
    if (c.kind == ModelKind::Teacher) {
        j["domain"] = c.domain;
        j["belief_dim"] = c.belief_dim;
    }
    j["model_config"] = c.config.to_json();
    j["vocabulary"] = c.vocabulary.to_json();
    j["ontology"] = c.ontology.to_json();
    return j;
}

}  // namespace

Checkpoint make_checkpoint(const StudentModel& model, const Vocabulary& vocabulary, const Ontology& ontology) {
    return {ModelKind::Student, "", 0, model.config(), vocabulary, ontology, model.parameters()};
}

Checkpoint make_checkpoint(const TeacherModel& model, const Vocabulary& vocabulary, const Ontology& ontology) {
    return {ModelKind::Teacher, model.domain(), model.belief_dim(), model.config(), vocabulary, ontology,
            model.parameters()};
}

StudentModel student_from_checkpoint(const Checkpoint& checkpoint) {
    if (checkpoint.kind != ModelKind::Student) throw CheckpointError("checkpoint holds a teacher, expected a student");
    return StudentModel(checkpoint.config, checkpoint.parameters);
}

TeacherModel teacher_from_checkpoint(const Checkpoint& checkpoint) {
    if (checkpoint.kind != ModelKind::Teacher) throw CheckpointError("checkpoint holds a student, expected a teacher");
    return TeacherModel(checkpoint.config, checkpoint.domain, checkpoint.belief_dim, checkpoint.parameters);
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string header = header_json(checkpoint).dump();
    put<std::uint64_t>(out, header.size());
    out += header;
    const auto& items = checkpoint.parameters.items();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(items.size()));
    for (const auto& p : items) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
        for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.value.cols(); ++c) put<float>(out, static_cast<float>(p.value(r, c)));
        }
    }
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported; expected version " +
                              std::to_string(kCheckpointVersion));
    }
    const auto header_len = in.get<std::uint64_t>();
    ordered_json header;
    try {
        header = ordered_json::parse(in.take(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint header: ") + e.what());
    }
    Checkpoint c;
    try {
        if (header.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
            throw CheckpointError("checkpoint header version mismatch; expected version " +
                                  std::to_string(kCheckpointVersion));
        }
        const std::string kind = header.at("kind").get<std::string>();
        if (kind == "student") {
            c.kind = ModelKind::Student;
        } else if (kind == "teacher") {
            c.kind = ModelKind::Teacher;
            c.domain = header.at("domain").get<std::string>();
            c.belief_dim = header.at("belief_dim").get<int>();
        } else {
            throw CheckpointError("checkpoint kind '" + kind + "' is unknown");
        }
        c.config = ModelConfig::from_json(header.at("model_config"));
        c.vocabulary = Vocabulary::from_json(header.at("vocabulary"));
        c.ontology = Ontology::from_json(header.at("ontology"));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint header: ") + e.what());
    }
    const auto count = in.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = in.get<std::uint32_t>();
        std::string name(in.take(name_len));
        const auto rows = in.get<std::uint32_t>();
        const auto cols = in.get<std::uint32_t>();
        ad::Parameter& p = c.parameters.add(std::move(name), rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t col = 0; col < cols; ++col) p.value(r, col) = static_cast<double>(in.get<float>());
        }
    }
    if (!in.done()) throw CheckpointError("checkpoint has trailing bytes");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = encode_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return decode_checkpoint(ss.str());
    } catch (const CheckpointError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

void round_to_storage_precision(ParameterSet& params) {
    for (auto& p : params.items()) {
        p.value = p.value.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
    }
}

}  // namespace tsdial
