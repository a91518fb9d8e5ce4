#pragma once

#include "tsdial/model.hpp"

#include <filesystem>
#include <string>
#include <string_view>

// Binary container:
//   "TSDCKPT\0" | u32 version | u64 header length | header JSON
//   | u32 tensor count | per tensor: u32 name length, name, u32 rows,
//     u32 cols, rows*cols little-endian float32 values (row-major)
namespace tsdial {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { Student, Teacher };

struct Checkpoint {
    ModelKind kind = ModelKind::Student;
    std::string domain;  // teachers only
    int belief_dim = 0;  // teachers only
    ModelConfig config;
    Vocabulary vocabulary;
    Ontology ontology;
    ParameterSet parameters;
};

Checkpoint make_checkpoint(const StudentModel& model, const Vocabulary& vocabulary, const Ontology& ontology);
Checkpoint make_checkpoint(const TeacherModel& model, const Vocabulary& vocabulary, const Ontology& ontology);

StudentModel student_from_checkpoint(const Checkpoint& checkpoint);
TeacherModel teacher_from_checkpoint(const Checkpoint& checkpoint);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter through float32, matching a save/load cycle.
void round_to_storage_precision(ParameterSet& params);

}  // namespace tsdial
