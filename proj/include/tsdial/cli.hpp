#pragma once

#include "tsdial/distill.hpp"
#include "tsdial/train.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tsdial {

/// Single source of truth for one experiment; command-line flags override it.
struct ExperimentConfig {
    std::filesystem::path corpus;
    std::filesystem::path ontology;
    std::filesystem::path database;
    std::filesystem::path output_dir;
    ModelConfig model;
    TrainConfig teacher_train;
    TrainConfig student_train;
    DistillConfig distill;
    /// Episode shares for train / val; the remainder is the test split.
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    std::string eval_split = "test";
    std::string mode_tag;

    /// Checks value ranges and that every non-empty path exists.
    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ExperimentConfig from_json(const nlohmann::ordered_json& j);
    std::string dump() const;  // to_json() with two-space indent and trailing newline
    static ExperimentConfig load(const std::filesystem::path& path);
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "TSDIAL_CONFIG";

/// 64-bit FNV-1a, used for manifest checksums.
std::uint64_t fnv1a64(std::string_view bytes);

/// Entry point of the `tsdial` tool. `args` excludes the program name.
/// Returns 0 on success, 1 on runtime failure, 2 on usage error.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace tsdial
