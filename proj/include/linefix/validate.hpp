#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace linefix::validate {

struct ProjectConfig {
    std::filesystem::path root;
    std::string build_cmd;
    std::string test_cmd;
    int timeout_s = 60;
    std::map<std::string, std::string> env;
};

ProjectConfig project_config_from_json(const nlohmann::json& j);
nlohmann::json project_config_to_json(const ProjectConfig& config);

struct PatchCandidate {
    std::string file_path;  // relative to the project root
    int line_no = 0;        // 1-based
    std::string original_line;
    std::string replacement_line;
    double score = 0.0;  // generation log-probability
    std::int64_t source_checkpoint_id = 0;

    bool operator==(const PatchCandidate&) const = default;
};

enum class Verdict { Plausible, CompileFail, TestFail, Timeout, ApplyFail };

const char* verdict_name(Verdict v);

struct ValidationResult {
    PatchCandidate candidate;
    bool compiled = false;
    bool tests_passed = false;
    bool plausible = false;
    std::int64_t wall_time_ms = 0;
    std::string log_excerpt;  // last 4 KiB of build+test output
    Verdict verdict = Verdict::ApplyFail;
};

class ApplyError : public std::runtime_error {
public:
    enum class Kind { LineMismatch, OutOfRange, MissingFile };

    ApplyError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Replaces line `line_no`, leaving every other line byte-identical.
// Refuses when the current line does not match original_line modulo
// whitespace (stale candidate).
std::string apply_patch_to_content(const std::string& content, const PatchCandidate& candidate);

void apply_patch(const std::filesystem::path& workdir, const PatchCandidate& candidate);

// Runs build_cmd then test_cmd against a fresh copy of the project tree;
// the original tree is never touched. Timeouts are verdicts, not errors.
ValidationResult validate(const PatchCandidate& candidate, const ProjectConfig& config);

// Validates candidates in input order; `parallelism` worker threads, one
// isolated tree copy per candidate. Per-candidate failures become results,
// never batch aborts.
std::vector<ValidationResult> validate_all(const std::vector<PatchCandidate>& candidates,
                                           const ProjectConfig& config, int parallelism = 1);

// Recursive copy skipping ".git"; used for validation sandboxes.
void copy_tree(const std::filesystem::path& from, const std::filesystem::path& to);

// Order-independent content hash over (relative path, bytes), ".git" skipped.
std::uint64_t hash_tree(const std::filesystem::path& root);

}  // namespace linefix::validate
