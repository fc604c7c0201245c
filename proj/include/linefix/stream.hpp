#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "linefix/diff.hpp"

namespace linefix::stream {

enum class BuildStatus { Passing, Failing };

struct CommitEvent {
    std::string repo_id;
    std::string commit_sha;
    std::string parent_sha;
    std::int64_t timestamp = 0;  // seconds since epoch
    BuildStatus build_status = BuildStatus::Passing;
    std::string diff_text;

    bool operator==(const CommitEvent&) const = default;
};

// One single-line replacement mined from a commit: the training unit.
struct TrainingPair {
    std::string file_path;
    int line_no = 0;  // 1-based position of buggy_line in the pre-commit file
    std::string buggy_line;
    std::string fixed_line;
    std::vector<std::string> context_before;
    std::vector<std::string> context_after;
    std::string source_sha;

    bool operator==(const TrainingPair&) const = default;
};

struct ExtractOptions {
    int context_lines = 2;
    // Off by default: replacements only. When set, pure one-line insertions
    // and deletions also qualify (empty buggy or fixed line).
    bool include_pure_edits = false;
    std::string source_sha;
};

// Keeps hunks with exactly one removed and one added line, drops
// whitespace-only changes. Non-qualifying hunks are silently skipped.
std::vector<TrainingPair> extract_one_line_changes(const std::vector<diff::Hunk>& hunks,
                                                   const ExtractOptions& options = {});

class RepoUnreadable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MineOptions {
    std::string range = "HEAD";
    // Sidecar build-status oracle: one "<sha> <Passing|Failing>" per line.
    // Without it every commit counts as passing (training-only replays).
    std::optional<std::filesystem::path> status_file;
    int diff_context = 3;  // -U<n> passed to git
};

struct MineStats {
    int commits = 0;
    int reordered_events = 0;  // non-monotonic timestamps, stream was re-sorted
};

// Replays a local repository's history as an event stream, oldest first.
// Deterministic: the same repository yields a byte-identical stream.
std::vector<CommitEvent> mine_repository(const std::filesystem::path& repo_path,
                                         const MineOptions& options = {},
                                         MineStats* stats = nullptr);

nlohmann::json pair_to_json(const TrainingPair& pair, std::int64_t timestamp);
TrainingPair pair_from_json(const nlohmann::json& j);

}  // namespace linefix::stream
