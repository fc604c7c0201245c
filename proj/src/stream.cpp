#include "linefix/stream.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "linefix/subprocess.hpp"
#include "linefix/textutil.hpp"

namespace linefix::stream {

namespace {

// git's well-known empty-tree object; used to diff root commits.
constexpr const char* kEmptyTree = "4b825dc642cb6eb9a060e54bf8d69288fbee4904";

std::unordered_map<std::string, BuildStatus> read_status_file(
    const std::filesystem::path& path) {
    std::unordered_map<std::string, BuildStatus> statuses;
    std::ifstream in(path);
    if (!in) throw RepoUnreadable("cannot read build-status file: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string sha, status;
        if (!(ss >> sha >> status)) continue;
        if (status == "Passing") {
            statuses[sha] = BuildStatus::Passing;
        } else if (status == "Failing") {
            statuses[sha] = BuildStatus::Failing;
        } else {
            throw RepoUnreadable("bad build status '" + status + "' in " + path.string());
        }
    }
    return statuses;
}

std::string run_git(const std::filesystem::path& repo, const std::string& args) {
    auto result = proc::run_command("git " + args, repo, {}, 120);
    if (result.exit_code != 0) {
        throw RepoUnreadable("git " + args + " failed in " + repo.string() + ": " +
                             result.output.substr(0, 500));
    }
    return result.output;
}

}  // namespace

std::vector<TrainingPair> extract_one_line_changes(const std::vector<diff::Hunk>& hunks,
                                                   const ExtractOptions& options) {
    std::vector<TrainingPair> pairs;
    for (const auto& hunk : hunks) {
        int removed = 0, added = 0;
        for (const auto& l : hunk.lines) {
            if (l.tag == diff::LineTag::Removed) ++removed;
            if (l.tag == diff::LineTag::Added) ++added;
        }
        bool replacement = removed == 1 && added == 1;
        bool pure_edit = options.include_pure_edits &&
                         ((removed == 1 && added == 0) || (removed == 0 && added == 1));
        if (!replacement && !pure_edit) continue;

        TrainingPair pair;
        pair.file_path = hunk.file_path;
        pair.source_sha = options.source_sha;

        // Locate the edit inside the hunk; context sits on either side.
        long old_offset = 0;  // old-side lines consumed before the edit
        std::size_t edit_index = hunk.lines.size();
        for (std::size_t i = 0; i < hunk.lines.size(); ++i) {
            const auto& l = hunk.lines[i];
            if (l.tag == diff::LineTag::Removed || (removed == 0 && l.tag == diff::LineTag::Added)) {
                edit_index = i;
                break;
            }
            if (l.tag != diff::LineTag::Added) ++old_offset;
        }
        if (edit_index == hunk.lines.size()) continue;

        for (const auto& l : hunk.lines) {
            if (l.tag == diff::LineTag::Removed) pair.buggy_line = l.text;
            if (l.tag == diff::LineTag::Added) pair.fixed_line = l.text;
        }
        if (normalize_whitespace(pair.buggy_line) == normalize_whitespace(pair.fixed_line)) {
            continue;  // whitespace-only change carries no signal
        }

        pair.line_no = static_cast<int>(hunk.old_start + old_offset);
        int k = options.context_lines;
        for (std::size_t i = edit_index; i-- > 0 && k > 0;) {
            if (hunk.lines[i].tag == diff::LineTag::Context) {
                pair.context_before.insert(pair.context_before.begin(), hunk.lines[i].text);
                --k;
            }
        }
        k = options.context_lines;
        for (std::size_t i = edit_index + 1; i < hunk.lines.size() && k > 0; ++i) {
            if (hunk.lines[i].tag == diff::LineTag::Context) {
                pair.context_after.push_back(hunk.lines[i].text);
                --k;
            }
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<CommitEvent> mine_repository(const std::filesystem::path& repo_path,
                                         const MineOptions& options, MineStats* stats) {
    std::error_code ec;
    if (!std::filesystem::is_directory(repo_path, ec)) {
        throw RepoUnreadable("not a directory: " + repo_path.string());
    }

    std::unordered_map<std::string, BuildStatus> statuses;
    if (options.status_file) statuses = read_status_file(*options.status_file);

    const std::string log = run_git(
        repo_path, "log --reverse --first-parent --format=\"%H %P %ct\" " + options.range);

    std::string repo_id = repo_path.filename().string();
    if (repo_id.empty()) repo_id = repo_path.parent_path().filename().string();

    std::vector<CommitEvent> events;
    for (const auto& line : split_lines(log)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        CommitEvent ev;
        ss >> ev.commit_sha;
        std::vector<std::string> tail;
        std::string word;
        while (ss >> word) tail.push_back(word);
        if (ev.commit_sha.empty() || tail.empty()) {
            throw RepoUnreadable("unexpected git log line: " + line);
        }
        ev.timestamp = std::stoll(tail.back());
        if (tail.size() > 1) ev.parent_sha = tail.front();  // first parent
        ev.repo_id = repo_id;
        auto it = statuses.find(ev.commit_sha);
        ev.build_status = it == statuses.end() ? BuildStatus::Passing : it->second;
        const std::string base = ev.parent_sha.empty() ? kEmptyTree : ev.parent_sha;
        ev.diff_text = run_git(repo_path, "diff -U" + std::to_string(options.diff_context) +
                                              " " + base + " " + ev.commit_sha);
        events.push_back(std::move(ev));
    }

    bool sorted = std::is_sorted(events.begin(), events.end(),
                                 [](const CommitEvent& a, const CommitEvent& b) {
                                     return a.timestamp < b.timestamp;
                                 });
    if (!sorted) {
        std::stable_sort(events.begin(), events.end(),
                         [](const CommitEvent& a, const CommitEvent& b) {
                             return a.timestamp < b.timestamp;
                         });
        if (stats) stats->reordered_events++;
    }
    if (stats) stats->commits = static_cast<int>(events.size());
    return events;
}

nlohmann::json pair_to_json(const TrainingPair& pair, std::int64_t timestamp) {
    return nlohmann::json{{"file_path", pair.file_path},
                          {"line_no", pair.line_no},
                          {"buggy_line", pair.buggy_line},
                          {"fixed_line", pair.fixed_line},
                          {"context_before", pair.context_before},
                          {"context_after", pair.context_after},
                          {"source_sha", pair.source_sha},
                          {"timestamp", timestamp}};
}

TrainingPair pair_from_json(const nlohmann::json& j) {
    TrainingPair pair;
    pair.file_path = j.at("file_path").get<std::string>();
    pair.line_no = j.at("line_no").get<int>();
    pair.buggy_line = j.at("buggy_line").get<std::string>();
    pair.fixed_line = j.at("fixed_line").get<std::string>();
    pair.context_before = j.at("context_before").get<std::vector<std::string>>();
    pair.context_after = j.at("context_after").get<std::vector<std::string>>();
    pair.source_sha = j.at("source_sha").get<std::string>();
    return pair;
}

}  // namespace linefix::stream
