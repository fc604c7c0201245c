#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace linefix::diff {

// Raised when unified-diff text cannot be parsed (bad hunk arithmetic,
// hunk without file headers, ...). Callers mining commit streams treat it
// as "skip this commit".
class MalformedDiff : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LineTag { Context, Removed, Added };

struct HunkLine {
    LineTag tag;
    std::string text;

    bool operator==(const HunkLine&) const = default;
};

struct Hunk {
    std::string file_path;  // stripped of the a/-b/ prefix; new path for added files
    long old_start = 0;     // 1-based
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::vector<HunkLine> lines;  // hunk body in order, context included

    std::vector<std::string> removed_lines() const;
    std::vector<std::string> added_lines() const;

    bool operator==(const Hunk&) const = default;
};

struct ParseStats {
    int binary_files_skipped = 0;
    int rename_only_skipped = 0;
};

// Parses git-style unified diff text into hunks, in input order.
// Context lines stay in `lines` but are excluded from removed/added views.
// Binary-file and rename-only entries are skipped (counted in stats).
std::vector<Hunk> parse_unified_diff(const std::string& text, ParseStats* stats = nullptr);

// Inverse of parsing: emits `--- a/...` / `+++ b/...` headers per hunk plus
// the hunk body. parse(serialize(h)) == h.
std::string serialize_hunks(const std::vector<Hunk>& hunks);

// Applies hunks for one file to its content. Context and removed lines must
// match exactly at the stated offsets; no fuzz.
std::string apply_to_content(const std::string& content, const std::vector<Hunk>& hunks);

// Minimal line diff between two versions of one file: common prefix/suffix
// plus a single hunk covering the changed middle. Empty result when equal.
std::vector<Hunk> diff_file_contents(const std::string& old_text, const std::string& new_text,
                                     const std::string& file_path, int context = 3);

}  // namespace linefix::diff
