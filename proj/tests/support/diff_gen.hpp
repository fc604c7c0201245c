#pragma once

// Random unified-diff generator with ground truth. Builds the diff text
// directly from the structure it returns, so tests can compare both the
// production parser and the reference scanner against the same truth.

#include <random>
#include <string>
#include <vector>

#include "linefix/diff.hpp"

namespace testsupport {

struct GeneratedDiff {
    std::string text;
    std::vector<linefix::diff::Hunk> hunks;
};

inline GeneratedDiff generate_diff(std::mt19937_64& rng) {
    using linefix::diff::Hunk;
    using linefix::diff::HunkLine;
    using linefix::diff::LineTag;

    GeneratedDiff out;
    auto rand_int = [&rng](int lo, int hi) {
        return static_cast<int>(lo + rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    auto rand_line = [&]() {
        static const char* words[] = {"alpha", "beta",  "gamma", "delta", "value",
                                      "count", "total", "index", "items", "state"};
        std::string s = "    ";
        int n = rand_int(1, 4);
        for (int i = 0; i < n; ++i) {
            s += words[rng() % 10];
            s += (i + 1 < n) ? " " : "";
        }
        s += ";";
        return s;
    };

    const int files = rand_int(1, 3);
    for (int f = 0; f < files; ++f) {
        const std::string path = "dir" + std::to_string(f) + "/file" + std::to_string(f) + ".txt";
        out.text += "diff --git a/" + path + " b/" + path + "\n";
        out.text += "index 0000000..1111111 100644\n";
        out.text += "--- a/" + path + "\n";
        out.text += "+++ b/" + path + "\n";

        long old_pos = 1;
        long new_pos = 1;
        const int hunk_count = rand_int(1, 3);
        for (int h = 0; h < hunk_count; ++h) {
            const long gap = rand_int(1, 6);
            old_pos += gap;
            new_pos += gap;

            Hunk hunk;
            hunk.file_path = path;
            int lead = rand_int(0, 2);
            int removed = rand_int(0, 3);
            int added = rand_int(0, 3);
            if (removed == 0 && added == 0) added = 1;
            int trail = rand_int(0, 2);
            if (lead + trail + removed == 0) lead = 1;  // keep the old range nonempty

            for (int i = 0; i < lead; ++i) hunk.lines.push_back({LineTag::Context, rand_line()});
            for (int i = 0; i < removed; ++i) hunk.lines.push_back({LineTag::Removed, rand_line()});
            for (int i = 0; i < added; ++i) hunk.lines.push_back({LineTag::Added, rand_line()});
            for (int i = 0; i < trail; ++i) hunk.lines.push_back({LineTag::Context, rand_line()});

            hunk.old_start = old_pos;
            hunk.old_count = lead + removed + trail;
            hunk.new_start = new_pos;
            hunk.new_count = lead + added + trail;
            old_pos += hunk.old_count;
            new_pos += hunk.new_count;

            char header[96];
            std::snprintf(header, sizeof(header), "@@ -%ld,%ld +%ld,%ld @@\n", hunk.old_start,
                          hunk.old_count, hunk.new_start, hunk.new_count);
            out.text += header;
            for (const auto& l : hunk.lines) {
                out.text += l.tag == LineTag::Context ? ' ' : l.tag == LineTag::Removed ? '-' : '+';
                out.text += l.text;
                out.text += '\n';
            }
            out.hunks.push_back(std::move(hunk));
        }
    }
    return out;
}

}  // namespace testsupport
