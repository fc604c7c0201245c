#pragma once

// Brute-force unified-diff scanner used as an independent oracle for the
// production parser. Deliberately minimal: one pass over raw lines, sscanf
// for hunk headers, no shared code with linefix::diff.

#include <cstdio>
#include <string>
#include <vector>

namespace testsupport {

struct RefHunk {
    std::string file;
    long old_start = 0;
    std::vector<std::string> removed;
    std::vector<std::string> added;
};

inline std::vector<RefHunk> reference_scan(const std::string& text) {
    std::vector<RefHunk> hunks;
    std::string old_file, new_file;
    long remaining_old = 0, remaining_new = 0;
    bool binary = false;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        if (pos == text.size()) break;
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos
                                                                    : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;

        if (line.rfind("Binary files ", 0) == 0 || line.rfind("GIT binary patch", 0) == 0) {
            binary = true;
            continue;
        }
        if (line.rfind("diff ", 0) == 0) {
            binary = false;
            continue;
        }
        if (line.rfind("--- ", 0) == 0) {
            old_file = line.substr(4);
            if (auto tab = old_file.find('\t'); tab != std::string::npos) {
                old_file = old_file.substr(0, tab);
            }
            if (old_file.rfind("a/", 0) == 0) old_file = old_file.substr(2);
            continue;
        }
        if (line.rfind("+++ ", 0) == 0) {
            new_file = line.substr(4);
            if (auto tab = new_file.find('\t'); tab != std::string::npos) {
                new_file = new_file.substr(0, tab);
            }
            if (new_file.rfind("b/", 0) == 0) new_file = new_file.substr(2);
            continue;
        }
        if (line.rfind("@@", 0) == 0) {
            long a = 0, b = 1, c = 0, d = 1;
            if (std::sscanf(line.c_str(), "@@ -%ld,%ld +%ld,%ld @@", &a, &b, &c, &d) == 4 ||
                (std::sscanf(line.c_str(), "@@ -%ld +%ld,%ld @@", &a, &c, &d) == 3 &&
                 (b = 1, true)) ||
                (std::sscanf(line.c_str(), "@@ -%ld,%ld +%ld @@", &a, &b, &c) == 3 &&
                 (d = 1, true)) ||
                (std::sscanf(line.c_str(), "@@ -%ld +%ld @@", &a, &c) == 2 &&
                 (b = 1, d = 1, true))) {
                if (!binary) {
                    hunks.push_back({old_file == "/dev/null" ? new_file : old_file, a, {}, {}});
                }
                remaining_old = b;
                remaining_new = d;
            }
            continue;
        }
        if (remaining_old > 0 || remaining_new > 0) {
            if (line.empty()) {
                --remaining_old;
                --remaining_new;
            } else if (line[0] == ' ') {
                --remaining_old;
                --remaining_new;
            } else if (line[0] == '-') {
                if (!binary) hunks.back().removed.push_back(line.substr(1));
                --remaining_old;
            } else if (line[0] == '+') {
                if (!binary) hunks.back().added.push_back(line.substr(1));
                --remaining_new;
            } else if (line[0] == '\\') {
                // "\ No newline at end of file"
            }
        }
    }
    return hunks;
}

}  // namespace testsupport
