#include "linefix/diff.hpp"

#include <algorithm>
#include <cstdio>

#include "linefix/textutil.hpp"

namespace linefix::diff {

namespace {

std::string strip_prefix(std::string path) {
    // "a/src/foo.c" -> "src/foo.c"; bare paths pass through.
    if (path.size() > 2 && (path[0] == 'a' || path[0] == 'b') && path[1] == '/') {
        return path.substr(2);
    }
    return path;
}

std::string parse_file_header(const std::string& line) {
    // "--- a/path<TAB>timestamp" or "+++ b/path"
    std::string rest = line.substr(4);
    std::size_t tab = rest.find('\t');
    if (tab != std::string::npos) rest = rest.substr(0, tab);
    return strip_prefix(rest);
}

bool parse_hunk_header(const std::string& line, Hunk& hunk) {
    long a = 0, b = 1, c = 0, d = 1;
    int consumed = 0;
    if (std::sscanf(line.c_str(), "@@ -%ld,%ld +%ld,%ld @@%n", &a, &b, &c, &d, &consumed) == 4 &&
        consumed > 0) {
    } else if (std::sscanf(line.c_str(), "@@ -%ld +%ld,%ld @@%n", &a, &c, &d, &consumed) == 3 &&
               consumed > 0) {
        b = 1;
    } else if (std::sscanf(line.c_str(), "@@ -%ld,%ld +%ld @@%n", &a, &b, &c, &consumed) == 3 &&
               consumed > 0) {
        d = 1;
    } else if (std::sscanf(line.c_str(), "@@ -%ld +%ld @@%n", &a, &c, &consumed) == 2 &&
               consumed > 0) {
        b = d = 1;
    } else {
        return false;
    }
    hunk.old_start = a;
    hunk.old_count = b;
    hunk.new_start = c;
    hunk.new_count = d;
    return true;
}

}  // namespace

std::vector<std::string> Hunk::removed_lines() const {
    std::vector<std::string> out;
    for (const auto& l : lines) {
        if (l.tag == LineTag::Removed) out.push_back(l.text);
    }
    return out;
}

std::vector<std::string> Hunk::added_lines() const {
    std::vector<std::string> out;
    for (const auto& l : lines) {
        if (l.tag == LineTag::Added) out.push_back(l.text);
    }
    return out;
}

std::vector<Hunk> parse_unified_diff(const std::string& text, ParseStats* stats) {
    std::vector<Hunk> hunks;
    ParseStats local;
    const auto lines = split_lines(text);

    std::string old_path;
    std::string new_path;
    bool have_headers = false;
    bool file_is_binary = false;
    bool file_renamed = false;
    bool file_had_hunks = false;

    auto close_file = [&] {
        if (file_renamed && !file_had_hunks) local.rename_only_skipped++;
        old_path.clear();
        new_path.clear();
        have_headers = false;
        file_is_binary = false;
        file_renamed = false;
        file_had_hunks = false;
    };

    std::size_t i = 0;
    while (i < lines.size()) {
        const std::string& line = lines[i];
        if (starts_with(line, "diff ")) {
            close_file();
            ++i;
            continue;
        }
        if (starts_with(line, "Binary files ") || starts_with(line, "GIT binary patch")) {
            file_is_binary = true;
            local.binary_files_skipped++;
            ++i;
            continue;
        }
        if (starts_with(line, "rename from ") || starts_with(line, "rename to ")) {
            file_renamed = true;
            ++i;
            continue;
        }
        if (starts_with(line, "--- ")) {
            old_path = parse_file_header(line);
            if (i + 1 >= lines.size() || !starts_with(lines[i + 1], "+++ ")) {
                throw MalformedDiff("'---' header without matching '+++' header");
            }
            new_path = parse_file_header(lines[i + 1]);
            have_headers = true;
            i += 2;
            continue;
        }
        if (starts_with(line, "@@")) {
            if (!have_headers) {
                throw MalformedDiff("hunk header before any file headers");
            }
            Hunk hunk;
            if (!parse_hunk_header(line, hunk)) {
                throw MalformedDiff("unparsable hunk header: " + line);
            }
            hunk.file_path = (old_path == "/dev/null") ? new_path : old_path;
            ++i;
            long old_seen = 0;
            long new_seen = 0;
            while (old_seen < hunk.old_count || new_seen < hunk.new_count) {
                if (i >= lines.size()) {
                    throw MalformedDiff("hunk body shorter than header range");
                }
                const std::string& body = lines[i];
                if (starts_with(body, "\\")) {  // "\ No newline at end of file"
                    ++i;
                    continue;
                }
                if (body.empty()) {
                    // Some tools emit bare empty lines for empty context lines.
                    hunk.lines.push_back({LineTag::Context, ""});
                    ++old_seen;
                    ++new_seen;
                    ++i;
                    continue;
                }
                char tag = body[0];
                std::string payload = body.substr(1);
                if (tag == ' ') {
                    hunk.lines.push_back({LineTag::Context, payload});
                    ++old_seen;
                    ++new_seen;
                } else if (tag == '-') {
                    hunk.lines.push_back({LineTag::Removed, payload});
                    ++old_seen;
                } else if (tag == '+') {
                    hunk.lines.push_back({LineTag::Added, payload});
                    ++new_seen;
                } else {
                    throw MalformedDiff("unexpected line inside hunk body: " + body);
                }
                if (old_seen > hunk.old_count || new_seen > hunk.new_count) {
                    throw MalformedDiff("hunk body longer than header range");
                }
                ++i;
            }
            if (!file_is_binary) {
                hunks.push_back(std::move(hunk));
                file_had_hunks = true;
            }
            continue;
        }
        if (file_had_hunks && !line.empty() && (line[0] == '+' || line[0] == '-')) {
            // Change lines must sit inside a hunk's declared range.
            throw MalformedDiff("change line outside any hunk: " + line);
        }
        // index lines, mode lines, commit metadata: skip.
        ++i;
    }
    close_file();
    if (stats) *stats = local;
    return hunks;
}

std::string serialize_hunks(const std::vector<Hunk>& hunks) {
    std::string out;
    std::string current_path;
    for (const auto& h : hunks) {
        if (h.file_path != current_path) {
            current_path = h.file_path;
            out += "--- a/" + h.file_path + "\n";
            out += "+++ b/" + h.file_path + "\n";
        }
        char header[96];
        std::snprintf(header, sizeof(header), "@@ -%ld,%ld +%ld,%ld @@\n", h.old_start,
                      h.old_count, h.new_start, h.new_count);
        out += header;
        for (const auto& l : h.lines) {
            switch (l.tag) {
                case LineTag::Context: out += ' '; break;
                case LineTag::Removed: out += '-'; break;
                case LineTag::Added: out += '+'; break;
            }
            out += l.text;
            out += '\n';
        }
    }
    return out;
}

std::string apply_to_content(const std::string& content, const std::vector<Hunk>& hunks) {
    std::vector<std::string> lines = split_lines(content);
    std::vector<std::string> out;
    std::size_t cursor = 0;  // 0-based index into `lines`

    for (const auto& h : hunks) {
        // old_start of an empty old range points at the line *before* the insertion.
        std::size_t hunk_old_begin =
            h.old_count == 0 ? static_cast<std::size_t>(h.old_start)
                             : static_cast<std::size_t>(h.old_start - 1);
        if (hunk_old_begin < cursor || hunk_old_begin > lines.size()) {
            throw MalformedDiff("hunk does not fit file: " + h.file_path);
        }
        while (cursor < hunk_old_begin) {
            out.push_back(lines[cursor++]);
        }
        for (const auto& l : h.lines) {
            if (l.tag == LineTag::Added) {
                out.push_back(l.text);
                continue;
            }
            if (cursor >= lines.size() || lines[cursor] != l.text) {
                throw MalformedDiff("hunk context mismatch at line " +
                                    std::to_string(cursor + 1) + " of " + h.file_path);
            }
            if (l.tag == LineTag::Context) out.push_back(lines[cursor]);
            ++cursor;
        }
    }
    while (cursor < lines.size()) {
        out.push_back(lines[cursor++]);
    }
    return join_lines(out);
}

std::vector<Hunk> diff_file_contents(const std::string& old_text, const std::string& new_text,
                                     const std::string& file_path, int context) {
    const auto old_lines = split_lines(old_text);
    const auto new_lines = split_lines(new_text);
    if (old_lines == new_lines) return {};

    std::size_t prefix = 0;
    while (prefix < old_lines.size() && prefix < new_lines.size() &&
           old_lines[prefix] == new_lines[prefix]) {
        ++prefix;
    }
    std::size_t suffix = 0;
    while (suffix < old_lines.size() - prefix && suffix < new_lines.size() - prefix &&
           old_lines[old_lines.size() - 1 - suffix] == new_lines[new_lines.size() - 1 - suffix]) {
        ++suffix;
    }

    std::size_t ctx = static_cast<std::size_t>(std::max(context, 0));
    std::size_t lead = std::min(prefix, ctx);
    std::size_t trail = std::min(suffix, ctx);

    Hunk h;
    h.file_path = file_path;
    h.old_start = static_cast<long>(prefix - lead) + 1;
    h.new_start = h.old_start;
    for (std::size_t i = prefix - lead; i < prefix; ++i) {
        h.lines.push_back({LineTag::Context, old_lines[i]});
    }
    for (std::size_t i = prefix; i < old_lines.size() - suffix; ++i) {
        h.lines.push_back({LineTag::Removed, old_lines[i]});
    }
    for (std::size_t i = prefix; i < new_lines.size() - suffix; ++i) {
        h.lines.push_back({LineTag::Added, new_lines[i]});
    }
    for (std::size_t i = old_lines.size() - suffix; i < old_lines.size() - suffix + trail; ++i) {
        h.lines.push_back({LineTag::Context, old_lines[i]});
    }
    long ctx_lines = static_cast<long>(lead + trail);
    h.old_count = ctx_lines + static_cast<long>(old_lines.size() - suffix - prefix);
    h.new_count = ctx_lines + static_cast<long>(new_lines.size() - suffix - prefix);
    if (h.old_count == 0) h.old_start -= 1;  // unified-diff convention for pure inserts
    if (h.new_count == 0) h.new_start -= 1;
    return {h};
}

}  // namespace linefix::diff
