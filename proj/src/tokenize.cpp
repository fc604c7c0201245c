#include "linefix/tokenize.hpp"

#include <cctype>

#include "linefix/vocab.hpp"

namespace linefix::codeprep {

namespace {

bool is_ident_char(unsigned char c) {
    return std::isalnum(c) || c == '_';
}

std::size_t scan_string_literal(std::string_view line, std::size_t i) {
    char quote = line[i];
    std::size_t j = i + 1;
    while (j < line.size()) {
        if (line[j] == '\\' && j + 1 < line.size()) {
            j += 2;
            continue;
        }
        if (line[j] == quote) return j + 1;
        ++j;
    }
    return j;  // unterminated literal runs to end of line
}

std::size_t scan_number(std::string_view line, std::size_t i) {
    std::size_t j = i;
    bool prev_exp = false;
    while (j < line.size()) {
        unsigned char c = static_cast<unsigned char>(line[j]);
        if (std::isalnum(c) || c == '_') {
            prev_exp = (c == 'e' || c == 'E');
            ++j;
        } else if (c == '.') {
            prev_exp = false;
            ++j;
        } else if ((c == '+' || c == '-') && prev_exp) {
            prev_exp = false;
            ++j;
        } else {
            break;
        }
    }
    return j;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        unsigned char c = static_cast<unsigned char>(line[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        std::size_t end;
        if (c == '"' || c == '\'') {
            end = scan_string_literal(line, i);
        } else if (std::isdigit(c)) {
            end = scan_number(line, i);
        } else if (is_ident_char(c)) {
            end = i + 1;
            while (end < line.size() && is_ident_char(static_cast<unsigned char>(line[end]))) {
                ++end;
            }
        } else {
            end = i + 1;
        }
        tokens.emplace_back(line.substr(i, end - i));
        i = end;
    }
    return tokens;
}

int parse_copy_placeholder(std::string_view token) {
    constexpr std::string_view prefix = "<COPY_";
    if (token.size() < prefix.size() + 2 || token.substr(0, prefix.size()) != prefix ||
        token.back() != '>') {
        return -1;
    }
    int value = 0;
    for (std::size_t i = prefix.size(); i + 1 < token.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(token[i]);
        if (!std::isdigit(c)) return -1;
        value = value * 10 + (c - '0');
    }
    return value;
}

std::string make_copy_placeholder(int source_index) {
    return "<COPY_" + std::to_string(source_index) + ">";
}

std::string render_patch(const std::vector<std::string>& output_tokens,
                         const std::vector<std::string>& copy_source) {
    auto no_space_before = [](const std::string& t) {
        return t == ";" || t == "," || t == ")" || t == ".";
    };
    auto no_space_after = [](const std::string& t) { return t == "(" || t == "."; };

    std::string out;
    bool suppress_space = true;  // no leading space
    for (std::size_t idx = 0; idx < output_tokens.size(); ++idx) {
        std::string tok = output_tokens[idx];
        if (tok == Vocabulary::kEosToken && idx + 1 == output_tokens.size()) break;
        if (Vocabulary::is_special_token(tok)) {
            throw std::invalid_argument("special token in patch output: " + tok);
        }
        int copy = parse_copy_placeholder(tok);
        if (copy >= 0) {
            if (static_cast<std::size_t>(copy) >= copy_source.size()) {
                throw UnresolvableCopy("copy index " + std::to_string(copy) +
                                       " out of source range " +
                                       std::to_string(copy_source.size()));
            }
            tok = copy_source[static_cast<std::size_t>(copy)];
        }
        if (!suppress_space && !no_space_before(tok)) out += ' ';
        out += tok;
        suppress_space = no_space_after(tok);
    }
    return out;
}

}  // namespace linefix::codeprep
