#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace linefix::codeprep {

// Copy placeholder of the form "<COPY_7>" resolving to source position 7.
class UnresolvableCopy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Language-agnostic code tokenizer. Whitespace separates; identifiers,
// keywords and number literals stay whole; string/char literals are one
// token quotes included; everything else splits into single characters.
// Total and deterministic; never drops a non-whitespace character.
std::vector<std::string> tokenize(std::string_view line);

// Returns -1 when the token is not a copy placeholder.
int parse_copy_placeholder(std::string_view token);

std::string make_copy_placeholder(int source_index);

// Joins output tokens back into one source line. Copy placeholders resolve
// against `copy_source` by position. Spacing: single spaces, except no
// space before ';' ',' ')' '.' and none after '(' '.'.
// A trailing "<EOS>" is dropped; other special tokens are rejected.
std::string render_patch(const std::vector<std::string>& output_tokens,
                         const std::vector<std::string>& copy_source);

}  // namespace linefix::codeprep
