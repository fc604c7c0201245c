#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "linefix/stream.hpp"
#include "linefix/tokenize.hpp"
#include "linefix/vocab.hpp"

namespace linefix::codeprep {

// Token strings with aligned vocabulary ids. OOV tokens carry kUnk in
// `ids` but keep their raw string so copy slots can reproduce them.
struct TokenSeq {
    std::vector<std::string> tokens;
    std::vector<int> ids;

    std::size_t size() const { return tokens.size(); }
    bool operator==(const TokenSeq&) const = default;
};

class BugLineTooLong : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TokenSeq to_token_seq(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// Encoder input: context_before ++ <START_BUG> buggy <END_BUG> ++ context_after,
// truncated symmetrically around the bug markers to at most max_len tokens.
// Throws BugLineTooLong when the marked bug region alone cannot fit.
TokenSeq build_model_input(const stream::TrainingPair& pair, const Vocabulary& vocab,
                           int max_len);

// Decoder target: tokenized fixed line plus a trailing <EOS>.
TokenSeq build_model_target(const std::string& fixed_line, const Vocabulary& vocab);

// Absorbs unseen tokens from `pairs` until the cumulative absorbed-pair
// count reaches freeze_after, then freezes (bumping the version). Frozen
// vocabularies pass through unchanged.
Vocabulary update_vocabulary(Vocabulary vocab, const std::vector<stream::TrainingPair>& pairs,
                             int freeze_after);

}  // namespace linefix::codeprep
