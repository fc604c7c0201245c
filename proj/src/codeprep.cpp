#include "linefix/codeprep.hpp"

#include <algorithm>

namespace linefix::codeprep {

TokenSeq to_token_seq(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    TokenSeq seq;
    seq.tokens = tokens;
    seq.ids.reserve(tokens.size());
    for (const auto& t : tokens) seq.ids.push_back(vocab.id_of(t));
    return seq;
}

TokenSeq build_model_input(const stream::TrainingPair& pair, const Vocabulary& vocab,
                           int max_len) {
    std::vector<std::string> before;
    for (const auto& line : pair.context_before) {
        for (auto& t : tokenize(line)) before.push_back(std::move(t));
    }
    std::vector<std::string> bug = tokenize(pair.buggy_line);
    std::vector<std::string> after;
    for (const auto& line : pair.context_after) {
        for (auto& t : tokenize(line)) after.push_back(std::move(t));
    }

    const long core = static_cast<long>(bug.size()) + 2;  // markers included
    if (core > max_len) {
        throw BugLineTooLong("buggy line of " + std::to_string(bug.size()) +
                             " tokens exceeds max_len " + std::to_string(max_len));
    }

    // Split what remains of the budget evenly, spilling slack to the side
    // that still has tokens, so the bug region stays centered.
    long budget = max_len - core;
    long want_before = budget / 2;
    long want_after = budget - want_before;
    long have_before = static_cast<long>(before.size());
    long have_after = static_cast<long>(after.size());
    if (have_before < want_before) {
        want_after = std::min(have_after, budget - have_before);
        want_before = have_before;
    } else if (have_after < want_after) {
        want_before = std::min(have_before, budget - have_after);
        want_after = have_after;
    }

    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(core + want_before + want_after));
    tokens.insert(tokens.end(), before.end() - want_before, before.end());
    tokens.push_back(Vocabulary::kStartBugToken);
    tokens.insert(tokens.end(), bug.begin(), bug.end());
    tokens.push_back(Vocabulary::kEndBugToken);
    tokens.insert(tokens.end(), after.begin(), after.begin() + want_after);
    return to_token_seq(tokens, vocab);
}

TokenSeq build_model_target(const std::string& fixed_line, const Vocabulary& vocab) {
    auto tokens = tokenize(fixed_line);
    tokens.push_back(Vocabulary::kEosToken);
    return to_token_seq(tokens, vocab);
}

Vocabulary update_vocabulary(Vocabulary vocab, const std::vector<stream::TrainingPair>& pairs,
                             int freeze_after) {
    if (vocab.frozen()) return vocab;
    for (const auto& pair : pairs) {
        if (vocab.pairs_absorbed() >= freeze_after) break;
        auto absorb_line = [&vocab](const std::string& line) {
            for (const auto& t : tokenize(line)) vocab.add(t);
        };
        for (const auto& line : pair.context_before) absorb_line(line);
        absorb_line(pair.buggy_line);
        absorb_line(pair.fixed_line);
        for (const auto& line : pair.context_after) absorb_line(line);
        vocab.note_pairs_absorbed(1);
    }
    if (vocab.pairs_absorbed() >= freeze_after) vocab.freeze();
    return vocab;
}

}  // namespace linefix::codeprep
