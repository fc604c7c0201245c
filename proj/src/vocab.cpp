#include "linefix/vocab.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace linefix::codeprep {

bool Vocabulary::is_special_token(std::string_view token) {
    return token == kPadToken || token == kSosToken || token == kEosToken ||
           token == kUnkToken || token == kStartBugToken || token == kEndBugToken;
}

Vocabulary::Vocabulary() {
    id_to_token_ = {kPadToken, kSosToken, kEosToken, kUnkToken, kStartBugToken, kEndBugToken};
    for (int i = 0; i < kNumSpecials; ++i) {
        token_to_id_[id_to_token_[static_cast<std::size_t>(i)]] = i;
    }
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) {
        throw std::out_of_range("vocabulary id out of range: " + std::to_string(id));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.count(token) > 0;
}

std::optional<int> Vocabulary::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    if (frozen_ || id_to_token_.size() >= max_size_) return std::nullopt;
    int id = size();
    token_to_id_[token] = id;
    id_to_token_.push_back(token);
    return id;
}

void Vocabulary::freeze() {
    if (frozen_) return;
    frozen_ = true;
    ++version_;
}

nlohmann::json Vocabulary::to_json() const {
    nlohmann::json tokens = nlohmann::json::array();
    for (std::size_t i = kNumSpecials; i < id_to_token_.size(); ++i) {
        tokens.push_back(id_to_token_[i]);
    }
    return nlohmann::json{{"version", version_},
                          {"frozen", frozen_},
                          {"tokens", std::move(tokens)},
                          {"pairs_absorbed", pairs_absorbed_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    Vocabulary v;
    for (const auto& t : j.at("tokens")) {
        auto token = t.get<std::string>();
        if (v.contains(token)) throw std::runtime_error("duplicate token in vocabulary file");
        v.add(token);
    }
    v.version_ = j.at("version").get<int>();
    v.frozen_ = j.at("frozen").get<bool>();
    v.pairs_absorbed_ = j.value("pairs_absorbed", std::int64_t{0});
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
    out << to_json().dump(2) << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read vocabulary: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

bool Vocabulary::operator==(const Vocabulary& other) const {
    return id_to_token_ == other.id_to_token_ && version_ == other.version_ &&
           frozen_ == other.frozen_ && pairs_absorbed_ == other.pairs_absorbed_;
}

}  // namespace linefix::codeprep
