#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace linefix::codeprep {

// Token <-> id map with fixed special ids 0..5. Grows during a warm-up
// window, then freezes; after the freeze ids never change, so persisted
// checkpoints stay valid. OOV tokens map to UNK (copy slots carry the
// raw strings).
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kSos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kStartBug = 4;
    static constexpr int kEndBug = 5;
    static constexpr int kNumSpecials = 6;

    static constexpr const char* kPadToken = "<PAD>";
    static constexpr const char* kSosToken = "<SOS>";
    static constexpr const char* kEosToken = "<EOS>";
    static constexpr const char* kUnkToken = "<UNK>";
    static constexpr const char* kStartBugToken = "<START_BUG>";
    static constexpr const char* kEndBugToken = "<END_BUG>";

    static bool is_special_token(std::string_view token);

    Vocabulary();

    // Maximum total size including specials; inserts beyond it are ignored.
    // Matches the embedding capacity of the model this vocabulary feeds.
    void set_max_size(std::size_t max_size) { max_size_ = max_size; }

    int id_of(const std::string& token) const;  // kUnk when absent
    const std::string& token_of(int id) const;
    bool contains(const std::string& token) const;

    // Returns the id, inserting if new. nullopt when frozen or full.
    std::optional<int> add(const std::string& token);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    bool frozen() const { return frozen_; }
    int version() const { return version_; }
    std::int64_t pairs_absorbed() const { return pairs_absorbed_; }
    void note_pairs_absorbed(std::int64_t n) { pairs_absorbed_ += n; }

    void freeze();

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    bool operator==(const Vocabulary& other) const;

private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
    int version_ = 0;
    bool frozen_ = false;
    std::int64_t pairs_absorbed_ = 0;
    std::size_t max_size_ = std::numeric_limits<std::size_t>::max();
};

}  // namespace linefix::codeprep
