#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace linefix::platform {

class SchemaMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StorageFull : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class StoreKind { Human, Machine };

// Append-only JSON Lines store with a sidecar byte-offset index. A record
// is durable (fsynced) before its index entry is written, so a torn tail
// from a crash is dropped on reopen: records are fully present or fully
// absent. Sequence numbers count from 0, gap-free.
class PatchStore {
public:
    PatchStore(const std::filesystem::path& dir, StoreKind kind);
    ~PatchStore();

    PatchStore(const PatchStore&) = delete;
    PatchStore& operator=(const PatchStore&) = delete;

    std::int64_t append(const nlohmann::json& record);

    std::int64_t count() const { return static_cast<std::int64_t>(offsets_.size()); }
    nlohmann::json read(std::int64_t seq) const;
    std::vector<nlohmann::json> read_all() const;

    StoreKind kind() const { return kind_; }
    const std::filesystem::path& data_path() const { return data_path_; }

private:
    void recover();
    void check_schema(const nlohmann::json& record) const;

    StoreKind kind_;
    std::filesystem::path data_path_;
    std::filesystem::path index_path_;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> offsets_;  // (offset, length)
    int data_fd_ = -1;
    int index_fd_ = -1;
};

}  // namespace linefix::platform
