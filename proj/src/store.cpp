#include "linefix/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

namespace linefix::platform {

namespace {

const char* kHumanKeys[] = {"file_path",      "line_no",       "buggy_line", "fixed_line",
                            "context_before", "context_after", "source_sha", "timestamp"};
const char* kMachineKeys[] = {"candidate",       "validation_verdict", "ods_probability",
                              "ods_verdict",     "stage_reached",      "timestamps"};

void write_fully(int fd, const char* data, std::size_t len, const std::filesystem::path& path) {
    std::size_t written = 0;
    while (written < len) {
        ssize_t n = ::write(fd, data + written, len - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == ENOSPC) throw StorageFull("store device full: " + path.string());
            throw std::runtime_error("store write failed: " + path.string() + ": " +
                                     std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

}  // namespace

PatchStore::PatchStore(const std::filesystem::path& dir, StoreKind kind)
    : kind_(kind), data_path_(dir / "records.jsonl"), index_path_(dir / "records.idx") {
    std::filesystem::create_directories(dir);
    recover();
    data_fd_ = ::open(data_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (data_fd_ < 0) throw std::runtime_error("cannot open store data: " + data_path_.string());
    index_fd_ = ::open(index_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (index_fd_ < 0) {
        ::close(data_fd_);
        throw std::runtime_error("cannot open store index: " + index_path_.string());
    }
}

PatchStore::~PatchStore() {
    if (data_fd_ >= 0) ::close(data_fd_);
    if (index_fd_ >= 0) ::close(index_fd_);
}

void PatchStore::recover() {
    offsets_.clear();
    std::uintmax_t data_size = 0;
    if (std::filesystem::exists(data_path_)) {
        data_size = std::filesystem::file_size(data_path_);
    }
    std::ifstream idx(index_path_);
    if (idx) {
        std::uint64_t offset = 0, length = 0;
        while (idx >> offset >> length) {
            if (offset + length > data_size) break;  // index ahead of durable data
            offsets_.emplace_back(offset, length);
        }
    }
    // Anything in the data file past the last indexed record is a torn
    // write from a crash between data append and index append: drop it.
    const std::uint64_t valid_end =
        offsets_.empty() ? 0 : offsets_.back().first + offsets_.back().second;
    if (data_size > valid_end) {
        std::filesystem::resize_file(data_path_, valid_end);
    }
    // Rewrite the index when it had trailing garbage beyond the valid data.
    std::ofstream fixed(index_path_, std::ios::trunc);
    for (const auto& [off, len] : offsets_) {
        fixed << off << ' ' << len << '\n';
    }
}

void PatchStore::check_schema(const nlohmann::json& record) const {
    if (!record.is_object()) throw SchemaMismatch("store records must be JSON objects");
    auto require = [&](const char* const* keys, std::size_t n, const char* kind_name) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!record.contains(keys[i])) {
                throw SchemaMismatch(std::string(kind_name) + " record is missing key '" +
                                     keys[i] + "'");
            }
        }
    };
    if (kind_ == StoreKind::Human) {
        require(kHumanKeys, std::size(kHumanKeys), "human-patch");
    } else {
        require(kMachineKeys, std::size(kMachineKeys), "machine-patch");
    }
}

std::int64_t PatchStore::append(const nlohmann::json& record) {
    check_schema(record);
    std::string line = record.dump();
    line += '\n';
    const std::uint64_t offset =
        offsets_.empty() ? 0 : offsets_.back().first + offsets_.back().second;

    write_fully(data_fd_, line.data(), line.size(), data_path_);
    if (::fsync(data_fd_) != 0) {
        throw std::runtime_error("fsync failed on " + data_path_.string());
    }
    std::string idx_line = std::to_string(offset) + ' ' + std::to_string(line.size()) + '\n';
    write_fully(index_fd_, idx_line.data(), idx_line.size(), index_path_);
    if (::fsync(index_fd_) != 0) {
        throw std::runtime_error("fsync failed on " + index_path_.string());
    }

    offsets_.emplace_back(offset, line.size());
    return count() - 1;
}

nlohmann::json PatchStore::read(std::int64_t seq) const {
    if (seq < 0 || seq >= count()) {
        throw std::out_of_range("store sequence number out of range: " + std::to_string(seq));
    }
    const auto [offset, length] = offsets_[static_cast<std::size_t>(seq)];
    std::ifstream in(data_path_, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(offset));
    std::string buf(length, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(length));
    if (!in) throw std::runtime_error("short read from store: " + data_path_.string());
    return nlohmann::json::parse(buf);
}

std::vector<nlohmann::json> PatchStore::read_all() const {
    std::vector<nlohmann::json> records;
    records.reserve(offsets_.size());
    for (std::int64_t i = 0; i < count(); ++i) records.push_back(read(i));
    return records;
}

}  // namespace linefix::platform
