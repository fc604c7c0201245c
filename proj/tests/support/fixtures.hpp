#pragma once

// Shared fixture helpers: temp directories, file writing, and scripted git
// repositories with controlled commit timestamps.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "linefix/subprocess.hpp"

namespace testsupport {

class TempDir {
public:
    explicit TempDir(const std::string& tag = "fixture") {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("linefix-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        if (path_.empty()) return;
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    TempDir(TempDir&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("fixture write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fixture read failed: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string must_run(const std::string& cmd, const std::filesystem::path& cwd,
                            const std::map<std::string, std::string>& env = {}) {
    auto result = linefix::proc::run_command(cmd, cwd, env, 60);
    if (result.exit_code != 0) {
        throw std::runtime_error("fixture command failed: " + cmd + "\n" + result.output);
    }
    return result.output;
}

struct CommitSpec {
    std::map<std::string, std::string> files;  // path -> full content
    long timestamp = 0;
    std::string message = "change";
};

struct GitFixture {
    TempDir dir{"repo"};
    std::vector<std::string> shas;  // in commit order
};

// Builds a repository from scripted commits with exact timestamps.
inline GitFixture make_git_repo(const std::vector<CommitSpec>& commits) {
    GitFixture fixture;
    const auto& root = fixture.dir.path();
    must_run("git init --quiet --initial-branch=main .", root);
    for (const auto& commit : commits) {
        for (const auto& [rel, content] : commit.files) {
            write_file(root / rel, content);
        }
        const std::string date = "@" + std::to_string(commit.timestamp) + " +0000";
        std::map<std::string, std::string> env{{"GIT_AUTHOR_DATE", date},
                                               {"GIT_COMMITTER_DATE", date}};
        must_run("git add -A", root);
        must_run("git -c user.name=fixture -c user.email=fixture@example.com commit --quiet "
                 "--allow-empty -m '" + commit.message + "'",
                 root, env);
        auto sha = must_run("git rev-parse HEAD", root);
        while (!sha.empty() && (sha.back() == '\n' || sha.back() == '\r')) sha.pop_back();
        fixture.shas.push_back(sha);
    }
    return fixture;
}

}  // namespace testsupport
