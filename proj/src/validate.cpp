#include "linefix/validate.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "linefix/subprocess.hpp"
#include "linefix/textutil.hpp"

namespace linefix::validate {

namespace {

constexpr std::size_t kExcerptBytes = 4096;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tail(const std::string& s, std::size_t n) {
    return s.size() <= n ? s : s.substr(s.size() - n);
}

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        static std::atomic<std::uint64_t> counter{0};
        auto unique = std::to_string(::getpid()) + "-" +
                      std::to_string(counter.fetch_add(1)) + "-" +
                      std::to_string(std::chrono::steady_clock::now().time_since_epoch().count());
        path_ = base / ("linefix-sandbox-" + unique);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace

ProjectConfig project_config_from_json(const nlohmann::json& j) {
    ProjectConfig config;
    config.build_cmd = j.at("build_cmd").get<std::string>();
    config.test_cmd = j.at("test_cmd").get<std::string>();
    config.timeout_s = j.at("timeout_s").get<int>();
    if (j.contains("env")) {
        for (const auto& [k, v] : j.at("env").items()) {
            config.env[k] = v.get<std::string>();
        }
    }
    if (config.build_cmd.empty() || config.test_cmd.empty() || config.timeout_s <= 0) {
        throw std::invalid_argument("project config needs nonempty commands and timeout_s > 0");
    }
    return config;
}

nlohmann::json project_config_to_json(const ProjectConfig& config) {
    return nlohmann::json{{"build_cmd", config.build_cmd},
                          {"test_cmd", config.test_cmd},
                          {"timeout_s", config.timeout_s},
                          {"env", config.env}};
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Plausible: return "Plausible";
        case Verdict::CompileFail: return "CompileFail";
        case Verdict::TestFail: return "TestFail";
        case Verdict::Timeout: return "Timeout";
        case Verdict::ApplyFail: return "ApplyFail";
    }
    return "Unknown";
}

std::string apply_patch_to_content(const std::string& content,
                                   const PatchCandidate& candidate) {
    auto lines = split_lines(content);
    if (candidate.line_no < 1 || static_cast<std::size_t>(candidate.line_no) > lines.size()) {
        throw ApplyError(ApplyError::Kind::OutOfRange,
                         "line " + std::to_string(candidate.line_no) + " outside file of " +
                             std::to_string(lines.size()) + " lines");
    }
    auto& line = lines[static_cast<std::size_t>(candidate.line_no - 1)];
    if (normalize_whitespace(line) != normalize_whitespace(candidate.original_line)) {
        throw ApplyError(ApplyError::Kind::LineMismatch,
                         "line " + std::to_string(candidate.line_no) +
                             " does not match the candidate's original line");
    }
    line = candidate.replacement_line;
    return join_lines(lines);
}

void apply_patch(const std::filesystem::path& workdir, const PatchCandidate& candidate) {
    const auto path = workdir / candidate.file_path;
    if (!std::filesystem::is_regular_file(path)) {
        throw ApplyError(ApplyError::Kind::MissingFile, "no such file: " + path.string());
    }
    const std::string patched = apply_patch_to_content(read_file(path), candidate);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << patched;
    if (!out) {
        throw ApplyError(ApplyError::Kind::MissingFile, "cannot rewrite: " + path.string());
    }
}

void copy_tree(const std::filesystem::path& from, const std::filesystem::path& to) {
    std::filesystem::create_directories(to);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(from)) {
        const auto rel = std::filesystem::relative(entry.path(), from);
        if (!rel.empty() && rel.begin()->string() == ".git") continue;
        const auto target = to / rel;
        if (entry.is_directory()) {
            std::filesystem::create_directories(target);
        } else if (entry.is_regular_file()) {
            std::filesystem::create_directories(target.parent_path());
            std::filesystem::copy_file(entry.path(), target,
                                       std::filesystem::copy_options::overwrite_existing);
            std::filesystem::permissions(target,
                                         std::filesystem::status(entry.path()).permissions());
        }
    }
}

std::uint64_t hash_tree(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), root);
        if (!rel.empty() && rel.begin()->string() == ".git") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& rel : files) {
        h ^= fnv1a64(rel.generic_string());
        h *= 1099511628211ull;
        h ^= fnv1a64(read_file(root / rel));
        h *= 1099511628211ull;
    }
    return h;
}

ValidationResult validate(const PatchCandidate& candidate, const ProjectConfig& config) {
    ValidationResult result;
    result.candidate = candidate;
    const auto started = std::chrono::steady_clock::now();
    auto finish = [&](Verdict verdict) -> ValidationResult& {
        result.verdict = verdict;
        result.plausible = result.compiled && result.tests_passed;
        result.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - started)
                                  .count();
        return result;
    };

    TempDir sandbox;
    try {
        copy_tree(config.root, sandbox.path());
        apply_patch(sandbox.path(), candidate);
    } catch (const ApplyError& e) {
        result.log_excerpt = e.what();
        return finish(Verdict::ApplyFail);
    } catch (const std::filesystem::filesystem_error& e) {
        result.log_excerpt = e.what();
        return finish(Verdict::ApplyFail);
    }

    auto build = proc::run_command(config.build_cmd, sandbox.path(), config.env,
                                   config.timeout_s);
    std::string log = build.output;
    if (build.timed_out) {
        result.log_excerpt = tail(log, kExcerptBytes);
        return finish(Verdict::Timeout);
    }
    if (build.exit_code != 0) {
        result.log_excerpt = tail(log, kExcerptBytes);
        return finish(Verdict::CompileFail);
    }
    result.compiled = true;

    auto test = proc::run_command(config.test_cmd, sandbox.path(), config.env, config.timeout_s);
    log += test.output;
    result.log_excerpt = tail(log, kExcerptBytes);
    if (test.timed_out) {
        return finish(Verdict::Timeout);
    }
    if (test.exit_code != 0) {
        return finish(Verdict::TestFail);
    }
    result.tests_passed = true;
    return finish(Verdict::Plausible);
}

std::vector<ValidationResult> validate_all(const std::vector<PatchCandidate>& candidates,
                                           const ProjectConfig& config, int parallelism) {
    std::vector<ValidationResult> results(candidates.size());
    if (candidates.empty()) return results;
    parallelism = std::max(1, std::min<int>(parallelism, static_cast<int>(candidates.size())));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= candidates.size()) return;
            try {
                results[i] = validate(candidates[i], config);
            } catch (const std::exception& e) {
                ValidationResult r;
                r.candidate = candidates[i];
                r.verdict = Verdict::ApplyFail;
                r.log_excerpt = std::string("validation error: ") + e.what();
                results[i] = std::move(r);
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(parallelism));
    for (int t = 0; t < parallelism; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return results;
}

}  // namespace linefix::validate
