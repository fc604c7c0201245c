#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "linefix/validate.hpp"

namespace linefix::platform {

struct PullRequestPayload {
    std::string repo_id;
    std::string base_sha;
    std::string title;
    std::string body;
    std::string diff;  // unified diff of the single-line change

    bool operator==(const PullRequestPayload&) const = default;
};

nlohmann::json payload_to_json(const PullRequestPayload& payload);
PullRequestPayload payload_from_json(const nlohmann::json& j);

struct BuildInfo {
    std::string repo_id;
    std::string base_sha;
    std::string failure_kind;        // "compile error" / "test failure"
    std::string diagnostic_excerpt;  // first diagnostics or failing-test lines
};

// The one patch that survived validation and the overfitting filter, plus
// the file contents needed to regenerate its diff from the applied tree.
struct KeptPatch {
    validate::ValidationResult result;
    std::optional<double> ods_probability;
    std::string original_content;
    std::string patched_content;
};

class NoKeptPatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Unreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Rejected : public std::runtime_error {
public:
    Rejected(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

PullRequestPayload render_pull_request(const std::optional<KeptPatch>& kept,
                                       const BuildInfo& info);

struct SubmitMode {
    enum class Kind { DryRun, Http };
    Kind kind = Kind::DryRun;
    std::filesystem::path out_dir;  // DryRun
    std::string endpoint;           // Http, e.g. "http://127.0.0.1:8080"
    std::string token;              // Http bearer token, optional
};

struct SubmissionReceipt {
    enum class Status { Created, Duplicate };
    Status status = Status::Created;
    std::string remote_id;          // Http
    std::filesystem::path payload_file;  // DryRun
};

// DryRun: writes "<repo_id>-<base_sha>.json" (same key overwrites, at most
// one PR per failing build). Http: POST /repos/<id>/pulls with a
// content-derived X-Idempotency-Key; a 409 is a duplicate, treated as
// success.
SubmissionReceipt submit(const PullRequestPayload& payload, const SubmitMode& mode);

}  // namespace linefix::platform
