#include "linefix/forge.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "linefix/diff.hpp"
#include "linefix/textutil.hpp"

namespace linefix::platform {

namespace {

std::string sanitize_for_filename(std::string s) {
    for (auto& c : s) {
        if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
    }
    return s;
}

}  // namespace

nlohmann::json payload_to_json(const PullRequestPayload& payload) {
    return nlohmann::json{{"repo_id", payload.repo_id},
                          {"base_sha", payload.base_sha},
                          {"title", payload.title},
                          {"body", payload.body},
                          {"diff", payload.diff}};
}

PullRequestPayload payload_from_json(const nlohmann::json& j) {
    PullRequestPayload payload;
    payload.repo_id = j.at("repo_id").get<std::string>();
    payload.base_sha = j.at("base_sha").get<std::string>();
    payload.title = j.at("title").get<std::string>();
    payload.body = j.at("body").get<std::string>();
    payload.diff = j.at("diff").get<std::string>();
    return payload;
}

PullRequestPayload render_pull_request(const std::optional<KeptPatch>& kept,
                                       const BuildInfo& info) {
    if (!kept) {
        throw NoKeptPatch("repair outcome carries no kept patch");
    }
    const auto& result = kept->result;
    const auto& candidate = result.candidate;

    // The diff is regenerated from the applied tree, not from the candidate
    // text, so the payload reproduces the validated bytes exactly.
    const auto hunks = diff::diff_file_contents(kept->original_content, kept->patched_content,
                                                candidate.file_path);
    PullRequestPayload payload;
    payload.repo_id = info.repo_id;
    payload.base_sha = info.base_sha;
    payload.title = "Fix " + info.failure_kind + " in " + candidate.file_path + ":" +
                    std::to_string(candidate.line_no);
    payload.diff = diff::serialize_hunks(hunks);

    std::ostringstream body;
    body << "The build at " << info.base_sha << " fails with a " << info.failure_kind << ".\n\n";
    if (!info.diagnostic_excerpt.empty()) {
        body << "```\n" << info.diagnostic_excerpt << "\n```\n\n";
    }
    body << "Proposed one-line change in `" << candidate.file_path << "` line "
         << candidate.line_no << ":\n\n```diff\n"
         << payload.diff << "```\n\n";
    body << "Validation: " << verdict_name(result.verdict)
         << " (build and tests pass with this change applied).\n";
    if (kept->ods_probability) {
        body << "Overfitting-classifier probability: " << *kept->ods_probability
             << " (below the discard threshold).\n";
    }
    payload.body = body.str();
    return payload;
}

SubmissionReceipt submit(const PullRequestPayload& payload, const SubmitMode& mode) {
    const nlohmann::json body = payload_to_json(payload);

    if (mode.kind == SubmitMode::Kind::DryRun) {
        std::filesystem::create_directories(mode.out_dir);
        const auto file = mode.out_dir / (sanitize_for_filename(payload.repo_id) + "-" +
                                          sanitize_for_filename(payload.base_sha) + ".json");
        std::ofstream out(file, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write payload file: " + file.string());
        out << body.dump(2) << '\n';
        SubmissionReceipt receipt;
        receipt.status = SubmissionReceipt::Status::Created;
        receipt.payload_file = file;
        return receipt;
    }

    httplib::Client client(mode.endpoint);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers;
    headers.emplace("X-Idempotency-Key", to_hex(fnv1a64(body.dump())));
    if (!mode.token.empty()) {
        headers.emplace("Authorization", "Bearer " + mode.token);
    }
    const std::string path = "/repos/" + payload.repo_id + "/pulls";
    const nlohmann::json request{{"title", payload.title},
                                 {"body", payload.body},
                                 {"diff", payload.diff},
                                 {"base_sha", payload.base_sha}};
    auto response = client.Post(path, headers, request.dump(), "application/json");
    if (!response) {
        throw Unreachable("forge endpoint unreachable: " + mode.endpoint);
    }
    SubmissionReceipt receipt;
    if (response->status == 201) {
        receipt.status = SubmissionReceipt::Status::Created;
        auto parsed = nlohmann::json::parse(response->body, nullptr, false);
        if (parsed.is_object() && parsed.contains("id")) {
            receipt.remote_id = parsed["id"].is_string() ? parsed["id"].get<std::string>()
                                                         : parsed["id"].dump();
        }
        return receipt;
    }
    if (response->status == 409) {
        receipt.status = SubmissionReceipt::Status::Duplicate;  // idempotency-key hit
        return receipt;
    }
    throw Rejected(response->status,
                   "forge rejected the pull request with status " +
                       std::to_string(response->status));
}

}  // namespace linefix::platform
