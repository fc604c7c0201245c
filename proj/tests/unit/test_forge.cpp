#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "linefix/diff.hpp"
#include "linefix/forge.hpp"
#include "support/fixtures.hpp"

using namespace linefix;
using platform::BuildInfo;
using platform::KeptPatch;
using platform::PullRequestPayload;
using platform::SubmitMode;

namespace {

KeptPatch make_kept_patch() {
    KeptPatch kept;
    kept.result.candidate.file_path = "src/Parser.java";
    kept.result.candidate.line_no = 6;
    kept.result.candidate.original_line = "int rows = sk.size();";
    kept.result.candidate.replacement_line = "int rows = idx.size();";
    kept.result.candidate.score = -1.25;
    kept.result.compiled = true;
    kept.result.tests_passed = true;
    kept.result.plausible = true;
    kept.result.verdict = validate::Verdict::Plausible;
    kept.ods_probability = 0.12;
    kept.original_content =
        "class Parser {\n"
        "  void parse() {\n"
        "    int idx = 0;\n"
        "    step(idx);\n"
        "    // scan\n"
        "    int rows = sk.size();\n"
        "  }\n"
        "}\n";
    kept.patched_content =
        validate::apply_patch_to_content(kept.original_content, kept.result.candidate);
    return kept;
}

BuildInfo make_build_info() {
    BuildInfo info;
    info.repo_id = "acme/widget";
    info.base_sha = "deadbeefcafe";
    info.failure_kind = "compile error";
    info.diagnostic_excerpt = "src/Parser.java:6: error: cannot find symbol: variable sk";
    return info;
}

}  // namespace

TEST_CASE("render_pull_request describes the failure and the patch") {
    const auto payload = platform::render_pull_request(make_kept_patch(), make_build_info());
    CHECK(payload.repo_id == "acme/widget");
    CHECK(payload.base_sha == "deadbeefcafe");
    CHECK(payload.body.find("compile error") != std::string::npos);
    CHECK(payload.body.find("cannot find symbol") != std::string::npos);
    CHECK(payload.body.find("0.12") != std::string::npos);
    CHECK(!payload.diff.empty());

    // The diff must contain exactly one removed and one added line.
    const auto hunks = diff::parse_unified_diff(payload.diff);
    REQUIRE(hunks.size() == 1);
    CHECK(hunks[0].removed_lines() == std::vector<std::string>{"    int rows = sk.size();"});
    CHECK(hunks[0].added_lines() == std::vector<std::string>{"int rows = idx.size();"});
}

TEST_CASE("the payload diff reapplies cleanly onto the original tree") {
    const auto kept = make_kept_patch();
    const auto payload = platform::render_pull_request(kept, make_build_info());
    const auto hunks = diff::parse_unified_diff(payload.diff);
    CHECK(diff::apply_to_content(kept.original_content, hunks) == kept.patched_content);
}

TEST_CASE("an outcome without a kept patch cannot become a pull request") {
    CHECK_THROWS_AS(platform::render_pull_request(std::nullopt, make_build_info()),
                    platform::NoKeptPatch);
}

TEST_CASE("dry-run submission writes a parseable payload file") {
    testsupport::TempDir dir("forge-dry");
    const auto payload = platform::render_pull_request(make_kept_patch(), make_build_info());
    SubmitMode mode;
    mode.kind = SubmitMode::Kind::DryRun;
    mode.out_dir = dir.path();

    const auto receipt = platform::submit(payload, mode);
    CHECK(receipt.status == platform::SubmissionReceipt::Status::Created);
    REQUIRE(std::filesystem::exists(receipt.payload_file));
    CHECK(receipt.payload_file.filename().string() == "acme_widget-deadbeefcafe.json");

    const auto back =
        platform::payload_from_json(nlohmann::json::parse(testsupport::read_file(
            receipt.payload_file)));
    CHECK(back == payload);

    // Same (repo, base_sha) key overwrites rather than duplicating.
    auto second = payload;
    second.title = "updated title";
    const auto receipt2 = platform::submit(second, mode);
    CHECK(receipt2.payload_file == receipt.payload_file);
    const auto again = platform::payload_from_json(
        nlohmann::json::parse(testsupport::read_file(receipt.payload_file)));
    CHECK(again.title == "updated title");
}

TEST_CASE("http submission hits the forge endpoint with an idempotency key") {
    httplib::Server server;
    std::set<std::string> seen_keys;
    std::atomic<int> created{0};
    server.Post("/repos/acme/widget/pulls",
                [&](const httplib::Request& req, httplib::Response& res) {
                    const auto key = req.get_header_value("X-Idempotency-Key");
                    REQUIRE(!key.empty());
                    CHECK(req.get_header_value("Authorization") == "Bearer sekrit");
                    const auto body = nlohmann::json::parse(req.body);
                    CHECK(body.contains("title"));
                    CHECK(body.contains("diff"));
                    CHECK(body.contains("base_sha"));
                    if (!seen_keys.insert(key).second) {
                        res.status = 409;
                        return;
                    }
                    ++created;
                    res.status = 201;
                    res.set_content(R"({"id": "pr-77"})", "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const auto payload = platform::render_pull_request(make_kept_patch(), make_build_info());
    SubmitMode mode;
    mode.kind = SubmitMode::Kind::Http;
    mode.endpoint = "http://127.0.0.1:" + std::to_string(port);
    mode.token = "sekrit";

    const auto first = platform::submit(payload, mode);
    CHECK(first.status == platform::SubmissionReceipt::Status::Created);
    CHECK(first.remote_id == "pr-77");

    // Identical payload, identical key: the stub dedupes, the client
    // treats the 409 as success.
    const auto second = platform::submit(payload, mode);
    CHECK(second.status == platform::SubmissionReceipt::Status::Duplicate);
    CHECK(created == 1);

    server.stop();
    server_thread.join();
}

TEST_CASE("http failure modes surface as typed errors") {
    httplib::Server server;
    server.Post("/repos/acme/widget/pulls", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const auto payload = platform::render_pull_request(make_kept_patch(), make_build_info());
    SubmitMode mode;
    mode.kind = SubmitMode::Kind::Http;
    mode.endpoint = "http://127.0.0.1:" + std::to_string(port);
    CHECK_THROWS_AS(platform::submit(payload, mode), platform::Rejected);
    server.stop();
    server_thread.join();

    mode.endpoint = "http://127.0.0.1:1";  // nothing listens there
    CHECK_THROWS_AS(platform::submit(payload, mode), platform::Unreachable);
}

TEST_CASE("dry-run and http submissions serialize the same payload JSON") {
    const auto payload = platform::render_pull_request(make_kept_patch(), make_build_info());
    const auto j = platform::payload_to_json(payload);
    CHECK(j.at("repo_id") == payload.repo_id);
    CHECK(j.at("base_sha") == payload.base_sha);
    CHECK(j.at("title") == payload.title);
    CHECK(j.at("body") == payload.body);
    CHECK(j.at("diff") == payload.diff);
    CHECK(platform::payload_from_json(j) == payload);
}
