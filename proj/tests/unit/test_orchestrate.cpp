#include <doctest.h>

#include "linefix/orchestrate.hpp"
#include "support/fixtures.hpp"

using namespace linefix;
using orchestrate::BotConfig;
using orchestrate::BotState;

namespace {

// Synthetic commit event carrying one single-line change per (buggy, fixed)
// pair; no git repository needed.
stream::CommitEvent make_event(int n, stream::BuildStatus status,
                               const std::vector<std::pair<std::string, std::string>>& edits) {
    stream::CommitEvent ev;
    ev.repo_id = "synthetic";
    ev.commit_sha = "sha" + std::to_string(n);
    ev.parent_sha = "sha" + std::to_string(n - 1);
    ev.timestamp = 1000 + n;
    ev.build_status = status;
    for (std::size_t k = 0; k < edits.size(); ++k) {
        ev.diff_text += "--- a/file" + std::to_string(k) + ".txt\n";
        ev.diff_text += "+++ b/file" + std::to_string(k) + ".txt\n";
        ev.diff_text += "@@ -1,3 +1,3 @@\n";
        ev.diff_text += " ctx_top;\n";
        ev.diff_text += "-" + edits[k].first + "\n";
        ev.diff_text += "+" + edits[k].second + "\n";
        ev.diff_text += " ctx_bottom;\n";
    }
    return ev;
}

BotConfig small_config(const std::filesystem::path& out_dir, std::uint64_t seed = 5) {
    BotConfig config;
    config.out_dir = out_dir;
    config.checkpoint_dir = out_dir / "ckpts";
    config.human_store_dir = out_dir / "stores" / "human";
    config.machine_store_dir = out_dir / "stores" / "machine";
    config.forge.kind = platform::SubmitMode::Kind::DryRun;
    config.forge.out_dir = out_dir / "prs";
    config.model.embed_dim = 12;
    config.model.hidden_dim = 12;
    config.model.vocab_capacity = 128;
    config.model.freeze_after = 50;
    config.model.max_input_len = 48;
    config.model.max_output_len = 12;
    config.seed = seed;
    config.use_ods = true;
    return config;
}

std::vector<stream::CommitEvent> ten_single_pair_events() {
    std::vector<stream::CommitEvent> events;
    for (int i = 0; i < 10; ++i) {
        events.push_back(make_event(
            i, stream::BuildStatus::Passing,
            {{"old_" + std::to_string(i) + " = 1;", "new_" + std::to_string(i) + " = 1;"}}));
    }
    return events;
}

}  // namespace

TEST_CASE("checkpoint cadence follows the pair count") {
    testsupport::TempDir dir("orc-cadence");
    auto state = orchestrate::init_bot_state(small_config(dir.path()));
    const auto result = orchestrate::run_training_cycle(state, ten_single_pair_events(), 5);
    CHECK(state.counters.pairs_trained == 10);
    CHECK(state.counters.builds_seen == 10);
    CHECK(result.checkpoints_written.size() == 2);
    CHECK(result.failing_events.empty());
    for (const auto& path : result.checkpoints_written) {
        CHECK(std::filesystem::exists(path));
    }
    // ids and pairs_seen climb along the persisted chain
    const auto first = seqmodel::load_checkpoint(result.checkpoints_written[0]);
    const auto second = seqmodel::load_checkpoint(result.checkpoints_written[1]);
    CHECK(first.checkpoint_id == 1);
    CHECK(second.checkpoint_id == 2);
    CHECK(first.pairs_seen == 5);
    CHECK(second.pairs_seen == 10);
    CHECK(first.created_at == 1004);  // timestamp of the fifth event
}

TEST_CASE("a stream without passing builds trains nothing") {
    testsupport::TempDir dir("orc-nopass");
    auto state = orchestrate::init_bot_state(small_config(dir.path()));
    std::vector<stream::CommitEvent> events{
        make_event(1, stream::BuildStatus::Failing, {{"a;", "b;"}}),
        make_event(2, stream::BuildStatus::Failing, {{"c;", "d;"}}),
    };
    const auto result = orchestrate::run_training_cycle(state, events, 5);
    CHECK(state.counters.pairs_trained == 0);
    CHECK(result.checkpoints_written.empty());
    CHECK(result.failing_events.size() == 2);
    CHECK(state.counters.builds_failing == 2);
}

TEST_CASE("malformed diffs are skipped, not fatal") {
    testsupport::TempDir dir("orc-malformed");
    auto state = orchestrate::init_bot_state(small_config(dir.path()));
    auto bad = make_event(1, stream::BuildStatus::Passing, {{"a;", "b;"}});
    bad.diff_text = "--- a/f\n+++ b/f\n@@ -1,5 +1,5 @@\n x\n";  // truncated body
    const auto good = make_event(2, stream::BuildStatus::Passing, {{"a;", "b;"}});
    const auto result = orchestrate::run_training_cycle(state, {bad, good}, 100);
    (void)result;
    CHECK(state.counters.commits_skipped == 1);
    CHECK(state.counters.pairs_trained == 1);
}

TEST_CASE("replaying the same stream reproduces the checkpoint byte for byte") {
    testsupport::TempDir dir_a("orc-replay-a");
    testsupport::TempDir dir_b("orc-replay-b");
    const auto events = ten_single_pair_events();

    auto state_a = orchestrate::init_bot_state(small_config(dir_a.path(), 99));
    auto state_b = orchestrate::init_bot_state(small_config(dir_b.path(), 99));
    const auto result_a = orchestrate::run_training_cycle(state_a, events, 5);
    const auto result_b = orchestrate::run_training_cycle(state_b, events, 5);
    REQUIRE(result_a.checkpoints_written.size() == result_b.checkpoints_written.size());

    const auto bytes_a = testsupport::read_file(result_a.checkpoints_written.back());
    const auto bytes_b = testsupport::read_file(result_b.checkpoints_written.back());
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("training pairs land in the human store as they stream by") {
    testsupport::TempDir dir("orc-store");
    auto state = orchestrate::init_bot_state(small_config(dir.path()));
    orchestrate::run_training_cycle(state, ten_single_pair_events(), 100);
    CHECK(state.human_store->count() == 10);
    const auto record = state.human_store->read(0);
    CHECK(record.at("buggy_line") == "old_0 = 1;");
    CHECK(record.at("timestamp").get<std::int64_t>() == 1000);
}

TEST_CASE("an untrained model fixes essentially nothing") {
    orchestrate::ReferenceSet refset;
    for (int i = 0; i < 20; ++i) {
        refset.entries.push_back({"return v" + std::to_string(i) + ";\n", 1,
                                  "return w" + std::to_string(i) + ";"});
    }
    codeprep::Vocabulary vocab;
    for (int i = 0; i < 44; ++i) vocab.add("tok" + std::to_string(i));
    const auto ckpt = seqmodel::init_model(vocab.size(), 12, 12, 7);
    orchestrate::ModelConfig model;
    model.max_input_len = 32;
    model.max_output_len = 8;
    const auto report = orchestrate::evaluate_checkpoint(ckpt, refset, 1, vocab, model);
    CHECK(report.per_checkpoint_count <= 1);
}

TEST_CASE("a memorizing model reports its training entries as fixed") {
    auto [task, unused] = orchestrate::make_interference_tasks(10);
    (void)unused;
    codeprep::Vocabulary vocab = codeprep::update_vocabulary(
        codeprep::Vocabulary{}, task.pairs, static_cast<int>(task.pairs.size()));
    auto ckpt = seqmodel::init_model(vocab.size(), 24, 24, 13);

    std::vector<std::pair<codeprep::TokenSeq, codeprep::TokenSeq>> batch;
    for (const auto& pair : task.pairs) {
        batch.emplace_back(codeprep::build_model_input(pair, vocab, 32),
                           codeprep::build_model_target(pair.fixed_line, vocab));
    }
    for (int epoch = 0; epoch < 250; ++epoch) {
        ckpt = seqmodel::train_step(ckpt, batch, 5e-3).first;
    }
    orchestrate::ModelConfig model;
    model.context_lines = 0;
    model.max_input_len = 32;
    model.max_output_len = 12;
    const auto report =
        orchestrate::evaluate_checkpoint(ckpt, task.refset, 1, vocab, model);
    CHECK(report.per_checkpoint_count == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(report.fixed_ids.count(i) == 1);
}

TEST_CASE("cumulative counts are monotone across accumulated reports") {
    std::vector<orchestrate::EvalReport> reports(4);
    reports[0].fixed_ids = {0, 1};
    reports[1].fixed_ids = {1, 2, 3};
    reports[2].fixed_ids = {};  // the dip
    reports[3].fixed_ids = {5};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        reports[i].checkpoint_id = static_cast<std::int64_t>(i);
        reports[i].per_checkpoint_count = static_cast<int>(reports[i].fixed_ids.size());
    }
    orchestrate::accumulate_reports(reports);
    CHECK(reports[0].cumulative_count == 2);
    CHECK(reports[1].cumulative_count == 4);
    CHECK(reports[2].cumulative_count == 4);
    CHECK(reports[3].cumulative_count == 5);
    for (const auto& r : reports) {
        CHECK(r.cumulative_count >= r.per_checkpoint_count);
    }
    const auto csv = orchestrate::reports_to_csv(reports);
    CHECK(csv.rfind("checkpoint_id,per_checkpoint_count,cumulative_count\n", 0) == 0);
    CHECK(csv.find("2,0,4\n") != std::string::npos);
}

TEST_CASE("pair_from_location clamps context at file edges") {
    const std::vector<std::string> lines{"l1", "l2", "l3", "l4"};
    const auto head = orchestrate::pair_from_location(lines, 1, 2);
    CHECK(head.buggy_line == "l1");
    CHECK(head.context_before.empty());
    CHECK(head.context_after == std::vector<std::string>{"l2", "l3"});
    const auto tail = orchestrate::pair_from_location(lines, 4, 2);
    CHECK(tail.context_before == std::vector<std::string>{"l2", "l3"});
    CHECK(tail.context_after.empty());
    CHECK_THROWS_AS(orchestrate::pair_from_location(lines, 5, 2), std::out_of_range);
}

TEST_CASE("the best kept patch is the highest generation score") {
    std::vector<validate::ValidationResult> results(3);
    results[0].candidate = {"a.c", 1, "x", "y", -2.0, 0};
    results[1].candidate = {"a.c", 1, "x", "z", -0.5, 0};
    results[2].candidate = {"b.c", 9, "x", "w", -0.5, 0};
    CHECK(orchestrate::select_best_kept(results, {0, 1, 2}) == 1);  // tie -> a.c before b.c
    CHECK(orchestrate::select_best_kept(results, {0, 2}) == 2);
    CHECK(orchestrate::select_best_kept(results, {0}) == 0);
    CHECK_THROWS_AS(orchestrate::select_best_kept(results, {}), std::invalid_argument);
}

TEST_CASE("run_repair reports a build that does not fail locally") {
    testsupport::TempDir out("orc-notfailing");
    testsupport::TempDir checkout("orc-checkout");
    testsupport::write_file(checkout.path() / "ok.txt", "fine\n");
    auto state = orchestrate::init_bot_state(small_config(out.path()));
    validate::ProjectConfig project;
    project.root = checkout.path();
    project.build_cmd = "true";
    project.test_cmd = "true";
    project.timeout_s = 10;
    const auto failing = make_event(3, stream::BuildStatus::Failing, {});
    const auto outcome = orchestrate::run_repair(state, failing, project, 2, 5);
    CHECK(outcome.status == orchestrate::RepairStatus::BuildNotFailing);
}

TEST_CASE("run_repair gives up cleanly when nothing is localizable") {
    testsupport::TempDir out("orc-noloc");
    testsupport::TempDir checkout("orc-checkout2");
    testsupport::write_file(checkout.path() / "ok.txt", "fine\n");
    auto state = orchestrate::init_bot_state(small_config(out.path()));
    validate::ProjectConfig project;
    project.root = checkout.path();
    project.build_cmd = "echo generic failure without any location && false";
    project.test_cmd = "true";
    project.timeout_s = 10;
    const auto failing = make_event(4, stream::BuildStatus::Failing, {});
    const auto outcome = orchestrate::run_repair(state, failing, project, 2, 5);
    CHECK(outcome.status == orchestrate::RepairStatus::NoLocationsFound);
    CHECK(outcome.stage_reached == "localize");
    // The audit trail records the stage ordering.
    const auto audit = testsupport::read_file(out.path() / "stores" / "machine" / "audit" /
                                              (failing.commit_sha + ".jsonl"));
    CHECK(audit.find("evidence") != std::string::npos);
    CHECK(audit.find("localize") != std::string::npos);
}

TEST_CASE("interference tasks share shape but conflict on the rewrite") {
    const auto [task_a, task_b] = orchestrate::make_interference_tasks(5);
    REQUIRE(task_a.pairs.size() == 5);
    REQUIRE(task_b.refset.entries.size() == 5);
    CHECK(task_a.pairs[0].buggy_line == "return alpha0;");
    CHECK(task_a.pairs[0].fixed_line == "return wrap_a(alpha0);");
    CHECK(task_b.pairs[0].fixed_line == "return wrap_b(beta0);");
}

TEST_CASE("a short forgetting run produces consistent curve data") {
    auto [task_a, task_b] = orchestrate::make_interference_tasks(4);
    orchestrate::ForgettingOptions options;
    options.epochs_per_phase = 8;
    options.eval_every = 4;
    options.batch_size = 2;
    options.seed = 3;
    options.embed_dim = 16;
    options.hidden_dim = 16;
    const auto result = orchestrate::forgetting_experiment(task_a, task_b, options);
    REQUIRE(result.task_a.size() == result.task_b.size());
    REQUIRE(result.task_a.size() == 5);  // baseline + 2 evals per phase
    for (std::size_t i = 1; i < result.task_a.size(); ++i) {
        CHECK(result.task_a[i].cumulative_count >= result.task_a[i - 1].cumulative_count);
        CHECK(result.task_a[i].checkpoint_id > result.task_a[i - 1].checkpoint_id);
    }
    for (const auto& r : result.task_a) {
        CHECK(r.cumulative_count >= r.per_checkpoint_count);
    }
}

TEST_CASE("bot config parses from JSON with overrides and defaults") {
    const nlohmann::json j{
        {"stream", {{{"repo", "/tmp/r1"}, {"status_file", "/tmp/s1"}}}},
        {"model", {{"embed_dim", 8}, {"hidden_dim", 9}, {"vocab_capacity", 77}}},
        {"checkpoint_every", 42},
        {"out_dir", "/tmp/out"},
        {"forge", {{"mode", "http"}, {"endpoint", "http://x"}, {"token", "t"}}},
        {"loc_limit", 3},
        {"seed", 1234}};
    const auto config = orchestrate::bot_config_from_json(j);
    REQUIRE(config.stream.size() == 1);
    CHECK(config.stream[0].repo == "/tmp/r1");
    REQUIRE(config.stream[0].status_file.has_value());
    CHECK(config.model.embed_dim == 8);
    CHECK(config.model.hidden_dim == 9);
    CHECK(config.model.vocab_capacity == 77);
    CHECK(config.checkpoint_every == 42);
    CHECK(config.forge.kind == platform::SubmitMode::Kind::Http);
    CHECK(config.forge.endpoint == "http://x");
    CHECK(config.loc_limit == 3);
    CHECK(config.seed == 1234);
    CHECK(config.checkpoint_dir == std::filesystem::path("/tmp/out/checkpoints"));
}
