#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "linefix/orchestrate.hpp"

namespace lf = linefix;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> checkpoint_dir;
    std::optional<int> beam_width;
    std::optional<int> loc_limit;
    std::optional<int> checkpoint_every;
    bool no_ods = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "bot config JSON");
    if (config_required) opt->required();
    cmd->add_option("--seed", flags.seed, "RNG seed override");
    cmd->add_option("--checkpoint-dir", flags.checkpoint_dir, "checkpoint directory override");
    cmd->add_option("--beam-width", flags.beam_width, "beam width override");
    cmd->add_option("--loc-limit", flags.loc_limit, "max suspicious locations per build");
    cmd->add_option("--checkpoint-every", flags.checkpoint_every,
                    "pairs between checkpoints");
    cmd->add_flag("--no-ods", flags.no_ods, "skip the overfitting filter");
}

lf::orchestrate::BotConfig load_config(const CommonFlags& flags) {
    auto config = lf::orchestrate::load_bot_config(flags.config_path);
    if (flags.seed) config.seed = *flags.seed;
    if (flags.checkpoint_dir) config.checkpoint_dir = *flags.checkpoint_dir;
    if (flags.beam_width) config.beam_width = *flags.beam_width;
    if (flags.loc_limit) config.loc_limit = *flags.loc_limit;
    if (flags.checkpoint_every) config.checkpoint_every = *flags.checkpoint_every;
    if (flags.no_ods) config.use_ods = false;
    return config;
}

int cmd_mine(const CommonFlags& flags) {
    auto config = load_config(flags);
    auto state = lf::orchestrate::init_bot_state(config);
    lf::stream::MineStats stats;
    const auto events = lf::orchestrate::mine_all_sources(config, &stats);
    std::int64_t pairs = 0, failing = 0;
    for (const auto& event : events) {
        if (event.build_status == lf::stream::BuildStatus::Failing) {
            ++failing;
            continue;
        }
        std::vector<lf::diff::Hunk> hunks;
        try {
            hunks = lf::diff::parse_unified_diff(event.diff_text);
        } catch (const lf::diff::MalformedDiff&) {
            continue;
        }
        lf::stream::ExtractOptions opts;
        opts.context_lines = config.model.context_lines;
        opts.include_pure_edits = config.include_pure_edits;
        opts.source_sha = event.commit_sha;
        for (const auto& pair : lf::stream::extract_one_line_changes(hunks, opts)) {
            state.human_store->append(lf::stream::pair_to_json(pair, event.timestamp));
            ++pairs;
        }
    }
    nlohmann::json summary{{"events", events.size()},
                           {"failing", failing},
                           {"pairs_mined", pairs},
                           {"reordered", stats.reordered_events},
                           {"human_store", state.human_store->data_path().string()}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    auto config = load_config(flags);
    auto state = lf::orchestrate::init_bot_state(config);
    const auto events = lf::orchestrate::mine_all_sources(config);
    auto cycle = lf::orchestrate::run_training_cycle(state, events, config.checkpoint_every);
    nlohmann::json checkpoints = nlohmann::json::array();
    for (const auto& path : cycle.checkpoints_written) checkpoints.push_back(path.string());
    nlohmann::json summary{{"counters", state.counters.to_json()},
                           {"checkpoints", checkpoints},
                           {"failing_events", cycle.failing_events.size()},
                           {"vocab_size", state.vocab.size()},
                           {"vocab_frozen", state.vocab.frozen()}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_repair(const CommonFlags& flags, const std::string& workdir) {
    auto config = load_config(flags);
    auto state = lf::orchestrate::init_bot_state(config);

    // Repair uses the latest persisted checkpoint when one exists.
    try {
        const auto latest = lf::orchestrate::find_latest_checkpoint(config.checkpoint_dir);
        state.live = lf::seqmodel::load_checkpoint(latest);
        state.vocab =
            lf::codeprep::Vocabulary::load((config.checkpoint_dir / "vocab.json").string());
        state.vocab.set_max_size(static_cast<std::size_t>(config.model.vocab_capacity));
    } catch (const std::exception&) {
        // fall back to the freshly initialized model
    }

    const auto events = lf::orchestrate::mine_all_sources(config);
    if (!config.project) {
        std::cerr << "config has no project block (build_cmd/test_cmd)\n";
        return 2;
    }
    nlohmann::json outcomes = nlohmann::json::array();
    for (const auto& event : events) {
        if (event.build_status != lf::stream::BuildStatus::Failing) continue;
        auto project = lf::validate::project_config_from_json(*config.project);
        project.root = workdir.empty() ? std::filesystem::current_path()
                                       : std::filesystem::path(workdir);
        auto outcome = lf::orchestrate::run_repair(state, event, project, config.beam_width,
                                                   config.loc_limit);
        nlohmann::json entry{{"commit", event.commit_sha},
                             {"status", lf::orchestrate::repair_status_name(outcome.status)},
                             {"stage_reached", outcome.stage_reached},
                             {"candidates", outcome.results.size()}};
        if (outcome.receipt && !outcome.receipt->payload_file.empty()) {
            entry["payload_file"] = outcome.receipt->payload_file.string();
        }
        outcomes.push_back(entry);
    }
    nlohmann::json summary{{"outcomes", outcomes}, {"counters", state.counters.to_json()}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint_file,
                 const std::string& refset_file, const std::string& out_csv) {
    auto config = load_config(flags);
    const auto ckpt = lf::seqmodel::load_checkpoint(
        checkpoint_file.empty()
            ? lf::orchestrate::find_latest_checkpoint(config.checkpoint_dir)
            : std::filesystem::path(checkpoint_file));
    auto vocab = lf::codeprep::Vocabulary::load((config.checkpoint_dir / "vocab.json").string());
    const auto refset = lf::orchestrate::load_reference_set(
        refset_file.empty() ? *config.refset_path : std::filesystem::path(refset_file));
    std::vector<lf::orchestrate::EvalReport> reports{lf::orchestrate::evaluate_checkpoint(
        ckpt, refset, config.beam_width, vocab, config.model)};
    lf::orchestrate::accumulate_reports(reports);
    const auto csv = lf::orchestrate::reports_to_csv(reports);
    if (out_csv.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_csv, std::ios::trunc);
        out << csv;
        std::cout << "wrote " << out_csv << std::endl;
    }
    return 0;
}

int cmd_forgetting(const CommonFlags& flags, int entries, int epochs, int eval_every,
                   bool replay, const std::string& out_dir) {
    lf::orchestrate::ForgettingOptions options;
    options.epochs_per_phase = epochs;
    options.eval_every = eval_every;
    options.replay = replay;
    if (flags.seed) options.seed = *flags.seed;
    if (flags.beam_width) options.beam_width = *flags.beam_width;

    auto [task_a, task_b] = lf::orchestrate::make_interference_tasks(entries);
    auto result = lf::orchestrate::forgetting_experiment(task_a, task_b, options);

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream a(std::filesystem::path(out_dir) / "task_a.csv", std::ios::trunc);
        a << lf::orchestrate::reports_to_csv(result.task_a);
        std::ofstream b(std::filesystem::path(out_dir) / "task_b.csv", std::ios::trunc);
        b << lf::orchestrate::reports_to_csv(result.task_b);
    }
    auto at_boundary = std::find_if(result.task_a.begin(), result.task_a.end(),
                                    [&](const lf::orchestrate::EvalReport& r) {
                                        return r.checkpoint_id == result.phase_boundary_id;
                                    });
    const auto& a_end_of_phase_a = *at_boundary;
    const auto& a_final = result.task_a.back();
    nlohmann::json summary{
        {"entries_per_task", entries},
        {"replay", replay},
        {"phase_boundary_checkpoint", result.phase_boundary_id},
        {"task_a_fixes_after_phase_a", a_end_of_phase_a.per_checkpoint_count},
        {"task_a_fixes_after_phase_b", a_final.per_checkpoint_count},
        {"task_a_cumulative_final", a_final.cumulative_count},
        {"task_b_fixes_final", result.task_b.back().per_checkpoint_count},
        {"out_dir", out_dir}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_end2end(const CommonFlags& flags) {
    auto config = load_config(flags);
    auto result = lf::orchestrate::run_end2end(config);
    nlohmann::json repairs = nlohmann::json::array();
    for (const auto& [sha, status] : result.repairs) {
        repairs.push_back({{"commit", sha}, {"status", lf::orchestrate::repair_status_name(status)}});
    }
    nlohmann::json payloads = nlohmann::json::array();
    for (const auto& p : result.payload_files) payloads.push_back(p.string());
    nlohmann::json summary{{"counters", result.counters.to_json()},
                           {"repairs", repairs},
                           {"final_checkpoint", result.final_checkpoint.string()},
                           {"payload_files", payloads}};
    if (result.eval_csv) summary["eval_csv"] = result.eval_csv->string();
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linefix: a continual-learning one-line program repair bot"};
    app.require_subcommand(1);

    CommonFlags mine_flags, train_flags, repair_flags, eval_flags, forget_flags, e2e_flags;

    auto* mine = app.add_subcommand("mine", "replay commit streams into the human-patch store");
    add_common(mine, mine_flags);

    auto* train = app.add_subcommand("train", "continually train on passing builds");
    add_common(train, train_flags);

    auto* repair = app.add_subcommand("repair", "run the repair pipeline on failing builds");
    add_common(repair, repair_flags);
    std::string repair_workdir;
    repair->add_option("--workdir", repair_workdir,
                       "checkout of the failing commit (defaults to cwd)");

    auto* evaluate = app.add_subcommand("evaluate", "count exact-match fixes on a reference set");
    add_common(evaluate, eval_flags);
    std::string eval_ckpt, eval_refset, eval_out;
    evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint file (default: latest)");
    evaluate->add_option("--refset", eval_refset, "reference set JSONL");
    evaluate->add_option("--out", eval_out, "CSV output path (default: stdout)");

    auto* forgetting =
        app.add_subcommand("forgetting-demo", "two-phase interference experiment");
    add_common(forgetting, forget_flags, /*config_required=*/false);
    int fg_entries = 20, fg_epochs = 60, fg_eval_every = 5;
    bool fg_replay = false;
    std::string fg_out = "forgetting-out";
    forgetting->add_option("--entries", fg_entries, "pairs per task");
    forgetting->add_option("--epochs", fg_epochs, "epochs per phase");
    forgetting->add_option("--eval-every", fg_eval_every, "epochs between evaluations");
    forgetting->add_flag("--replay", fg_replay, "contrast arm: replay old pairs in phase B");
    forgetting->add_option("--out-dir", fg_out, "output directory for the curve CSVs");

    auto* end2end = app.add_subcommand("end2end", "mine, train, repair, and emit PR payloads");
    add_common(end2end, e2e_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (mine->parsed()) return cmd_mine(mine_flags);
        if (train->parsed()) return cmd_train(train_flags);
        if (repair->parsed()) return cmd_repair(repair_flags, repair_workdir);
        if (evaluate->parsed()) return cmd_evaluate(eval_flags, eval_ckpt, eval_refset, eval_out);
        if (forgetting->parsed()) {
            return cmd_forgetting(forget_flags, fg_entries, fg_epochs, fg_eval_every, fg_replay,
                                  fg_out);
        }
        if (end2end->parsed()) return cmd_end2end(e2e_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
