#include "linefix/orchestrate.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "linefix/subprocess.hpp"
#include "linefix/textutil.hpp"

namespace linefix::orchestrate {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Per-build audit trail: one JSONL line per pipeline stage, in order.
class AuditLog {
public:
    AuditLog(const std::filesystem::path& dir, const std::string& sha, std::int64_t event_ts)
        : event_ts_(event_ts) {
        std::filesystem::create_directories(dir);
        out_.open(dir / (sha + ".jsonl"), std::ios::trunc);
    }

    void stage(const std::string& name, const nlohmann::json& detail = {}) {
        nlohmann::json line{{"seq", seq_++}, {"stage", name}, {"event_timestamp", event_ts_}};
        if (!detail.is_null() && !detail.empty()) line["detail"] = detail;
        out_ << line.dump() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
    std::int64_t event_ts_;
    int seq_ = 0;
};

nlohmann::json candidate_to_json(const validate::PatchCandidate& c) {
    return nlohmann::json{{"file_path", c.file_path},
                          {"line_no", c.line_no},
                          {"original_line", c.original_line},
                          {"replacement_line", c.replacement_line},
                          {"score", c.score},
                          {"source_checkpoint_id", c.source_checkpoint_id}};
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t id) {
    char name[32];
    std::snprintf(name, sizeof(name), "checkpoint_%06lld.bin", static_cast<long long>(id));
    return dir / name;
}

void write_live_checkpoint(BotState& state) {
    std::filesystem::create_directories(state.config.checkpoint_dir);
    state.live.checkpoint_id += 1;
    state.live.vocab_version = state.vocab.version();
    save_checkpoint(state.live, checkpoint_path(state.config.checkpoint_dir,
                                                state.live.checkpoint_id));
    state.vocab.save((state.config.checkpoint_dir / "vocab.json").string());
}

std::string first_log_lines(const std::string& log, std::size_t max_lines) {
    std::string out;
    std::size_t n = 0;
    for (const auto& line : split_lines(log)) {
        if (line.empty()) continue;
        out += line;
        out += '\n';
        if (++n >= max_lines) break;
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

}  // namespace

BotConfig bot_config_from_json(const nlohmann::json& j) {
    BotConfig c;
    if (j.contains("stream")) {
        for (const auto& s : j.at("stream")) {
            StreamSource src;
            src.repo = s.at("repo").get<std::string>();
            src.range = s.value("range", std::string("HEAD"));
            if (s.contains("status_file") && !s.at("status_file").is_null()) {
                src.status_file = s.at("status_file").get<std::string>();
            }
            c.stream.push_back(std::move(src));
        }
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        c.model.embed_dim = m.value("embed_dim", c.model.embed_dim);
        c.model.hidden_dim = m.value("hidden_dim", c.model.hidden_dim);
        c.model.vocab_capacity = m.value("vocab_capacity", c.model.vocab_capacity);
        c.model.freeze_after = m.value("freeze_after", c.model.freeze_after);
        c.model.max_input_len = m.value("max_input_len", c.model.max_input_len);
        c.model.max_output_len = m.value("max_output_len", c.model.max_output_len);
        c.model.context_lines = m.value("context_lines", c.model.context_lines);
        c.model.learning_rate = m.value("learning_rate", c.model.learning_rate);
    }
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.out_dir = j.value("out_dir", c.out_dir.string());
    c.checkpoint_dir = j.value("checkpoint_dir", (c.out_dir / "checkpoints").string());
    c.human_store_dir = j.value("human_store", (c.out_dir / "stores" / "human").string());
    c.machine_store_dir = j.value("machine_store", (c.out_dir / "stores" / "machine").string());
    if (j.contains("ods_model") && !j.at("ods_model").is_null()) {
        c.ods_model_path = j.at("ods_model").get<std::string>();
    }
    if (j.contains("forge")) {
        const auto& f = j.at("forge");
        const std::string mode = f.value("mode", std::string("dryrun"));
        if (mode == "http") {
            c.forge.kind = platform::SubmitMode::Kind::Http;
            c.forge.endpoint = f.at("endpoint").get<std::string>();
            c.forge.token = f.value("token", std::string());
        } else {
            c.forge.kind = platform::SubmitMode::Kind::DryRun;
            c.forge.out_dir = f.value("out_dir", (c.out_dir / "prs").string());
        }
    } else {
        c.forge.kind = platform::SubmitMode::Kind::DryRun;
        c.forge.out_dir = c.out_dir / "prs";
    }
    if (j.contains("project") && !j.at("project").is_null()) c.project = j.at("project");
    if (j.contains("coverage_file") && !j.at("coverage_file").is_null()) {
        c.coverage_file = j.at("coverage_file").get<std::string>();
    }
    if (j.contains("refset") && !j.at("refset").is_null()) {
        c.refset_path = j.at("refset").get<std::string>();
    }
    c.loc_limit = j.value("loc_limit", c.loc_limit);
    c.beam_width = j.value("beam_width", c.beam_width);
    c.use_ods = j.value("use_ods", c.use_ods);
    c.include_pure_edits = j.value("include_pure_edits", c.include_pure_edits);
    c.validate_parallelism = j.value("validate_parallelism", c.validate_parallelism);
    c.seed = j.value("seed", c.seed);
    return c;
}

BotConfig load_bot_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config: " + path.string());
    nlohmann::json j;
    in >> j;
    return bot_config_from_json(j);
}

nlohmann::json Counters::to_json() const {
    return nlohmann::json{{"pairs_trained", pairs_trained},
                          {"builds_seen", builds_seen},
                          {"builds_failing", builds_failing},
                          {"plausible_found", plausible_found},
                          {"discarded_by_ods", discarded_by_ods},
                          {"prs_emitted", prs_emitted},
                          {"commits_skipped", commits_skipped},
                          {"lr_halvings", lr_halvings}};
}

BotState init_bot_state(const BotConfig& config) {
    BotState state;
    state.config = config;
    if (state.config.checkpoint_dir.empty()) {
        state.config.checkpoint_dir = config.out_dir / "checkpoints";
    }
    if (state.config.human_store_dir.empty()) {
        state.config.human_store_dir = config.out_dir / "stores" / "human";
    }
    if (state.config.machine_store_dir.empty()) {
        state.config.machine_store_dir = config.out_dir / "stores" / "machine";
    }
    if (state.config.forge.kind == platform::SubmitMode::Kind::DryRun &&
        state.config.forge.out_dir.empty()) {
        state.config.forge.out_dir = config.out_dir / "prs";
    }
    state.vocab.set_max_size(static_cast<std::size_t>(config.model.vocab_capacity));
    state.live = seqmodel::init_model(config.model.vocab_capacity, config.model.embed_dim,
                                      config.model.hidden_dim, config.seed);
    state.learning_rate = config.model.learning_rate;
    state.next_checkpoint_at = 0;
    if (config.use_ods) {
        state.ods_model = config.ods_model_path ? ods::load_model(*config.ods_model_path)
                                                : ods::bootstrap_model();
    }
    state.human_store = std::make_shared<platform::PatchStore>(state.config.human_store_dir,
                                                               platform::StoreKind::Human);
    state.machine_store = std::make_shared<platform::PatchStore>(state.config.machine_store_dir,
                                                                 platform::StoreKind::Machine);
    return state;
}

TrainingCycleResult run_training_cycle(BotState& state,
                                       const std::vector<stream::CommitEvent>& events,
                                       int checkpoint_every) {
    if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
    TrainingCycleResult result;
    if (state.next_checkpoint_at <= 0) {
        state.next_checkpoint_at = state.counters.pairs_trained + checkpoint_every;
    }

    for (const auto& event : events) {
        state.counters.builds_seen += 1;
        if (event.build_status == stream::BuildStatus::Failing) {
            state.counters.builds_failing += 1;
            result.failing_events.push_back(event);
            continue;
        }

        std::vector<diff::Hunk> hunks;
        try {
            hunks = diff::parse_unified_diff(event.diff_text);
        } catch (const diff::MalformedDiff&) {
            state.counters.commits_skipped += 1;
            continue;
        }
        stream::ExtractOptions opts;
        opts.context_lines = state.config.model.context_lines;
        opts.include_pure_edits = state.config.include_pure_edits;
        opts.source_sha = event.commit_sha;
        const auto pairs = stream::extract_one_line_changes(hunks, opts);
        if (pairs.empty()) continue;

        state.vocab = codeprep::update_vocabulary(std::move(state.vocab), pairs,
                                                  state.config.model.freeze_after);

        std::vector<std::pair<codeprep::TokenSeq, codeprep::TokenSeq>> batch;
        for (const auto& pair : pairs) {
            try {
                batch.emplace_back(
                    codeprep::build_model_input(pair, state.vocab,
                                                state.config.model.max_input_len),
                    codeprep::build_model_target(pair.fixed_line, state.vocab));
            } catch (const codeprep::BugLineTooLong&) {
                state.counters.commits_skipped += 1;
            }
            state.human_store->append(stream::pair_to_json(pair, event.timestamp));
        }
        if (batch.empty()) continue;

        try {
            auto [next, loss] = seqmodel::train_step(state.live, batch, state.learning_rate);
            (void)loss;
            state.live = std::move(next);
        } catch (const seqmodel::NonFiniteLoss&) {
            // Keep the previous weights, drop the batch, back off.
            state.learning_rate /= 2.0;
            state.counters.lr_halvings += 1;
            continue;
        }
        state.live.created_at = event.timestamp;
        state.live.vocab_version = state.vocab.version();
        state.counters.pairs_trained += static_cast<std::int64_t>(batch.size());

        if (state.counters.pairs_trained >= state.next_checkpoint_at) {
            write_live_checkpoint(state);
            result.checkpoints_written.push_back(
                checkpoint_path(state.config.checkpoint_dir, state.live.checkpoint_id));
            state.next_checkpoint_at =
                (state.counters.pairs_trained / checkpoint_every + 1) * checkpoint_every;
        }
    }
    return result;
}

const char* repair_status_name(RepairStatus s) {
    switch (s) {
        case RepairStatus::PullRequestCreated: return "PullRequestCreated";
        case RepairStatus::BuildNotFailing: return "BuildNotFailing";
        case RepairStatus::NoLocationsFound: return "NoLocationsFound";
        case RepairStatus::NoCandidates: return "NoCandidates";
        case RepairStatus::NonePlausible: return "NonePlausible";
        case RepairStatus::AllDiscarded: return "AllDiscarded";
    }
    return "Unknown";
}

stream::TrainingPair pair_from_location(const std::vector<std::string>& file_lines, int line_no,
                                        int context_lines) {
    if (line_no < 1 || static_cast<std::size_t>(line_no) > file_lines.size()) {
        throw std::out_of_range("location line outside file");
    }
    stream::TrainingPair pair;
    pair.line_no = line_no;
    pair.buggy_line = file_lines[static_cast<std::size_t>(line_no - 1)];
    const int lo = std::max(1, line_no - context_lines);
    for (int i = lo; i < line_no; ++i) {
        pair.context_before.push_back(file_lines[static_cast<std::size_t>(i - 1)]);
    }
    const int hi = std::min<int>(static_cast<int>(file_lines.size()), line_no + context_lines);
    for (int i = line_no + 1; i <= hi; ++i) {
        pair.context_after.push_back(file_lines[static_cast<std::size_t>(i - 1)]);
    }
    return pair;
}

RepairOutcome run_repair(BotState& state, const stream::CommitEvent& failing,
                         const validate::ProjectConfig& project, int beam_width, int loc_limit) {
    RepairOutcome outcome;
    AuditLog audit(state.config.machine_store_dir / "audit", failing.commit_sha,
                   failing.timestamp);

    // Evidence: reproduce the failure in the checkout.
    audit.stage("evidence");
    outcome.stage_reached = "evidence";
    localize::FailureEvidence evidence;
    auto build = proc::run_command(project.build_cmd, project.root, project.env,
                                   project.timeout_s);
    if (build.timed_out || build.exit_code != 0) {
        evidence.compile_failed = true;
        evidence.build_log = build.output;
    } else {
        auto test = proc::run_command(project.test_cmd, project.root, project.env,
                                      project.timeout_s);
        if (test.timed_out || test.exit_code != 0) {
            evidence.tests_failed = true;
            evidence.build_log = test.output;
        } else {
            outcome.status = RepairStatus::BuildNotFailing;
            outcome.detail = "build and tests pass locally despite the failing event";
            audit.stage("done", {{"status", repair_status_name(outcome.status)}});
            return outcome;
        }
    }

    std::optional<localize::CoverageMatrix> coverage;
    if (evidence.tests_failed && state.config.coverage_file) {
        const auto cov_path = project.root / *state.config.coverage_file;
        if (std::filesystem::exists(cov_path)) {
            coverage = localize::read_coverage_jsonl(cov_path);
        }
    }

    audit.stage("localize");
    outcome.stage_reached = "localize";
    std::vector<localize::SuspiciousLocation> locations;
    try {
        locations = localize::localize(evidence, coverage, loc_limit);
    } catch (const localize::NoLocationsFound&) {
        outcome.status = RepairStatus::NoLocationsFound;
        audit.stage("done", {{"status", repair_status_name(outcome.status)}});
        return outcome;
    }
    audit.stage("generate", {{"locations", locations.size()}});
    outcome.stage_reached = "generate";

    std::vector<validate::PatchCandidate> candidates;
    std::set<std::string> dedup;
    for (const auto& loc : locations) {
        const auto file_path = project.root / loc.file_path;
        if (!std::filesystem::is_regular_file(file_path)) continue;
        const auto lines = split_lines(read_file(file_path));
        if (loc.line_no < 1 || static_cast<std::size_t>(loc.line_no) > lines.size()) continue;

        codeprep::TokenSeq input;
        try {
            input = codeprep::build_model_input(
                pair_from_location(lines, loc.line_no, state.config.model.context_lines),
                state.vocab, state.config.model.max_input_len);
        } catch (const codeprep::BugLineTooLong&) {
            continue;
        }
        const auto hypotheses = seqmodel::generate(state.live, input, beam_width,
                                                   state.config.model.max_output_len,
                                                   state.vocab);
        const std::string& original = lines[static_cast<std::size_t>(loc.line_no - 1)];
        for (const auto& hyp : hypotheses) {
            std::string replacement;
            try {
                replacement = codeprep::render_patch(hyp.tokens, input.tokens);
            } catch (const std::exception&) {
                continue;
            }
            if (replacement.empty()) continue;
            if (normalize_whitespace(replacement) == normalize_whitespace(original)) continue;
            // Rendered lines come back unindented; inherit the original
            // line's leading whitespace so indentation-sensitive builds
            // stay intact.
            const auto indent_end = original.find_first_not_of(" \t");
            if (indent_end != std::string::npos && indent_end > 0) {
                replacement = original.substr(0, indent_end) + replacement;
            }
            const std::string key = loc.file_path + ":" + std::to_string(loc.line_no) + ":" +
                                    normalize_whitespace(replacement);
            if (!dedup.insert(key).second) continue;
            validate::PatchCandidate cand;
            cand.file_path = loc.file_path;
            cand.line_no = loc.line_no;
            cand.original_line = original;
            cand.replacement_line = replacement;
            cand.score = hyp.log_prob;
            cand.source_checkpoint_id = state.live.checkpoint_id;
            candidates.push_back(std::move(cand));
        }
    }
    if (candidates.empty()) {
        outcome.status = RepairStatus::NoCandidates;
        audit.stage("done", {{"status", repair_status_name(outcome.status)}});
        return outcome;
    }

    audit.stage("validate", {{"candidates", candidates.size()}});
    outcome.stage_reached = "validate";
    outcome.results = validate::validate_all(candidates, project,
                                             state.config.validate_parallelism);
    std::vector<std::size_t> plausible;
    for (std::size_t i = 0; i < outcome.results.size(); ++i) {
        const auto& r = outcome.results[i];
        state.machine_store->append(
            {{"candidate", candidate_to_json(r.candidate)},
             {"validation_verdict", validate::verdict_name(r.verdict)},
             {"ods_probability", nullptr},
             {"ods_verdict", nullptr},
             {"stage_reached", "validated"},
             {"timestamps", {{"event", failing.timestamp}, {"seq", i}}}});
        if (r.plausible) {
            plausible.push_back(i);
            state.counters.plausible_found += 1;
        }
    }
    if (plausible.empty()) {
        outcome.status = RepairStatus::NonePlausible;
        audit.stage("done", {{"status", repair_status_name(outcome.status)}});
        return outcome;
    }

    audit.stage("ods", {{"plausible", plausible.size()}});
    outcome.stage_reached = "ods";
    std::vector<std::size_t> kept;
    for (std::size_t idx : plausible) {
        const auto& r = outcome.results[idx];
        OdsDecision decision;
        decision.result_index = idx;
        if (state.config.use_ods && state.ods_model) {
            const auto file_path = project.root / r.candidate.file_path;
            const auto lines = split_lines(read_file(file_path));
            std::vector<std::string> preceding(
                lines.begin(),
                lines.begin() + std::min<std::size_t>(lines.size(),
                                                      static_cast<std::size_t>(
                                                          r.candidate.line_no - 1)));
            const auto scope = ods::collect_identifiers(preceding);
            const auto features = ods::extract_features(r.candidate.original_line,
                                                        r.candidate.replacement_line,
                                                        preceding, scope);
            auto [p, verdict] = ods::classify(*state.ods_model, features);
            decision.probability = p;
            decision.verdict = verdict;
            if (verdict == ods::OdsVerdict::Discard) state.counters.discarded_by_ods += 1;
        } else {
            decision.probability = 0.0;
            decision.verdict = ods::OdsVerdict::Keep;
        }
        state.machine_store->append(
            {{"candidate", candidate_to_json(r.candidate)},
             {"validation_verdict", validate::verdict_name(r.verdict)},
             {"ods_probability", decision.probability},
             {"ods_verdict", decision.verdict == ods::OdsVerdict::Keep ? "Keep" : "Discard"},
             {"stage_reached", "ods"},
             {"timestamps", {{"event", failing.timestamp}, {"seq", idx}}}});
        outcome.ods_decisions.push_back(decision);
        if (decision.verdict == ods::OdsVerdict::Keep) kept.push_back(idx);
    }
    if (kept.empty()) {
        outcome.status = RepairStatus::AllDiscarded;
        audit.stage("done", {{"status", repair_status_name(outcome.status)}});
        return outcome;
    }

    const std::size_t best_index = select_best_kept(outcome.results, kept);
    const auto& best = outcome.results[best_index];

    audit.stage("submit", {{"file", best.candidate.file_path},
                           {"line", best.candidate.line_no}});
    outcome.stage_reached = "submit";
    platform::BuildInfo info;
    info.repo_id = failing.repo_id;
    info.base_sha = failing.commit_sha;
    info.failure_kind = evidence.compile_failed ? "compile error" : "test failure";
    info.diagnostic_excerpt = first_log_lines(evidence.build_log, 5);

    platform::KeptPatch kept_patch;
    kept_patch.result = best;
    for (const auto& d : outcome.ods_decisions) {
        if (d.result_index == best_index && state.config.use_ods && state.ods_model) {
            kept_patch.ods_probability = d.probability;
        }
    }
    kept_patch.original_content = read_file(project.root / best.candidate.file_path);
    kept_patch.patched_content =
        validate::apply_patch_to_content(kept_patch.original_content, best.candidate);

    outcome.payload = platform::render_pull_request(kept_patch, info);
    outcome.receipt = platform::submit(*outcome.payload, state.config.forge);
    state.counters.prs_emitted += 1;
    outcome.status = RepairStatus::PullRequestCreated;
    audit.stage("done", {{"status", repair_status_name(outcome.status)}});
    return outcome;
}

std::size_t select_best_kept(const std::vector<validate::ValidationResult>& results,
                             const std::vector<std::size_t>& kept) {
    if (kept.empty()) throw std::invalid_argument("select_best_kept: nothing kept");
    return *std::min_element(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
        const auto& ca = results[a].candidate;
        const auto& cb = results[b].candidate;
        if (ca.score != cb.score) return ca.score > cb.score;
        if (ca.file_path != cb.file_path) return ca.file_path < cb.file_path;
        if (ca.line_no != cb.line_no) return ca.line_no < cb.line_no;
        return ca.replacement_line < cb.replacement_line;
    });
}

ReferenceSet load_reference_set(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read reference set: " + path.string());
    ReferenceSet refset;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        ReferenceEntry entry;
        entry.file_content = j.at("file_content").get<std::string>();
        entry.line_no = j.at("line_no").get<int>();
        entry.fixed_line = j.at("fixed_line").get<std::string>();
        refset.entries.push_back(std::move(entry));
    }
    if (refset.entries.empty()) {
        throw std::runtime_error("reference set is empty: " + path.string());
    }
    return refset;
}

EvalReport evaluate_checkpoint(const seqmodel::Checkpoint& ckpt, const ReferenceSet& refset,
                               int beam_width, const codeprep::Vocabulary& vocab,
                               const ModelConfig& model) {
    if (refset.entries.empty()) throw std::invalid_argument("reference set must be nonempty");
    EvalReport report;
    report.checkpoint_id = ckpt.checkpoint_id;
    for (std::size_t idx = 0; idx < refset.entries.size(); ++idx) {
        const auto& entry = refset.entries[idx];
        const auto lines = split_lines(entry.file_content);
        codeprep::TokenSeq input;
        try {
            input = codeprep::build_model_input(
                pair_from_location(lines, entry.line_no, model.context_lines), vocab,
                model.max_input_len);
        } catch (const std::exception&) {
            continue;
        }
        const auto hypotheses =
            seqmodel::generate(ckpt, input, beam_width, model.max_output_len, vocab);
        const std::string want = normalize_whitespace(entry.fixed_line);
        for (const auto& hyp : hypotheses) {
            std::string rendered;
            try {
                rendered = codeprep::render_patch(hyp.tokens, input.tokens);
            } catch (const std::exception&) {
                continue;
            }
            if (normalize_whitespace(rendered) == want) {
                report.fixed_ids.insert(idx);
                break;
            }
        }
    }
    report.per_checkpoint_count = static_cast<int>(report.fixed_ids.size());
    return report;
}

void accumulate_reports(std::vector<EvalReport>& reports) {
    std::set<std::size_t> cumulative;
    for (auto& r : reports) {
        cumulative.insert(r.fixed_ids.begin(), r.fixed_ids.end());
        r.cumulative_fixed = cumulative;
        r.cumulative_count = static_cast<int>(cumulative.size());
    }
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
    std::string csv = "checkpoint_id,per_checkpoint_count,cumulative_count\n";
    for (const auto& r : reports) {
        csv += std::to_string(r.checkpoint_id) + "," + std::to_string(r.per_checkpoint_count) +
               "," + std::to_string(r.cumulative_count) + "\n";
    }
    return csv;
}

std::pair<TaskData, TaskData> make_interference_tasks(int entries) {
    auto build = [entries](const std::string& name, const std::string& var_stem,
                           const std::string& wrapper) {
        TaskData task;
        task.name = name;
        for (int i = 0; i < entries; ++i) {
            const std::string var = var_stem + std::to_string(i);
            stream::TrainingPair pair;
            pair.file_path = name + ".txt";
            pair.line_no = 1;
            pair.buggy_line = "return " + var + ";";
            pair.fixed_line = "return " + wrapper + "(" + var + ");";
            pair.source_sha = name;
            task.pairs.push_back(pair);

            ReferenceEntry entry;
            entry.file_content = pair.buggy_line + "\n";
            entry.line_no = 1;
            entry.fixed_line = pair.fixed_line;
            task.refset.entries.push_back(std::move(entry));
        }
        return task;
    };
    // Same sentence shape, conflicting rewrite rule: phase B pulls the
    // shared "return <var>;" mapping away from phase A's wrapper.
    return {build("task_a", "alpha", "wrap_a"), build("task_b", "beta", "wrap_b")};
}

ForgettingResult forgetting_experiment(const TaskData& task_a, const TaskData& task_b,
                                       const ForgettingOptions& options) {
    ForgettingResult result;

    codeprep::Vocabulary vocab;
    std::vector<stream::TrainingPair> all_pairs = task_a.pairs;
    all_pairs.insert(all_pairs.end(), task_b.pairs.begin(), task_b.pairs.end());
    vocab = codeprep::update_vocabulary(std::move(vocab), all_pairs,
                                        static_cast<int>(all_pairs.size()));

    seqmodel::Checkpoint live = seqmodel::init_model(vocab.size(), options.embed_dim,
                                                     options.hidden_dim, options.seed);
    live.vocab_version = vocab.version();

    ModelConfig eval_model;
    eval_model.context_lines = 0;
    eval_model.max_input_len = options.max_input_len;
    eval_model.max_output_len = options.max_output_len;

    auto to_batchable = [&](const std::vector<stream::TrainingPair>& pairs) {
        std::vector<std::pair<codeprep::TokenSeq, codeprep::TokenSeq>> out;
        for (const auto& p : pairs) {
            out.emplace_back(codeprep::build_model_input(p, vocab, options.max_input_len),
                             codeprep::build_model_target(p.fixed_line, vocab));
        }
        return out;
    };
    const auto data_a = to_batchable(task_a.pairs);
    const auto data_b = to_batchable(task_b.pairs);

    auto evaluate_both = [&](std::int64_t checkpoint_id) {
        seqmodel::Checkpoint snapshot = live;
        snapshot.checkpoint_id = checkpoint_id;
        result.task_a.push_back(evaluate_checkpoint(snapshot, task_a.refset,
                                                    options.beam_width, vocab, eval_model));
        result.task_b.push_back(evaluate_checkpoint(snapshot, task_b.refset,
                                                    options.beam_width, vocab, eval_model));
    };

    std::int64_t checkpoint_id = 0;
    evaluate_both(checkpoint_id);  // untrained baseline

    auto run_phase = [&](const std::vector<std::pair<codeprep::TokenSeq, codeprep::TokenSeq>>&
                             data,
                         const std::vector<std::pair<codeprep::TokenSeq, codeprep::TokenSeq>>*
                             replay_from) {
        std::size_t replay_cursor = 0;
        for (int epoch = 1; epoch <= options.epochs_per_phase; ++epoch) {
            for (std::size_t start = 0; start < data.size();
                 start += static_cast<std::size_t>(options.batch_size)) {
                const std::size_t end =
                    std::min(data.size(), start + static_cast<std::size_t>(options.batch_size));
                std::vector<std::pair<codeprep::TokenSeq, codeprep::TokenSeq>> batch(
                    data.begin() + static_cast<long>(start), data.begin() + static_cast<long>(end));
                if (replay_from && !replay_from->empty()) {
                    // Contrast arm: one old-task pair per new pair, so the
                    // conflicting mappings stay balanced in every batch.
                    for (int r = 0; r < options.batch_size; ++r) {
                        batch.push_back((*replay_from)[replay_cursor % replay_from->size()]);
                        ++replay_cursor;
                    }
                }
                auto [next, loss] = seqmodel::train_step(live, batch, options.learning_rate);
                (void)loss;
                live = std::move(next);
                live.created_at = checkpoint_id;
            }
            if (epoch % options.eval_every == 0 || epoch == options.epochs_per_phase) {
                ++checkpoint_id;
                evaluate_both(checkpoint_id);
            }
        }
    };

    run_phase(data_a, nullptr);
    result.phase_boundary_id = checkpoint_id;
    run_phase(data_b, options.replay ? &data_a : nullptr);

    accumulate_reports(result.task_a);
    accumulate_reports(result.task_b);
    return result;
}

std::filesystem::path find_latest_checkpoint(const std::filesystem::path& dir) {
    std::filesystem::path best;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("checkpoint_", 0) == 0 && entry.path().extension() == ".bin") {
            if (best.empty() || name > best.filename().string()) best = entry.path();
        }
    }
    if (best.empty()) throw std::runtime_error("no checkpoints in " + dir.string());
    return best;
}

std::vector<stream::CommitEvent> mine_all_sources(const BotConfig& config,
                                                  stream::MineStats* stats) {
    std::vector<stream::CommitEvent> events;
    for (const auto& source : config.stream) {
        stream::MineOptions opts;
        opts.range = source.range;
        opts.status_file = source.status_file;
        opts.diff_context = std::max(3, config.model.context_lines);
        stream::MineStats local;
        auto mined = stream::mine_repository(source.repo, opts, &local);
        events.insert(events.end(), mined.begin(), mined.end());
        if (stats) {
            stats->commits += local.commits;
            stats->reordered_events += local.reordered_events;
        }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const stream::CommitEvent& a, const stream::CommitEvent& b) {
                         return a.timestamp < b.timestamp;
                     });
    return events;
}

End2EndResult run_end2end(const BotConfig& config) {
    BotState state = init_bot_state(config);
    End2EndResult result;

    const auto events = mine_all_sources(state.config);
    auto cycle = run_training_cycle(state, events, state.config.checkpoint_every);

    // Always persist the final state so replays can be compared byte for byte.
    write_live_checkpoint(state);
    result.final_checkpoint =
        checkpoint_path(state.config.checkpoint_dir, state.live.checkpoint_id);

    for (const auto& failing : cycle.failing_events) {
        if (!state.config.project) {
            throw std::runtime_error("failing events in the stream but no project config");
        }
        // Fresh checkout of the failing commit.
        const auto checkout = state.config.out_dir /
                              ("checkout-" + failing.commit_sha.substr(0, 12));
        std::filesystem::remove_all(checkout);
        std::filesystem::create_directories(checkout.parent_path());
        const auto repo = [&] {
            for (const auto& s : state.config.stream) {
                if (s.repo.filename().string() == failing.repo_id) return s.repo;
            }
            return state.config.stream.at(0).repo;
        }();
        auto clone = proc::run_command("git clone --quiet --no-hardlinks " + repo.string() +
                                           " " + checkout.string() + " && git -C " +
                                           checkout.string() + " checkout --quiet " +
                                           failing.commit_sha,
                                       std::filesystem::current_path(), {}, 120);
        if (clone.exit_code != 0) {
            throw std::runtime_error("cannot check out " + failing.commit_sha + ": " +
                                     clone.output);
        }
        validate::ProjectConfig project = validate::project_config_from_json(*state.config.project);
        project.root = checkout;
        auto outcome = run_repair(state, failing, project, state.config.beam_width,
                                  state.config.loc_limit);
        if (outcome.receipt && !outcome.receipt->payload_file.empty()) {
            result.payload_files.push_back(outcome.receipt->payload_file);
        }
        result.repairs.emplace_back(failing.commit_sha, outcome.status);
    }

    if (state.config.refset_path) {
        const auto refset = load_reference_set(*state.config.refset_path);
        std::vector<EvalReport> reports{evaluate_checkpoint(
            state.live, refset, state.config.beam_width, state.vocab, state.config.model)};
        accumulate_reports(reports);
        const auto csv_path = state.config.out_dir / "eval.csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        csv << reports_to_csv(reports);
        result.eval_csv = csv_path;
    }

    result.counters = state.counters;
    return result;
}

}  // namespace linefix::orchestrate
