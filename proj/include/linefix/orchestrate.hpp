#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "linefix/codeprep.hpp"
#include "linefix/forge.hpp"
#include "linefix/localize.hpp"
#include "linefix/ods.hpp"
#include "linefix/seqmodel.hpp"
#include "linefix/store.hpp"
#include "linefix/stream.hpp"
#include "linefix/validate.hpp"

namespace linefix::orchestrate {

struct ModelConfig {
    int embed_dim = 32;
    int hidden_dim = 32;
    int vocab_capacity = 512;  // embedding rows preallocated so checkpoints stay compatible
    int freeze_after = 100;    // pairs absorbed before the vocabulary freezes
    int max_input_len = 200;
    int max_output_len = 40;
    int context_lines = 2;
    double learning_rate = 5e-3;
};

struct StreamSource {
    std::filesystem::path repo;
    std::string range = "HEAD";
    std::optional<std::filesystem::path> status_file;
};

struct BotConfig {
    std::vector<StreamSource> stream;
    ModelConfig model;
    int checkpoint_every = 1000;
    std::filesystem::path out_dir = "out";
    std::filesystem::path checkpoint_dir;    // default out_dir/checkpoints
    std::filesystem::path human_store_dir;   // default out_dir/stores/human
    std::filesystem::path machine_store_dir; // default out_dir/stores/machine
    std::optional<std::filesystem::path> ods_model_path;
    platform::SubmitMode forge;
    std::optional<nlohmann::json> project;  // build_cmd/test_cmd/timeout_s/env template
    std::optional<std::filesystem::path> coverage_file;  // relative to a checkout
    std::optional<std::filesystem::path> refset_path;
    int loc_limit = 10;
    int beam_width = 5;
    bool use_ods = true;
    bool include_pure_edits = false;
    int validate_parallelism = 2;
    std::uint64_t seed = 17;
};

BotConfig load_bot_config(const std::filesystem::path& path);
BotConfig bot_config_from_json(const nlohmann::json& j);

struct Counters {
    std::int64_t pairs_trained = 0;
    std::int64_t builds_seen = 0;
    std::int64_t builds_failing = 0;
    std::int64_t plausible_found = 0;
    std::int64_t discarded_by_ods = 0;
    std::int64_t prs_emitted = 0;
    std::int64_t commits_skipped = 0;  // malformed diffs, oversized bug lines
    std::int64_t lr_halvings = 0;      // divergence rollbacks

    nlohmann::json to_json() const;
};

struct BotState {
    BotConfig config;
    seqmodel::Checkpoint live;
    codeprep::Vocabulary vocab;
    Counters counters;
    double learning_rate = 0.0;
    std::int64_t next_checkpoint_at = 0;
    std::optional<ods::OdsModel> ods_model;
    std::shared_ptr<platform::PatchStore> human_store;
    std::shared_ptr<platform::PatchStore> machine_store;
};

BotState init_bot_state(const BotConfig& config);

struct TrainingCycleResult {
    std::vector<std::filesystem::path> checkpoints_written;
    std::vector<stream::CommitEvent> failing_events;
};

// Consumes the event stream in order: passing builds feed continual
// training (new immutable checkpoint every checkpoint_every pairs), failing
// builds queue for repair. A non-finite loss discards the batch, keeps the
// previous weights, and halves the learning rate.
TrainingCycleResult run_training_cycle(BotState& state,
                                       const std::vector<stream::CommitEvent>& events,
                                       int checkpoint_every);

enum class RepairStatus {
    PullRequestCreated,
    BuildNotFailing,
    NoLocationsFound,
    NoCandidates,
    NonePlausible,
    AllDiscarded,
};

const char* repair_status_name(RepairStatus s);

struct OdsDecision {
    std::size_t result_index = 0;  // into RepairOutcome::results
    double probability = 0.0;
    ods::OdsVerdict verdict = ods::OdsVerdict::Keep;
};

struct RepairOutcome {
    RepairStatus status = RepairStatus::NoCandidates;
    std::string stage_reached;
    std::vector<validate::ValidationResult> results;
    std::vector<OdsDecision> ods_decisions;
    std::optional<platform::PullRequestPayload> payload;
    std::optional<platform::SubmissionReceipt> receipt;
    std::string detail;
};

// The full repair pipeline for one failing build, checked out at
// project.root: localize -> generate -> validate -> overfitting filter ->
// pull request. Candidates and verdicts land in the machine store;
// plausible records are persisted before any filter verdict.
RepairOutcome run_repair(BotState& state, const stream::CommitEvent& failing,
                         const validate::ProjectConfig& project, int beam_width, int loc_limit);

// At most one PR per failing build: the kept candidate with the highest
// generation score wins, ties broken by (file, line, replacement).
std::size_t select_best_kept(const std::vector<validate::ValidationResult>& results,
                             const std::vector<std::size_t>& kept);

struct ReferenceEntry {
    std::string file_content;
    int line_no = 1;
    std::string fixed_line;
};

struct ReferenceSet {
    std::vector<ReferenceEntry> entries;
};

ReferenceSet load_reference_set(const std::filesystem::path& path);

struct EvalReport {
    std::int64_t checkpoint_id = 0;
    std::set<std::size_t> fixed_ids;
    int per_checkpoint_count = 0;
    std::set<std::size_t> cumulative_fixed;
    int cumulative_count = 0;
};

// An entry counts as fixed when any beam hypothesis, rendered, equals the
// fixed line modulo whitespace. Cumulative fields are filled by the caller
// chaining reports (see accumulate_reports).
EvalReport evaluate_checkpoint(const seqmodel::Checkpoint& ckpt, const ReferenceSet& refset,
                               int beam_width, const codeprep::Vocabulary& vocab,
                               const ModelConfig& model);

void accumulate_reports(std::vector<EvalReport>& reports);

std::string reports_to_csv(const std::vector<EvalReport>& reports);

struct TaskData {
    std::string name;
    ReferenceSet refset;
    std::vector<stream::TrainingPair> pairs;
};

struct ForgettingOptions {
    int epochs_per_phase = 60;
    int eval_every = 5;
    int batch_size = 5;
    int beam_width = 1;
    bool replay = false;  // contrast arm: mix phase-A pairs into phase B
    std::uint64_t seed = 17;
    int embed_dim = 32;
    int hidden_dim = 32;
    double learning_rate = 5e-3;
    int max_input_len = 64;
    int max_output_len = 16;
};

struct ForgettingResult {
    std::vector<EvalReport> task_a;
    std::vector<EvalReport> task_b;
    std::int64_t phase_boundary_id = 0;  // checkpoint id at the end of phase A
};

// Trains phase A then phase B on one continual chain, evaluating both
// reference sets at every checkpoint: the per-checkpoint curve may dip
// after the phase switch while the cumulative curve stays monotone.
ForgettingResult forgetting_experiment(const TaskData& task_a, const TaskData& task_b,
                                       const ForgettingOptions& options);

// Two task families with overlapping vocabulary and conflicting
// input->output mappings, so phase B interferes with phase A by
// construction.
std::pair<TaskData, TaskData> make_interference_tasks(int entries);

struct End2EndResult {
    Counters counters;
    std::vector<std::pair<std::string, RepairStatus>> repairs;  // (commit sha, outcome)
    std::filesystem::path final_checkpoint;
    std::optional<std::filesystem::path> eval_csv;
    std::vector<std::filesystem::path> payload_files;
};

// mine -> train -> repair failing builds -> optional refset evaluation.
// Identical seeds and inputs reproduce every output byte for byte.
End2EndResult run_end2end(const BotConfig& config);

// Helpers shared by the CLI.
stream::TrainingPair pair_from_location(const std::vector<std::string>& file_lines, int line_no,
                                        int context_lines);
std::filesystem::path find_latest_checkpoint(const std::filesystem::path& dir);
std::vector<stream::CommitEvent> mine_all_sources(const BotConfig& config,
                                                  stream::MineStats* stats = nullptr);

}  // namespace linefix::orchestrate
