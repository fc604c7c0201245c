#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "linefix/codeprep.hpp"
#include "linefix/nn_math.hpp"

namespace linefix::seqmodel {

using codeprep::TokenSeq;
using codeprep::Vocabulary;

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CorruptCheckpoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GruParams {
    // x -> hidden maps (w*) and hidden -> hidden maps (u*), one per gate.
    nn::Matrix w_reset, w_update, w_cand;
    nn::Matrix u_reset, u_update, u_cand;
    nn::Vector b_reset, b_update, b_cand;

    GruParams() = default;
    GruParams(int input_dim, int hidden_dim);

    bool operator==(const GruParams&) const = default;
};

// Bidirectional gated-recurrent encoder (hidden H per direction), single
// gated-recurrent decoder (hidden 2H) with additive attention over encoder
// states, vocabulary projection, and a copy scorer whose slots extend the
// output alphabet with the source positions.
struct ModelParams {
    int vocab_size = 0;
    int embed_dim = 0;
    int hidden_dim = 0;

    nn::Matrix embedding;  // V x E, shared by encoder and decoder
    GruParams enc_fwd, enc_bwd;  // input E, hidden H
    GruParams dec;               // input E + 2H, hidden 2H

    nn::Matrix att_w_query, att_w_enc;  // H x 2H each
    nn::Vector att_bias, att_v;         // H

    nn::Matrix out_w;  // V x 2H
    nn::Vector out_b;  // V

    nn::Matrix copy_w_state, copy_w_enc;  // H x 2H each
    nn::Vector copy_bias, copy_v;         // H

    bool operator==(const ModelParams&) const = default;
};

// Fixed traversal order over every tensor in the model; serialization,
// the optimizer, and gradient probing all rely on it.
std::vector<std::vector<double>*> collect_tensors(ModelParams& p);
std::vector<const std::vector<double>*> collect_tensors(const ModelParams& p);
std::size_t parameter_count(const ModelParams& p);
bool all_finite(const ModelParams& p);

struct AdamState {
    ModelParams m;  // first moments, same shapes as the parameters
    ModelParams v;  // second moments
    std::int64_t step = 0;

    bool operator==(const AdamState&) const = default;
};

struct Checkpoint {
    ModelParams params;
    AdamState opt;
    int vocab_version = 0;
    std::int64_t pairs_seen = 0;
    std::int64_t created_at = 0;  // stream time, not wall clock
    std::int64_t checkpoint_id = 0;

    bool operator==(const Checkpoint&) const = default;
};

struct Hypothesis {
    std::vector<std::string> tokens;  // EOS terminator stripped
    double log_prob = 0.0;

    bool operator==(const Hypothesis&) const = default;
};

// Weights drawn uniform(-0.08, 0.08) from a generator seeded with rng_seed.
Checkpoint init_model(int vocab_size, int embed_dim, int hidden_dim, std::uint64_t rng_seed);

// One Adam step (beta1=0.9, beta2=0.999, eps=1e-8) on the mean per-token
// cross-entropy of the batch under teacher forcing. The input checkpoint is
// untouched; throws NonFiniteLoss before any state is produced.
std::pair<Checkpoint, double> train_step(const Checkpoint& ckpt,
                                         const std::vector<std::pair<TokenSeq, TokenSeq>>& batch,
                                         double lr);

// Beam search; beam_width 1 is greedy decoding. Deterministic for a fixed
// checkpoint: ties break on token strings. Hypotheses sorted by log_prob
// descending. The vocabulary maps generated ids back to token strings;
// OOV source tokens surface through the copy slots.
std::vector<Hypothesis> generate(const Checkpoint& ckpt, const TokenSeq& input, int beam_width,
                                 int max_out_len, const Vocabulary& vocab);

// Teacher-forces `prefix_ids` through the decoder and returns the joint
// output distribution (vocab_size + source-position slots) of the next
// step. Sums to 1; introspection for tests and analysis.
nn::Vector output_distribution(const Checkpoint& ckpt, const TokenSeq& input,
                               const std::vector<int>& prefix_ids);

enum class GradFault {
    None,
    CorruptAttention,  // test hook: perturbs attention gradients
};

// Compares analytic gradients against central finite differences on
// `probes` randomly chosen parameters; returns the max relative error
// |ga - gn| / max(|ga| + |gn|, 1e-8).
double gradient_check(const Checkpoint& ckpt, const std::pair<TokenSeq, TokenSeq>& sample,
                      int probes, double epsilon, std::uint64_t probe_seed = 1234,
                      GradFault fault = GradFault::None);

// Binary container: magic "RHCK", format version, dimension header,
// float64 blocks, trailing CRC32. load(save(c)) reproduces generation
// bit for bit.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace linefix::seqmodel
