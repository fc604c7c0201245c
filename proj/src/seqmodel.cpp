#include "linefix/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace linefix::seqmodel {

using nn::Matrix;
using nn::Vector;

GruParams::GruParams(int input_dim, int hidden_dim)
    : w_reset(hidden_dim, input_dim),
      w_update(hidden_dim, input_dim),
      w_cand(hidden_dim, input_dim),
      u_reset(hidden_dim, hidden_dim),
      u_update(hidden_dim, hidden_dim),
      u_cand(hidden_dim, hidden_dim),
      b_reset(static_cast<std::size_t>(hidden_dim), 0.0),
      b_update(static_cast<std::size_t>(hidden_dim), 0.0),
      b_cand(static_cast<std::size_t>(hidden_dim), 0.0) {}

namespace {

ModelParams make_params(int vocab_size, int embed_dim, int hidden_dim) {
    ModelParams p;
    p.vocab_size = vocab_size;
    p.embed_dim = embed_dim;
    p.hidden_dim = hidden_dim;
    const int h2 = 2 * hidden_dim;
    p.embedding = Matrix(vocab_size, embed_dim);
    p.enc_fwd = GruParams(embed_dim, hidden_dim);
    p.enc_bwd = GruParams(embed_dim, hidden_dim);
    p.dec = GruParams(embed_dim + h2, h2);
    p.att_w_query = Matrix(hidden_dim, h2);
    p.att_w_enc = Matrix(hidden_dim, h2);
    p.att_bias.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    p.att_v.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    p.out_w = Matrix(vocab_size, h2);
    p.out_b.assign(static_cast<std::size_t>(vocab_size), 0.0);
    p.copy_w_state = Matrix(hidden_dim, h2);
    p.copy_w_enc = Matrix(hidden_dim, h2);
    p.copy_bias.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    p.copy_v.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    return p;
}

void collect_gru(GruParams& g, std::vector<std::vector<double>*>& out) {
    out.push_back(&g.w_reset.a);
    out.push_back(&g.w_update.a);
    out.push_back(&g.w_cand.a);
    out.push_back(&g.u_reset.a);
    out.push_back(&g.u_update.a);
    out.push_back(&g.u_cand.a);
    out.push_back(&g.b_reset);
    out.push_back(&g.b_update);
    out.push_back(&g.b_cand);
}

}  // namespace

std::vector<std::vector<double>*> collect_tensors(ModelParams& p) {
    std::vector<std::vector<double>*> out;
    out.push_back(&p.embedding.a);
    collect_gru(p.enc_fwd, out);
    collect_gru(p.enc_bwd, out);
    collect_gru(p.dec, out);
    out.push_back(&p.att_w_query.a);
    out.push_back(&p.att_w_enc.a);
    out.push_back(&p.att_bias);
    out.push_back(&p.att_v);
    out.push_back(&p.out_w.a);
    out.push_back(&p.out_b);
    out.push_back(&p.copy_w_state.a);
    out.push_back(&p.copy_w_enc.a);
    out.push_back(&p.copy_bias);
    out.push_back(&p.copy_v);
    return out;
}

std::vector<const std::vector<double>*> collect_tensors(const ModelParams& p) {
    auto mutable_view = collect_tensors(const_cast<ModelParams&>(p));
    return {mutable_view.begin(), mutable_view.end()};
}

// Names aligned with collect_tensors order.
static const std::vector<std::string>& tensor_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n{"embedding"};
        for (const char* g : {"enc_fwd", "enc_bwd", "dec"}) {
            for (const char* t : {"w_reset", "w_update", "w_cand", "u_reset", "u_update",
                                  "u_cand", "b_reset", "b_update", "b_cand"}) {
                n.push_back(std::string(g) + "." + t);
            }
        }
        for (const char* t : {"att_w_query", "att_w_enc", "att_bias", "att_v", "out_w", "out_b",
                              "copy_w_state", "copy_w_enc", "copy_bias", "copy_v"}) {
            n.emplace_back(t);
        }
        return n;
    }();
    return names;
}

std::size_t parameter_count(const ModelParams& p) {
    std::size_t n = 0;
    for (const auto* t : collect_tensors(p)) n += t->size();
    return n;
}

bool all_finite(const ModelParams& p) {
    for (const auto* t : collect_tensors(p)) {
        for (double x : *t) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

Checkpoint init_model(int vocab_size, int embed_dim, int hidden_dim, std::uint64_t rng_seed) {
    if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1) {
        throw std::invalid_argument("model dimensions must be >= 1");
    }
    Checkpoint ckpt;
    ckpt.params = make_params(vocab_size, embed_dim, hidden_dim);
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> dist(-0.08, 0.08);
    for (auto* tensor : collect_tensors(ckpt.params)) {
        for (auto& w : *tensor) w = dist(rng);
    }
    ckpt.opt.m = make_params(vocab_size, embed_dim, hidden_dim);
    ckpt.opt.v = make_params(vocab_size, embed_dim, hidden_dim);
    ckpt.opt.step = 0;
    return ckpt;
}

// ---------------------------------------------------------------------------
// Forward/backward machinery
// ---------------------------------------------------------------------------

namespace {

struct GruCache {
    Vector x, h_prev, r, z, c, h;
};

// h_new = (1-z) (.) h_prev + z (.) cand
GruCache gru_step(const GruParams& g, const Vector& x, const Vector& h_prev) {
    const std::size_t h = g.b_reset.size();
    GruCache cache;
    cache.x = x;
    cache.h_prev = h_prev;
    cache.r = g.b_reset;
    cache.z = g.b_update;
    nn::matvec_add(g.w_reset, x, cache.r);
    nn::matvec_add(g.u_reset, h_prev, cache.r);
    nn::matvec_add(g.w_update, x, cache.z);
    nn::matvec_add(g.u_update, h_prev, cache.z);
    for (auto& v : cache.r) v = nn::sigmoid(v);
    for (auto& v : cache.z) v = nn::sigmoid(v);
    Vector gated(h);
    for (std::size_t i = 0; i < h; ++i) gated[i] = cache.r[i] * h_prev[i];
    cache.c = g.b_cand;
    nn::matvec_add(g.w_cand, x, cache.c);
    nn::matvec_add(g.u_cand, gated, cache.c);
    for (auto& v : cache.c) v = std::tanh(v);
    cache.h.resize(h);
    for (std::size_t i = 0; i < h; ++i) {
        cache.h[i] = (1.0 - cache.z[i]) * h_prev[i] + cache.z[i] * cache.c[i];
    }
    return cache;
}

// Accumulates parameter grads; returns (dx, dh_prev).
std::pair<Vector, Vector> gru_backward(const GruParams& g, GruParams& grad,
                                       const GruCache& cache, const Vector& dh) {
    const std::size_t h = cache.h.size();
    Vector dz_pre(h), dc_pre(h), dh_prev(h);
    for (std::size_t i = 0; i < h; ++i) {
        dz_pre[i] = dh[i] * (cache.c[i] - cache.h_prev[i]) * cache.z[i] * (1.0 - cache.z[i]);
        dc_pre[i] = dh[i] * cache.z[i] * (1.0 - cache.c[i] * cache.c[i]);
        dh_prev[i] = dh[i] * (1.0 - cache.z[i]);
    }
    Vector d_gated(h, 0.0);
    nn::matvec_t_add(g.u_cand, dc_pre, d_gated);
    Vector dr_pre(h);
    for (std::size_t i = 0; i < h; ++i) {
        dr_pre[i] = d_gated[i] * cache.h_prev[i] * cache.r[i] * (1.0 - cache.r[i]);
        dh_prev[i] += d_gated[i] * cache.r[i];
    }
    nn::matvec_t_add(g.u_reset, dr_pre, dh_prev);
    nn::matvec_t_add(g.u_update, dz_pre, dh_prev);

    Vector dx(cache.x.size(), 0.0);
    nn::matvec_t_add(g.w_reset, dr_pre, dx);
    nn::matvec_t_add(g.w_update, dz_pre, dx);
    nn::matvec_t_add(g.w_cand, dc_pre, dx);

    Vector gated(h);
    for (std::size_t i = 0; i < h; ++i) gated[i] = cache.r[i] * cache.h_prev[i];
    nn::outer_add(grad.w_reset, dr_pre, cache.x);
    nn::outer_add(grad.w_update, dz_pre, cache.x);
    nn::outer_add(grad.w_cand, dc_pre, cache.x);
    nn::outer_add(grad.u_reset, dr_pre, cache.h_prev);
    nn::outer_add(grad.u_update, dz_pre, cache.h_prev);
    nn::outer_add(grad.u_cand, dc_pre, gated);
    nn::add_scaled(grad.b_reset, dr_pre, 1.0);
    nn::add_scaled(grad.b_update, dz_pre, 1.0);
    nn::add_scaled(grad.b_cand, dc_pre, 1.0);
    return {std::move(dx), std::move(dh_prev)};
}

struct EncoderStates {
    std::vector<Vector> emb;      // S x E
    std::vector<GruCache> fwd;    // position-aligned
    std::vector<GruCache> bwd;    // position-aligned (computed right to left)
    std::vector<Vector> states;   // S x 2H, concat(fwd.h, bwd.h)
    Vector s0;                    // decoder initial state, 2H
};

EncoderStates encode(const ModelParams& p, const std::vector<int>& ids) {
    const std::size_t s_len = ids.size();
    const std::size_t h = static_cast<std::size_t>(p.hidden_dim);
    EncoderStates enc;
    enc.emb.resize(s_len);
    for (std::size_t i = 0; i < s_len; ++i) {
        enc.emb[i].assign(p.embedding.a.begin() + ids[i] * p.embed_dim,
                          p.embedding.a.begin() + (ids[i] + 1) * p.embed_dim);
    }
    enc.fwd.resize(s_len);
    Vector hprev(h, 0.0);
    for (std::size_t i = 0; i < s_len; ++i) {
        enc.fwd[i] = gru_step(p.enc_fwd, enc.emb[i], hprev);
        hprev = enc.fwd[i].h;
    }
    enc.bwd.resize(s_len);
    Vector gnext(h, 0.0);
    for (std::size_t i = s_len; i-- > 0;) {
        enc.bwd[i] = gru_step(p.enc_bwd, enc.emb[i], gnext);
        gnext = enc.bwd[i].h;
    }
    enc.states.resize(s_len);
    for (std::size_t i = 0; i < s_len; ++i) {
        enc.states[i] = enc.fwd[i].h;
        enc.states[i].insert(enc.states[i].end(), enc.bwd[i].h.begin(), enc.bwd[i].h.end());
    }
    enc.s0.assign(2 * h, 0.0);
    if (s_len > 0) {
        std::copy(enc.fwd[s_len - 1].h.begin(), enc.fwd[s_len - 1].h.end(), enc.s0.begin());
        std::copy(enc.bwd[0].h.begin(), enc.bwd[0].h.end(),
                  enc.s0.begin() + static_cast<long>(h));
    }
    return enc;
}

struct AttCache {
    std::vector<Vector> act;  // S x H, tanh outputs
    Vector alpha;             // S
    Vector ctx;               // 2H
};

AttCache attend(const ModelParams& p, const Vector& query, const std::vector<Vector>& states) {
    const std::size_t s_len = states.size();
    const std::size_t h = static_cast<std::size_t>(p.hidden_dim);
    AttCache att;
    Vector from_query(h, 0.0);
    nn::matvec_add(p.att_w_query, query, from_query);
    att.act.resize(s_len);
    Vector scores(s_len);
    for (std::size_t i = 0; i < s_len; ++i) {
        Vector pre = p.att_bias;
        nn::add_scaled(pre, from_query, 1.0);
        nn::matvec_add(p.att_w_enc, states[i], pre);
        for (auto& v : pre) v = std::tanh(v);
        scores[i] = nn::dot(p.att_v, pre);
        att.act[i] = std::move(pre);
    }
    nn::softmax_inplace(scores);
    att.alpha = std::move(scores);
    att.ctx.assign(2 * h, 0.0);
    for (std::size_t i = 0; i < s_len; ++i) {
        nn::add_scaled(att.ctx, states[i], att.alpha[i]);
    }
    return att;
}

struct CopyCache {
    std::vector<Vector> act;  // S x H
    Vector scores;            // S, raw (pre-softmax) scores
};

CopyCache copy_scores(const ModelParams& p, const Vector& state,
                      const std::vector<Vector>& states) {
    const std::size_t s_len = states.size();
    const std::size_t h = static_cast<std::size_t>(p.hidden_dim);
    CopyCache copy;
    Vector from_state(h, 0.0);
    nn::matvec_add(p.copy_w_state, state, from_state);
    copy.act.resize(s_len);
    copy.scores.resize(s_len);
    for (std::size_t i = 0; i < s_len; ++i) {
        Vector pre = p.copy_bias;
        nn::add_scaled(pre, from_state, 1.0);
        nn::matvec_add(p.copy_w_enc, states[i], pre);
        for (auto& v : pre) v = std::tanh(v);
        copy.scores[i] = nn::dot(p.copy_v, pre);
        copy.act[i] = std::move(pre);
    }
    return copy;
}

struct DecStepCache {
    int y_prev = 0;
    Vector d_emb;      // E
    AttCache att;
    GruCache gru;      // x = concat(d_emb, ctx), hidden 2H
    CopyCache copy;
    Vector probs;      // V + S joint softmax
    double target_mass = 0.0;
    std::vector<std::size_t> target_slots;
};

struct ForwardPass {
    EncoderStates enc;
    std::vector<DecStepCache> steps;
    double loss_sum = 0.0;  // summed over target tokens
};

// Joint output distribution over V vocabulary slots and S copy slots.
Vector joint_distribution(const Vector& logits_vocab, const Vector& copy_score) {
    Vector joint;
    joint.reserve(logits_vocab.size() + copy_score.size());
    joint.insert(joint.end(), logits_vocab.begin(), logits_vocab.end());
    joint.insert(joint.end(), copy_score.begin(), copy_score.end());
    nn::softmax_inplace(joint);
    return joint;
}

ForwardPass forward(const ModelParams& p, const TokenSeq& input, const TokenSeq& target) {
    ForwardPass fp;
    fp.enc = encode(p, input.ids);
    const std::size_t s_len = input.size();
    const std::size_t v = static_cast<std::size_t>(p.vocab_size);

    Vector state = fp.enc.s0;
    int y_prev = Vocabulary::kSos;
    fp.steps.reserve(target.size());
    for (std::size_t t = 0; t < target.size(); ++t) {
        DecStepCache step;
        step.y_prev = y_prev;
        step.d_emb.assign(p.embedding.a.begin() + y_prev * p.embed_dim,
                          p.embedding.a.begin() + (y_prev + 1) * p.embed_dim);
        step.att = attend(p, state, fp.enc.states);

        Vector x = step.d_emb;
        x.insert(x.end(), step.att.ctx.begin(), step.att.ctx.end());
        step.gru = gru_step(p.dec, x, state);
        state = step.gru.h;

        Vector logits = p.out_b;
        nn::matvec_add(p.out_w, state, logits);
        step.copy = copy_scores(p, state, fp.enc.states);
        step.probs = joint_distribution(logits, step.copy.scores);

        // Slots that produce the target token: its vocabulary entry plus
        // every source position holding the same raw string. OOV targets
        // absent from the source fall back to the UNK slot.
        const int tgt_id = target.ids[t];
        const std::string& tgt_raw = target.tokens[t];
        if (tgt_id != Vocabulary::kUnk) {
            step.target_slots.push_back(static_cast<std::size_t>(tgt_id));
        }
        for (std::size_t i = 0; i < s_len; ++i) {
            if (input.tokens[i] == tgt_raw) step.target_slots.push_back(v + i);
        }
        if (step.target_slots.empty()) {
            step.target_slots.push_back(static_cast<std::size_t>(Vocabulary::kUnk));
        }
        for (auto slot : step.target_slots) step.target_mass += step.probs[slot];
        fp.loss_sum += -std::log(std::max(step.target_mass, 1e-300));

        y_prev = tgt_id;
        fp.steps.push_back(std::move(step));
    }
    return fp;
}

// Backpropagates d(loss_sum)/d(params) into `grad`.
void backward(const ModelParams& p, const TokenSeq& input, const ForwardPass& fp,
              ModelParams& grad) {
    const std::size_t s_len = input.size();
    const std::size_t h = static_cast<std::size_t>(p.hidden_dim);
    const std::size_t h2 = 2 * h;
    const std::size_t v = static_cast<std::size_t>(p.vocab_size);

    std::vector<Vector> d_states(s_len, Vector(h2, 0.0));
    Vector d_state(h2, 0.0);  // running dL/ds_t

    for (std::size_t t = fp.steps.size(); t-- > 0;) {
        const DecStepCache& step = fp.steps[t];
        const Vector& s_prev = step.gru.h_prev;
        const Vector& s_cur = step.gru.h;

        // Joint softmax + summed-slot cross-entropy.
        Vector d_joint(step.probs.size());
        for (std::size_t j = 0; j < step.probs.size(); ++j) d_joint[j] = step.probs[j];
        for (auto slot : step.target_slots) {
            d_joint[slot] -= step.probs[slot] / step.target_mass;
        }

        // Vocabulary slots: logits = out_w s + out_b.
        Vector d_logits(d_joint.begin(), d_joint.begin() + static_cast<long>(v));
        nn::outer_add(grad.out_w, d_logits, s_cur);
        nn::add_scaled(grad.out_b, d_logits, 1.0);
        nn::matvec_t_add(p.out_w, d_logits, d_state);

        // Copy slots.
        Vector d_copy_state_sum(h, 0.0);
        for (std::size_t i = 0; i < s_len; ++i) {
            double dq = d_joint[v + i];
            if (dq == 0.0) continue;
            nn::add_scaled(grad.copy_v, step.copy.act[i], dq);
            Vector d_pre(h);
            for (std::size_t k = 0; k < h; ++k) {
                d_pre[k] = p.copy_v[k] * dq * (1.0 - step.copy.act[i][k] * step.copy.act[i][k]);
            }
            nn::outer_add(grad.copy_w_enc, d_pre, fp.enc.states[i]);
            nn::matvec_t_add(p.copy_w_enc, d_pre, d_states[i]);
            nn::add_scaled(grad.copy_bias, d_pre, 1.0);
            nn::add_scaled(d_copy_state_sum, d_pre, 1.0);
        }
        if (s_len > 0) {
            // copy_w_state sees the same state for every position.
            nn::outer_add(grad.copy_w_state, d_copy_state_sum, s_cur);
            nn::matvec_t_add(p.copy_w_state, d_copy_state_sum, d_state);
        }

        // Decoder GRU.
        auto [d_x, d_sprev_gru] = gru_backward(p.dec, grad.dec, step.gru, d_state);
        Vector d_demb(d_x.begin(), d_x.begin() + p.embed_dim);
        Vector d_ctx(d_x.begin() + p.embed_dim, d_x.end());

        // Attention (query was s_prev).
        Vector d_alpha(s_len, 0.0);
        for (std::size_t i = 0; i < s_len; ++i) {
            d_alpha[i] = nn::dot(d_ctx, fp.enc.states[i]);
            nn::add_scaled(d_states[i], d_ctx, step.att.alpha[i]);
        }
        double alpha_dot = nn::dot(step.att.alpha, d_alpha);
        Vector d_query(h2, 0.0);
        Vector d_att_pre_sum(h, 0.0);
        for (std::size_t i = 0; i < s_len; ++i) {
            double d_score = step.att.alpha[i] * (d_alpha[i] - alpha_dot);
            if (d_score == 0.0) continue;
            nn::add_scaled(grad.att_v, step.att.act[i], d_score);
            Vector d_pre(h);
            for (std::size_t k = 0; k < h; ++k) {
                d_pre[k] = p.att_v[k] * d_score * (1.0 - step.att.act[i][k] * step.att.act[i][k]);
            }
            nn::outer_add(grad.att_w_enc, d_pre, fp.enc.states[i]);
            nn::matvec_t_add(p.att_w_enc, d_pre, d_states[i]);
            nn::add_scaled(grad.att_bias, d_pre, 1.0);
            nn::add_scaled(d_att_pre_sum, d_pre, 1.0);
        }
        if (s_len > 0) {
            nn::outer_add(grad.att_w_query, d_att_pre_sum, s_prev);
            nn::matvec_t_add(p.att_w_query, d_att_pre_sum, d_query);
        }

        // Embedding of the fed-back token.
        double* emb_row = grad.embedding.a.data() +
                          static_cast<std::size_t>(step.y_prev) * p.embed_dim;
        for (int k = 0; k < p.embed_dim; ++k) emb_row[k] += d_demb[static_cast<std::size_t>(k)];

        d_state = d_sprev_gru;
        nn::add_scaled(d_state, d_query, 1.0);
    }

    // d_state now holds dL/ds0 = d[h_fwd(last); h_bwd(first)].
    std::vector<Vector> d_fwd(s_len, Vector(h, 0.0));
    std::vector<Vector> d_bwd(s_len, Vector(h, 0.0));
    for (std::size_t i = 0; i < s_len; ++i) {
        for (std::size_t k = 0; k < h; ++k) {
            d_fwd[i][k] = d_states[i][k];
            d_bwd[i][k] = d_states[i][h + k];
        }
    }
    if (s_len > 0) {
        for (std::size_t k = 0; k < h; ++k) {
            d_fwd[s_len - 1][k] += d_state[k];
            d_bwd[0][k] += d_state[h + k];
        }
    }

    std::vector<Vector> d_emb(s_len, Vector(static_cast<std::size_t>(p.embed_dim), 0.0));
    Vector carry(h, 0.0);
    for (std::size_t i = s_len; i-- > 0;) {  // forward chain, reverse time
        Vector dh = d_fwd[i];
        nn::add_scaled(dh, carry, 1.0);
        auto [dx, dh_prev] = gru_backward(p.enc_fwd, grad.enc_fwd, fp.enc.fwd[i], dh);
        nn::add_scaled(d_emb[i], dx, 1.0);
        carry = std::move(dh_prev);
    }
    carry.assign(h, 0.0);
    for (std::size_t i = 0; i < s_len; ++i) {  // backward chain runs right-to-left
        Vector dh = d_bwd[i];
        nn::add_scaled(dh, carry, 1.0);
        auto [dx, dh_prev] = gru_backward(p.enc_bwd, grad.enc_bwd, fp.enc.bwd[i], dh);
        nn::add_scaled(d_emb[i], dx, 1.0);
        carry = std::move(dh_prev);
    }
    for (std::size_t i = 0; i < s_len; ++i) {
        double* emb_row =
            grad.embedding.a.data() + static_cast<std::size_t>(input.ids[i]) * p.embed_dim;
        for (int k = 0; k < p.embed_dim; ++k) emb_row[k] += d_emb[i][static_cast<std::size_t>(k)];
    }
}

void scale_params(ModelParams& p, double s) {
    for (auto* t : collect_tensors(p)) {
        for (auto& x : *t) x *= s;
    }
}

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

std::pair<Checkpoint, double> train_step(const Checkpoint& ckpt,
                                         const std::vector<std::pair<TokenSeq, TokenSeq>>& batch,
                                         double lr) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    for (const auto& [input, target] : batch) {
        for (int id : input.ids) {
            if (id < 0 || id >= ckpt.params.vocab_size) {
                throw std::invalid_argument("train_step: input id out of vocabulary range");
            }
        }
        for (int id : target.ids) {
            if (id < 0 || id >= ckpt.params.vocab_size) {
                throw std::invalid_argument("train_step: target id out of vocabulary range");
            }
        }
        if (target.size() == 0) throw std::invalid_argument("train_step: empty target");
    }

    ModelParams grad = make_params(ckpt.params.vocab_size, ckpt.params.embed_dim,
                                   ckpt.params.hidden_dim);
    double loss_sum = 0.0;
    std::size_t token_count = 0;
    for (const auto& [input, target] : batch) {
        ForwardPass fp = forward(ckpt.params, input, target);
        backward(ckpt.params, input, fp, grad);
        loss_sum += fp.loss_sum;
        token_count += target.size();
    }
    const double loss = loss_sum / static_cast<double>(token_count);
    if (!std::isfinite(loss)) {
        throw NonFiniteLoss("training loss is not finite");
    }
    scale_params(grad, 1.0 / static_cast<double>(token_count));

    Checkpoint next = ckpt;
    next.opt.step += 1;
    const double t = static_cast<double>(next.opt.step);
    const double bc1 = 1.0 - std::pow(kBeta1, t);
    const double bc2 = 1.0 - std::pow(kBeta2, t);

    auto p_tensors = collect_tensors(next.params);
    auto g_tensors = collect_tensors(grad);
    auto m_tensors = collect_tensors(next.opt.m);
    auto v_tensors = collect_tensors(next.opt.v);
    for (std::size_t ti = 0; ti < p_tensors.size(); ++ti) {
        auto& pv = *p_tensors[ti];
        auto& gv = *g_tensors[ti];
        auto& mv = *m_tensors[ti];
        auto& vv = *v_tensors[ti];
        for (std::size_t i = 0; i < pv.size(); ++i) {
            mv[i] = kBeta1 * mv[i] + (1.0 - kBeta1) * gv[i];
            vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * gv[i] * gv[i];
            pv[i] -= lr * (mv[i] / bc1) / (std::sqrt(vv[i] / bc2) + kAdamEps);
        }
    }
    if (!all_finite(next.params)) {
        throw NonFiniteLoss("parameters diverged during the optimizer step");
    }
    next.pairs_seen = ckpt.pairs_seen + static_cast<std::int64_t>(batch.size());
    return {std::move(next), loss};
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

bool copyable_source_token(const std::string& token) {
    return !Vocabulary::is_special_token(token);
}

struct BeamEntry {
    Vector state;
    std::vector<std::string> tokens;
    int last_id = Vocabulary::kSos;
    double log_prob = 0.0;
};

}  // namespace

std::vector<Hypothesis> generate(const Checkpoint& ckpt, const TokenSeq& input, int beam_width,
                                 int max_out_len, const Vocabulary& vocab) {
    if (beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
    const ModelParams& p = ckpt.params;
    const std::size_t v = static_cast<std::size_t>(p.vocab_size);
    EncoderStates enc = encode(p, input.ids);

    std::vector<BeamEntry> live{{enc.s0, {}, Vocabulary::kSos, 0.0}};
    std::vector<Hypothesis> finished;

    for (int step = 0; step < max_out_len && !live.empty(); ++step) {
        struct Cand {
            std::size_t beam;
            std::string token;
            double log_prob;
        };
        std::vector<Cand> cands;
        std::vector<Vector> next_states(live.size());

        for (std::size_t b = 0; b < live.size(); ++b) {
            const BeamEntry& entry = live[b];
            Vector d_emb(p.embedding.a.begin() + entry.last_id * p.embed_dim,
                         p.embedding.a.begin() + (entry.last_id + 1) * p.embed_dim);
            AttCache att = attend(p, entry.state, enc.states);
            Vector x = std::move(d_emb);
            x.insert(x.end(), att.ctx.begin(), att.ctx.end());
            GruCache gru = gru_step(p.dec, x, entry.state);
            next_states[b] = gru.h;

            Vector logits = p.out_b;
            nn::matvec_add(p.out_w, gru.h, logits);
            CopyCache copy = copy_scores(p, gru.h, enc.states);

            // Slots that cannot belong to a patch line are masked before
            // the softmax; the remaining distribution still sums to one.
            // Embedding rows past the vocabulary are unused capacity.
            logits[Vocabulary::kPad] = -1e30;
            logits[Vocabulary::kSos] = -1e30;
            logits[Vocabulary::kUnk] = -1e30;
            logits[Vocabulary::kStartBug] = -1e30;
            logits[Vocabulary::kEndBug] = -1e30;
            for (std::size_t id = static_cast<std::size_t>(vocab.size()); id < v; ++id) {
                logits[id] = -1e30;
            }
            for (std::size_t i = 0; i < input.size(); ++i) {
                if (!copyable_source_token(input.tokens[i])) copy.scores[i] = -1e30;
            }
            Vector probs = joint_distribution(logits, copy.scores);

            std::map<std::string, double> by_token;
            const std::size_t usable = std::min(v, static_cast<std::size_t>(vocab.size()));
            for (std::size_t id = 0; id < usable; ++id) {
                if (probs[id] <= 0.0) continue;
                if (static_cast<int>(id) < Vocabulary::kNumSpecials &&
                    static_cast<int>(id) != Vocabulary::kEos) {
                    continue;
                }
                by_token[vocab.token_of(static_cast<int>(id))] += probs[id];
            }
            for (std::size_t i = 0; i < input.size(); ++i) {
                if (!copyable_source_token(input.tokens[i])) continue;
                by_token[input.tokens[i]] += probs[v + i];
            }

            std::vector<std::pair<std::string, double>> ranked(by_token.begin(), by_token.end());
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            const std::size_t take = std::min<std::size_t>(ranked.size(),
                                                           static_cast<std::size_t>(beam_width));
            for (std::size_t i = 0; i < take; ++i) {
                cands.push_back({b, ranked[i].first,
                                 entry.log_prob + std::log(ranked[i].second)});
            }
        }

        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            if (a.token != b.token) return a.token < b.token;
            return a.beam < b.beam;
        });
        if (cands.size() > static_cast<std::size_t>(beam_width)) {
            cands.resize(static_cast<std::size_t>(beam_width));
        }

        std::vector<BeamEntry> next_live;
        for (const Cand& c : cands) {
            if (c.token == Vocabulary::kEosToken) {
                finished.push_back({live[c.beam].tokens, c.log_prob});
                continue;
            }
            BeamEntry entry;
            entry.state = next_states[c.beam];
            entry.tokens = live[c.beam].tokens;
            entry.tokens.push_back(c.token);
            entry.last_id = vocab.id_of(c.token);
            entry.log_prob = c.log_prob;
            next_live.push_back(std::move(entry));
        }
        live = std::move(next_live);
    }

    for (const auto& entry : live) {
        finished.push_back({entry.tokens, entry.log_prob});  // hit the length cap
    }
    std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return a.tokens < b.tokens;
    });
    if (finished.size() > static_cast<std::size_t>(beam_width)) {
        finished.resize(static_cast<std::size_t>(beam_width));
    }
    return finished;
}

nn::Vector output_distribution(const Checkpoint& ckpt, const TokenSeq& input,
                               const std::vector<int>& prefix_ids) {
    const ModelParams& p = ckpt.params;
    EncoderStates enc = encode(p, input.ids);
    Vector state = enc.s0;
    int y_prev = Vocabulary::kSos;
    auto decode_once = [&] {
        Vector d_emb(p.embedding.a.begin() + y_prev * p.embed_dim,
                     p.embedding.a.begin() + (y_prev + 1) * p.embed_dim);
        AttCache att = attend(p, state, enc.states);
        Vector x = std::move(d_emb);
        x.insert(x.end(), att.ctx.begin(), att.ctx.end());
        GruCache gru = gru_step(p.dec, x, state);
        state = gru.h;
        Vector logits = p.out_b;
        nn::matvec_add(p.out_w, state, logits);
        CopyCache copy = copy_scores(p, state, enc.states);
        return joint_distribution(logits, copy.scores);
    };
    Vector probs = decode_once();
    for (int id : prefix_ids) {
        y_prev = id;
        probs = decode_once();
    }
    return probs;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double gradient_check(const Checkpoint& ckpt, const std::pair<TokenSeq, TokenSeq>& sample,
                      int probes, double epsilon, std::uint64_t probe_seed, GradFault fault) {
    if (probes < 1) throw std::invalid_argument("probes must be >= 1");
    if (epsilon < 1e-6 || epsilon > 1e-3) {
        throw std::invalid_argument("epsilon must lie in [1e-6, 1e-3]");
    }
    const auto& [input, target] = sample;
    const double denom = static_cast<double>(target.size());

    ModelParams grad = make_params(ckpt.params.vocab_size, ckpt.params.embed_dim,
                                   ckpt.params.hidden_dim);
    {
        ForwardPass fp = forward(ckpt.params, input, target);
        backward(ckpt.params, input, fp, grad);
        scale_params(grad, 1.0 / denom);
    }
    if (fault == GradFault::CorruptAttention) {
        auto g_tensors = collect_tensors(grad);
        const auto& names = tensor_names();
        for (std::size_t i = 0; i < g_tensors.size(); ++i) {
            if (names[i].rfind("att_", 0) == 0) {
                for (auto& x : *g_tensors[i]) x = 2.0 * x + 1e-4;
            }
        }
    }

    ModelParams work = ckpt.params;  // mutated in place, restored per probe
    auto w_tensors = collect_tensors(work);
    auto g_tensors = collect_tensors(grad);
    std::size_t total = 0;
    for (auto* t : w_tensors) total += t->size();

    auto loss_at = [&]() {
        ForwardPass fp = forward(work, input, target);
        return fp.loss_sum / denom;
    };

    std::mt19937_64 rng(probe_seed);
    double max_rel = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
        std::size_t flat = rng() % total;
        std::size_t ti = 0;
        while (flat >= w_tensors[ti]->size()) {
            flat -= w_tensors[ti]->size();
            ++ti;
        }
        double& slot = (*w_tensors[ti])[flat];
        const double original = slot;
        slot = original + epsilon;
        const double loss_hi = loss_at();
        slot = original - epsilon;
        const double loss_lo = loss_at();
        slot = original;

        const double numeric = (loss_hi - loss_lo) / (2.0 * epsilon);
        const double analytic = (*g_tensors[ti])[flat];
        const double rel = std::abs(analytic - numeric) /
                           std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace linefix::seqmodel
