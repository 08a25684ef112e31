#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xmc/data.hpp"
#include "xmc/matrix.hpp"
#include "xmc/rng.hpp"

namespace xmc {

// One level's attention-aware scorer:
//   token ids -> embedding -> dropout(0.2) -> sequence encoder -> dropout(0.5)
//   -> per-node attention over positions -> shared fc stack (ReLU) -> shared
//   output vector -> sigmoid, one conditional probability per candidate node.
// Templated on the scalar so gradient checks can run the whole model in
// double while production uses float.

enum class EncoderKind { recurrent, mean };

inline constexpr double kEmbedDropout = 0.2;
inline constexpr double kHiddenDropout = 0.5;

template <typename T>
struct GruDir {
    Mat<T> wz, uz, wr, ur, wh, uh; // input (N x De) and recurrent (N x N) weights
    std::vector<T> bz, br, bh;
};

template <typename T>
struct ScorerParamsT {
    EncoderKind encoder = EncoderKind::recurrent;
    int64_t vocab = 0;     // embedding rows
    int64_t embed_dim = 0; // De
    int64_t hidden = 0;    // N per direction; encoder output width is 2N

    Mat<T> embedding;               // vocab x De
    GruDir<T> fwd, bwd;             // recurrent encoder
    Mat<T> proj;                    // mean encoder: 2N x De
    std::vector<T> proj_b;          // 2N
    Mat<T> attention;               // nodes_at_level x 2N, row j = w_j
    std::vector<Mat<T>> fc;         // each out_dim x in_dim
    std::vector<std::vector<T>> fc_b;
    std::vector<T> out_w;           // last fc dim; shared across nodes
    std::vector<T> out_b;           // single shared bias

    // Which tree slice this model scores: node id n maps to attention row
    // n - first_node. Standalone tests leave first_node at 0.
    int64_t first_node = 0;
    int64_t level = 0;

    int64_t feat_dim() const { return 2 * hidden; }
    int64_t num_nodes() const { return attention.rows; }
};

using ScorerParams = ScorerParamsT<float>;

// Enumerates every trainable array in a fixed order shared by the optimizer,
// SWA, serialization, and the gradient check.
template <typename T, class F>
void visit_params(ScorerParamsT<T>& p, F&& f) {
    f("embedding", p.embedding.a);
    if (p.encoder == EncoderKind::recurrent) {
        GruDir<T>* dirs[2] = {&p.fwd, &p.bwd};
        const char* names[2][9] = {
            {"fwd.wz", "fwd.uz", "fwd.bz", "fwd.wr", "fwd.ur", "fwd.br", "fwd.wh", "fwd.uh",
             "fwd.bh"},
            {"bwd.wz", "bwd.uz", "bwd.bz", "bwd.wr", "bwd.ur", "bwd.br", "bwd.wh", "bwd.uh",
             "bwd.bh"}};
        for (int d = 0; d < 2; ++d) {
            f(names[d][0], dirs[d]->wz.a);
            f(names[d][1], dirs[d]->uz.a);
            f(names[d][2], dirs[d]->bz);
            f(names[d][3], dirs[d]->wr.a);
            f(names[d][4], dirs[d]->ur.a);
            f(names[d][5], dirs[d]->br);
            f(names[d][6], dirs[d]->wh.a);
            f(names[d][7], dirs[d]->uh.a);
            f(names[d][8], dirs[d]->bh);
        }
    } else {
        f("proj", p.proj.a);
        f("proj_b", p.proj_b);
    }
    f("attention", p.attention.a);
    for (size_t i = 0; i < p.fc.size(); ++i) {
        f(("fc" + std::to_string(i + 1)).c_str(), p.fc[i].a);
        f(("fc" + std::to_string(i + 1) + "_b").c_str(), p.fc_b[i]);
    }
    f("out_w", p.out_w);
    f("out_b", p.out_b);
}

template <typename T, class F>
void visit_params(const ScorerParamsT<T>& p, F&& f) {
    visit_params(const_cast<ScorerParamsT<T>&>(p),
                 [&](const char* name, std::vector<T>& v) { f(name, const_cast<const std::vector<T>&>(v)); });
}

template <typename T>
std::vector<std::vector<T>*> param_arrays(ScorerParamsT<T>& p) {
    std::vector<std::vector<T>*> out;
    visit_params(p, [&](const char*, std::vector<T>& v) { out.push_back(&v); });
    return out;
}

template <typename T>
int64_t param_count(const ScorerParamsT<T>& p) {
    int64_t n = 0;
    visit_params(p, [&](const char*, const std::vector<T>& v) { n += static_cast<int64_t>(v.size()); });
    return n;
}

// Zero-filled gradient container with the same shapes as p.
template <typename T>
ScorerParamsT<T> make_grad_like(const ScorerParamsT<T>& p) {
    ScorerParamsT<T> g = p;
    visit_params(g, [&](const char*, std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); });
    return g;
}

template <typename T>
struct ForwardTraceT {
    std::vector<uint32_t> ids;
    int64_t len = 0; // valid (unpadded) length
    std::vector<int32_t> candidates;
    std::vector<int64_t> rows; // attention row per candidate
    bool train = false;

    Mat<T> embedded;   // T x De, after embedding dropout
    Mat<T> embed_mask; // empty in eval mode
    Mat<T> zg[2], rg[2], gg[2], hg[2]; // recurrent gates/states per direction, T x N
    std::vector<T> mean_vec;           // mean encoder: pooled embedding, De
    Mat<T> hidden;      // T x 2N, after encoder dropout; rows >= len are zero
    Mat<T> hidden_mask; // empty in eval mode
    Mat<T> alpha;       // candidates x T; zero at padded positions
    Mat<T> attended;    // candidates x 2N
    std::vector<Mat<T>> fc_pre, fc_act; // per layer: candidates x dim
    std::vector<T> logits, probs;       // per candidate
};

using ForwardTrace = ForwardTraceT<float>;

namespace detail {

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// y += M v  (M: out x in)
template <typename T>
inline void matvec_add(const Mat<T>& m, const T* v, T* y) {
    for (int64_t r = 0; r < m.rows; ++r) {
        const T* row = m.row(r);
        T sum = T(0);
        for (int64_t c = 0; c < m.cols; ++c) sum += row[c] * v[c];
        y[r] += sum;
    }
}

// y += M^T v  (M: out x in, v: out, y: in)
template <typename T>
inline void matvec_t_add(const Mat<T>& m, const T* v, T* y) {
    for (int64_t r = 0; r < m.rows; ++r) {
        const T* row = m.row(r);
        const T vr = v[r];
        for (int64_t c = 0; c < m.cols; ++c) y[c] += vr * row[c];
    }
}

// M += u v^T  (u: rows, v: cols)
template <typename T>
inline void outer_add(Mat<T>& m, const T* u, const T* v) {
    for (int64_t r = 0; r < m.rows; ++r) {
        T* row = m.row(r);
        const T ur = u[r];
        for (int64_t c = 0; c < m.cols; ++c) row[c] += ur * v[c];
    }
}

template <typename T>
void gru_direction(const ScorerParamsT<T>& p, const GruDir<T>& dir, const Mat<T>& x, int64_t len,
                   bool reverse, Mat<T>& z, Mat<T>& r, Mat<T>& g, Mat<T>& h) {
    const int64_t N = p.hidden;
    z.assign(x.rows, N);
    r.assign(x.rows, N);
    g.assign(x.rows, N);
    h.assign(x.rows, N);
    std::vector<T> prev(static_cast<size_t>(N), T(0));
    std::vector<T> rh(static_cast<size_t>(N));
    for (int64_t s = 0; s < len; ++s) {
        const int64_t t = reverse ? len - 1 - s : s;
        T* zt = z.row(t);
        T* rt = r.row(t);
        T* gt = g.row(t);
        T* ht = h.row(t);
        const T* xt = x.row(t);

        std::copy(dir.bz.begin(), dir.bz.end(), zt);
        matvec_add(dir.wz, xt, zt);
        matvec_add(dir.uz, prev.data(), zt);
        std::copy(dir.br.begin(), dir.br.end(), rt);
        matvec_add(dir.wr, xt, rt);
        matvec_add(dir.ur, prev.data(), rt);
        for (int64_t i = 0; i < N; ++i) {
            zt[i] = sigmoid(zt[i]);
            rt[i] = sigmoid(rt[i]);
            rh[static_cast<size_t>(i)] = rt[i] * prev[static_cast<size_t>(i)];
        }
        std::copy(dir.bh.begin(), dir.bh.end(), gt);
        matvec_add(dir.wh, xt, gt);
        matvec_add(dir.uh, rh.data(), gt);
        for (int64_t i = 0; i < N; ++i) {
            gt[i] = std::tanh(gt[i]);
            ht[i] = (T(1) - zt[i]) * prev[static_cast<size_t>(i)] + zt[i] * gt[i];
            prev[static_cast<size_t>(i)] = ht[i];
        }
    }
}

template <typename T>
void apply_dropout(Mat<T>& m, int64_t len, double rate, SplitMix64& rng, Mat<T>& mask) {
    mask.assign(m.rows, m.cols);
    const T scale = T(1.0 / (1.0 - rate));
    for (int64_t t = 0; t < len; ++t) {
        T* row = m.row(t);
        T* mrow = mask.row(t);
        for (int64_t c = 0; c < m.cols; ++c) {
            const T keep = rng.next_double() >= rate ? scale : T(0);
            mrow[c] = keep;
            row[c] *= keep;
        }
    }
}

} // namespace detail

// Softmax-weighted pooling of hidden rows for one attention row w (length
// 2N). Positions at or beyond valid_len get alpha exactly 0.
template <typename T>
void attention(const Mat<T>& hidden, const T* w, int64_t valid_len, T* m_out, T* alpha_out) {
    const int64_t width = hidden.cols;
    T max_logit = -std::numeric_limits<T>::infinity();
    for (int64_t t = 0; t < valid_len; ++t) {
        const T* h = hidden.row(t);
        T dot = T(0);
        for (int64_t c = 0; c < width; ++c) dot += h[c] * w[c];
        alpha_out[t] = dot;
        if (dot > max_logit) max_logit = dot;
    }
    T denom = T(0);
    for (int64_t t = 0; t < valid_len; ++t) {
        alpha_out[t] = std::exp(alpha_out[t] - max_logit);
        denom += alpha_out[t];
    }
    for (int64_t t = 0; t < valid_len; ++t) alpha_out[t] /= denom;
    for (int64_t t = valid_len; t < hidden.rows; ++t) alpha_out[t] = T(0);
    std::fill(m_out, m_out + width, T(0));
    for (int64_t t = 0; t < valid_len; ++t) {
        const T* h = hidden.row(t);
        const T a = alpha_out[t];
        for (int64_t c = 0; c < width; ++c) m_out[c] += a * h[c];
    }
}

// Embedding + dropout + encoder + dropout. valid_len = number of real tokens
// at the head of tokens.ids (0 means all of them); remaining positions are
// padding and produce zero hidden rows. rng is required in train mode.
template <typename T>
void encode(const TokenSequence& tokens, const ScorerParamsT<T>& p, bool train, SplitMix64* rng,
            ForwardTraceT<T>& trace, int64_t valid_len = 0) {
    const int64_t total = static_cast<int64_t>(tokens.ids.size());
    const int64_t len = valid_len > 0 ? valid_len : total;
    if (total == 0 || len == 0) throw std::invalid_argument("encode: empty token sequence");
    if (len > total) throw std::invalid_argument("encode: valid_len exceeds sequence length");
    if (train && !rng) throw std::invalid_argument("encode: train mode needs an rng");

    trace.ids = tokens.ids;
    trace.len = len;
    trace.train = train;

    trace.embedded.assign(total, p.embed_dim);
    for (int64_t t = 0; t < len; ++t) {
        const uint32_t id = tokens.ids[static_cast<size_t>(t)];
        if (static_cast<int64_t>(id) >= p.vocab)
            throw std::out_of_range("encode: token id " + std::to_string(id) + " >= vocab " +
                                    std::to_string(p.vocab));
        const T* src = p.embedding.row(id);
        std::copy(src, src + p.embed_dim, trace.embedded.row(t));
    }
    if (train)
        detail::apply_dropout(trace.embedded, len, kEmbedDropout, *rng, trace.embed_mask);
    else
        trace.embed_mask.assign(0, 0);

    const int64_t width = p.feat_dim();
    trace.hidden.assign(total, width);
    if (p.encoder == EncoderKind::recurrent) {
        detail::gru_direction(p, p.fwd, trace.embedded, len, false, trace.zg[0], trace.rg[0],
                              trace.gg[0], trace.hg[0]);
        detail::gru_direction(p, p.bwd, trace.embedded, len, true, trace.zg[1], trace.rg[1],
                              trace.gg[1], trace.hg[1]);
        for (int64_t t = 0; t < len; ++t) {
            std::copy(trace.hg[0].row(t), trace.hg[0].row(t) + p.hidden, trace.hidden.row(t));
            std::copy(trace.hg[1].row(t), trace.hg[1].row(t) + p.hidden,
                      trace.hidden.row(t) + p.hidden);
        }
    } else {
        trace.mean_vec.assign(static_cast<size_t>(p.embed_dim), T(0));
        for (int64_t t = 0; t < len; ++t) {
            const T* row = trace.embedded.row(t);
            for (int64_t c = 0; c < p.embed_dim; ++c) trace.mean_vec[static_cast<size_t>(c)] += row[c];
        }
        const T inv = T(1) / T(len);
        for (auto& v : trace.mean_vec) v *= inv;
        std::vector<T> enc(static_cast<size_t>(width));
        std::copy(p.proj_b.begin(), p.proj_b.end(), enc.begin());
        detail::matvec_add(p.proj, trace.mean_vec.data(), enc.data());
        for (int64_t t = 0; t < len; ++t)
            std::copy(enc.begin(), enc.end(), trace.hidden.row(t));
    }
    if (train)
        detail::apply_dropout(trace.hidden, len, kHiddenDropout, *rng, trace.hidden_mask);
    else
        trace.hidden_mask.assign(0, 0);
}

// Full forward pass for one sample and a candidate node set.
template <typename T>
void forward(const TokenSequence& tokens, const std::vector<int32_t>& candidates,
             const ScorerParamsT<T>& p, bool train, SplitMix64* rng, ForwardTraceT<T>& trace,
             int64_t valid_len = 0) {
    if (candidates.empty()) throw std::invalid_argument("forward: empty candidate set");
    encode(tokens, p, train, rng, trace, valid_len);

    const int64_t width = p.feat_dim();
    const int64_t n = static_cast<int64_t>(candidates.size());
    trace.candidates = candidates;
    trace.rows.resize(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
        const int64_t row = candidates[static_cast<size_t>(j)] - p.first_node;
        if (row < 0 || row >= p.attention.rows)
            throw std::out_of_range("forward: node id " +
                                    std::to_string(candidates[static_cast<size_t>(j)]) +
                                    " not scored by this level");
        trace.rows[static_cast<size_t>(j)] = row;
    }

    trace.alpha.assign(n, trace.hidden.rows);
    trace.attended.assign(n, width);
    for (int64_t j = 0; j < n; ++j)
        attention(trace.hidden, p.attention.row(trace.rows[static_cast<size_t>(j)]), trace.len,
                  trace.attended.row(j), trace.alpha.row(j));

    const size_t layers = p.fc.size();
    trace.fc_pre.resize(layers);
    trace.fc_act.resize(layers);
    const Mat<T>* input = &trace.attended;
    for (size_t l = 0; l < layers; ++l) {
        const Mat<T>& w = p.fc[l];
        trace.fc_pre[l].assign(n, w.rows);
        trace.fc_act[l].assign(n, w.rows);
        for (int64_t j = 0; j < n; ++j) {
            T* pre = trace.fc_pre[l].row(j);
            std::copy(p.fc_b[l].begin(), p.fc_b[l].end(), pre);
            detail::matvec_add(w, input->row(j), pre);
            T* act = trace.fc_act[l].row(j);
            for (int64_t c = 0; c < w.rows; ++c) act[c] = pre[c] > T(0) ? pre[c] : T(0);
        }
        input = &trace.fc_act[l];
    }

    trace.logits.resize(static_cast<size_t>(n));
    trace.probs.resize(static_cast<size_t>(n));
    const int64_t last = input->cols;
    for (int64_t j = 0; j < n; ++j) {
        const T* feat = input->row(j);
        T logit = p.out_b[0];
        for (int64_t c = 0; c < last; ++c) logit += p.out_w[static_cast<size_t>(c)] * feat[c];
        trace.logits[static_cast<size_t>(j)] = logit;
        trace.probs[static_cast<size_t>(j)] = detail::sigmoid(logit);
    }
}

// Mean over candidates of binary cross-entropy, computed in double with the
// probabilities clamped to [1e-12, 1-1e-12].
template <typename T>
double bce_loss(const std::vector<T>& probs, const std::vector<uint8_t>& targets) {
    if (probs.size() != targets.size())
        throw std::invalid_argument("bce_loss: probs/targets size mismatch");
    if (probs.empty()) throw std::invalid_argument("bce_loss: empty candidate set");
    double sum = 0.0;
    for (size_t j = 0; j < probs.size(); ++j) {
        double pj = static_cast<double>(probs[j]);
        pj = std::min(1.0 - 1e-12, std::max(1e-12, pj));
        sum += targets[j] ? -std::log(pj) : -std::log1p(-pj);
    }
    return sum / static_cast<double>(probs.size());
}

// Exact reverse-mode gradients of bce_loss(forward(...)) accumulated into
// grad (shaped like the params; zero it first for a fresh gradient).
template <typename T>
void backward(const ForwardTraceT<T>& trace, const std::vector<uint8_t>& targets,
              const ScorerParamsT<T>& p, ScorerParamsT<T>& grad) {
    const int64_t n = static_cast<int64_t>(trace.candidates.size());
    if (static_cast<int64_t>(targets.size()) != n)
        throw std::invalid_argument("backward: targets size mismatch");
    const int64_t width = p.feat_dim();
    const int64_t len = trace.len;

    // d loss / d logit_j  (mean over candidates)
    std::vector<T> dlogit(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j)
        dlogit[static_cast<size_t>(j)] =
            (trace.probs[static_cast<size_t>(j)] - T(targets[static_cast<size_t>(j)])) / T(n);

    const size_t layers = p.fc.size();
    const Mat<T>& last_act = layers ? trace.fc_act[layers - 1] : trace.attended;
    Mat<T> dact;
    dact.assign(n, last_act.cols);
    for (int64_t j = 0; j < n; ++j) {
        const T dj = dlogit[static_cast<size_t>(j)];
        grad.out_b[0] += dj;
        const T* feat = last_act.row(j);
        T* drow = dact.row(j);
        for (int64_t c = 0; c < last_act.cols; ++c) {
            grad.out_w[static_cast<size_t>(c)] += dj * feat[c];
            drow[c] = dj * p.out_w[static_cast<size_t>(c)];
        }
    }

    for (size_t l = layers; l-- > 0;) {
        const Mat<T>& in = l == 0 ? trace.attended : trace.fc_act[l - 1];
        Mat<T> din;
        din.assign(n, in.cols);
        for (int64_t j = 0; j < n; ++j) {
            T* dpre = dact.row(j); // reuse in place: dact becomes dpre after ReLU gate
            const T* pre = trace.fc_pre[l].row(j);
            for (int64_t c = 0; c < p.fc[l].rows; ++c)
                if (pre[c] <= T(0)) dpre[c] = T(0);
            for (int64_t c = 0; c < p.fc[l].rows; ++c) grad.fc_b[l][static_cast<size_t>(c)] += dpre[c];
            detail::outer_add(grad.fc[l], dpre, in.row(j));
            detail::matvec_t_add(p.fc[l], dpre, din.row(j));
        }
        dact = std::move(din);
    }

    // dact now holds d loss / d attended_j. Attention backward.
    Mat<T> dhidden;
    dhidden.assign(trace.hidden.rows, width);
    std::vector<T> dalpha(static_cast<size_t>(len));
    for (int64_t j = 0; j < n; ++j) {
        const T* datt = dact.row(j);
        const T* alpha = trace.alpha.row(j);
        const int64_t arow = trace.rows[static_cast<size_t>(j)];

        // m_j = sum_t alpha_t h_t
        T dot_sum = T(0);
        for (int64_t t = 0; t < len; ++t) {
            const T* h = trace.hidden.row(t);
            T da = T(0);
            for (int64_t c = 0; c < width; ++c) da += datt[c] * h[c];
            dalpha[static_cast<size_t>(t)] = da;
            dot_sum += alpha[t] * da;
            T* dh = dhidden.row(t);
            for (int64_t c = 0; c < width; ++c) dh[c] += alpha[t] * datt[c];
        }
        // softmax backward, then logits_t = h_t . w_j
        T* dw = grad.attention.row(arow);
        const T* w = p.attention.row(arow);
        for (int64_t t = 0; t < len; ++t) {
            const T dl = alpha[t] * (dalpha[static_cast<size_t>(t)] - dot_sum);
            const T* h = trace.hidden.row(t);
            T* dh = dhidden.row(t);
            for (int64_t c = 0; c < width; ++c) {
                dw[c] += dl * h[c];
                dh[c] += dl * w[c];
            }
        }
    }

    // Encoder dropout backward.
    if (trace.train)
        for (int64_t t = 0; t < len; ++t) {
            T* dh = dhidden.row(t);
            const T* mask = trace.hidden_mask.row(t);
            for (int64_t c = 0; c < width; ++c) dh[c] *= mask[c];
        }

    Mat<T> dembedded;
    dembedded.assign(trace.embedded.rows, p.embed_dim);
    if (p.encoder == EncoderKind::recurrent) {
        const int64_t N = p.hidden;
        for (int d = 0; d < 2; ++d) {
            const bool reverse = d == 1;
            const GruDir<T>& dir = d == 0 ? p.fwd : p.bwd;
            GruDir<T>& gdir = d == 0 ? grad.fwd : grad.bwd;
            const Mat<T>&zm = trace.zg[d], &rm = trace.rg[d], &gm = trace.gg[d], &hm = trace.hg[d];

            std::vector<T> carry(static_cast<size_t>(N), T(0));
            std::vector<T> prev(static_cast<size_t>(N));
            std::vector<T> dz(static_cast<size_t>(N)), dr(static_cast<size_t>(N)),
                dg(static_cast<size_t>(N)), rh(static_cast<size_t>(N)), durh(static_cast<size_t>(N));
            // Walk processing order backwards: s is the step index, t the position.
            for (int64_t s = len; s-- > 0;) {
                const int64_t t = reverse ? len - 1 - s : s;
                const int64_t tprev = reverse ? t + 1 : t - 1;
                const bool has_prev = s > 0;
                if (has_prev) {
                    const T* hp = hm.row(tprev);
                    std::copy(hp, hp + N, prev.begin());
                } else {
                    std::fill(prev.begin(), prev.end(), T(0));
                }

                // dh_t = output gradient at t (+ carry from the later step)
                const T* dht_out = dhidden.row(t) + (d == 0 ? 0 : N);
                const T* zt = zm.row(t);
                const T* rt = rm.row(t);
                const T* gt = gm.row(t);
                for (int64_t i = 0; i < N; ++i) {
                    const T dh = dht_out[i] + carry[static_cast<size_t>(i)];
                    dz[static_cast<size_t>(i)] =
                        dh * (gt[i] - prev[static_cast<size_t>(i)]) * zt[i] * (T(1) - zt[i]);
                    dg[static_cast<size_t>(i)] = dh * zt[i] * (T(1) - gt[i] * gt[i]);
                    carry[static_cast<size_t>(i)] = dh * (T(1) - zt[i]); // into h_{prev}
                    rh[static_cast<size_t>(i)] = rt[i] * prev[static_cast<size_t>(i)];
                }
                // candidate gate: g = tanh(Wh x + Uh (r*prev) + bh)
                std::fill(durh.begin(), durh.end(), T(0));
                detail::matvec_t_add(dir.uh, dg.data(), durh.data());
                for (int64_t i = 0; i < N; ++i) {
                    dr[static_cast<size_t>(i)] = durh[static_cast<size_t>(i)] *
                                                 prev[static_cast<size_t>(i)] * rt[i] *
                                                 (T(1) - rt[i]);
                    carry[static_cast<size_t>(i)] += durh[static_cast<size_t>(i)] * rt[i];
                }
                const T* xt = trace.embedded.row(t);
                T* dx = dembedded.row(t);
                detail::outer_add(gdir.wh, dg.data(), xt);
                detail::outer_add(gdir.uh, dg.data(), rh.data());
                detail::outer_add(gdir.wz, dz.data(), xt);
                detail::outer_add(gdir.uz, dz.data(), prev.data());
                detail::outer_add(gdir.wr, dr.data(), xt);
                detail::outer_add(gdir.ur, dr.data(), prev.data());
                for (int64_t i = 0; i < N; ++i) {
                    gdir.bh[static_cast<size_t>(i)] += dg[static_cast<size_t>(i)];
                    gdir.bz[static_cast<size_t>(i)] += dz[static_cast<size_t>(i)];
                    gdir.br[static_cast<size_t>(i)] += dr[static_cast<size_t>(i)];
                }
                detail::matvec_t_add(dir.wh, dg.data(), dx);
                detail::matvec_t_add(dir.wz, dz.data(), dx);
                detail::matvec_t_add(dir.wr, dr.data(), dx);
                if (has_prev) {
                    detail::matvec_t_add(dir.uz, dz.data(), carry.data());
                    detail::matvec_t_add(dir.ur, dr.data(), carry.data());
                } else {
                    // gradient into the zero initial state is discarded
                }
            }
        }
    } else {
        // hidden rows t<len share one pre-dropout vector enc = proj mean + b.
        std::vector<T> dsum(static_cast<size_t>(width), T(0));
        for (int64_t t = 0; t < len; ++t) {
            const T* dh = dhidden.row(t);
            for (int64_t c = 0; c < width; ++c) dsum[static_cast<size_t>(c)] += dh[c];
        }
        for (int64_t c = 0; c < width; ++c) grad.proj_b[static_cast<size_t>(c)] += dsum[static_cast<size_t>(c)];
        detail::outer_add(grad.proj, dsum.data(), trace.mean_vec.data());
        std::vector<T> dmean(static_cast<size_t>(p.embed_dim), T(0));
        detail::matvec_t_add(p.proj, dsum.data(), dmean.data());
        const T inv = T(1) / T(len);
        for (int64_t t = 0; t < len; ++t) {
            T* dx = dembedded.row(t);
            for (int64_t c = 0; c < p.embed_dim; ++c) dx[c] += dmean[static_cast<size_t>(c)] * inv;
        }
    }

    // Embedding dropout backward, then scatter into embedding rows.
    for (int64_t t = 0; t < len; ++t) {
        const T* dx = dembedded.row(t);
        const T* mask = trace.train ? trace.embed_mask.row(t) : nullptr;
        T* erow = grad.embedding.row(trace.ids[static_cast<size_t>(t)]);
        for (int64_t c = 0; c < p.embed_dim; ++c)
            erow[c] += mask ? dx[c] * mask[c] : dx[c];
    }
}

template <typename T>
struct OptimizerStateT {
    int64_t step = 0;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::vector<double>> m, v; // shaped like the visited arrays
};

using OptimizerState = OptimizerStateT<float>;

// Adam with bias correction; moment math runs in double regardless of T.
template <typename T>
void adam_step(ScorerParamsT<T>& params, const ScorerParamsT<T>& grads,
               OptimizerStateT<T>& opt) {
    auto parrays = param_arrays(params);
    auto garrays = param_arrays(const_cast<ScorerParamsT<T>&>(grads));
    if (parrays.size() != garrays.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (opt.m.empty()) {
        opt.m.resize(parrays.size());
        opt.v.resize(parrays.size());
        for (size_t i = 0; i < parrays.size(); ++i) {
            opt.m[i].assign(parrays[i]->size(), 0.0);
            opt.v[i].assign(parrays[i]->size(), 0.0);
        }
    }
    opt.step += 1;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (size_t i = 0; i < parrays.size(); ++i) {
        auto& pv = *parrays[i];
        auto& gv = *garrays[i];
        if (pv.size() != gv.size()) throw std::invalid_argument("adam_step: array size mismatch");
        for (size_t k = 0; k < pv.size(); ++k) {
            const double g = static_cast<double>(gv[k]);
            if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
            double& m = opt.m[i][k];
            double& v = opt.v[i][k];
            m = opt.beta1 * m + (1.0 - opt.beta1) * g;
            v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
            const double mhat = m / c1;
            const double vhat = v / c2;
            pv[k] = static_cast<T>(static_cast<double>(pv[k]) - opt.lr * mhat / std::sqrt(vhat + opt.eps));
        }
    }
}

template <typename T>
struct SwaStateT {
    int64_t n = 0;
    std::vector<std::vector<T>> avg;
};

using SwaState = SwaStateT<float>;

// Running mean in the exact-fixed-point form avg += (w - avg)/(n+1).
template <typename T>
void swa_update(SwaStateT<T>& state, const ScorerParamsT<T>& params) {
    auto arrays = param_arrays(const_cast<ScorerParamsT<T>&>(params));
    if (state.n == 0) {
        state.avg.clear();
        for (auto* a : arrays) state.avg.push_back(*a);
        state.n = 1;
        return;
    }
    if (state.avg.size() != arrays.size())
        throw std::invalid_argument("swa_update: shape mismatch");
    const T inv = T(1) / T(state.n + 1);
    for (size_t i = 0; i < arrays.size(); ++i) {
        auto& avg = state.avg[i];
        auto& w = *arrays[i];
        if (avg.size() != w.size()) throw std::invalid_argument("swa_update: array size mismatch");
        for (size_t k = 0; k < w.size(); ++k) avg[k] += (w[k] - avg[k]) * inv;
    }
    state.n += 1;
}

template <typename T>
void swa_write_back(const SwaStateT<T>& state, ScorerParamsT<T>& params) {
    if (state.n == 0) return;
    auto arrays = param_arrays(params);
    for (size_t i = 0; i < arrays.size(); ++i) *arrays[i] = state.avg[i];
}

// Fresh model. Embedding entries uniform in ±0.05; every other matrix
// uniform in ±1/sqrt(fan_in); attention rows uniform in ±1/sqrt(2N);
// biases zero. One rng stream fills arrays in visit order.
template <typename T>
ScorerParamsT<T> make_scorer(EncoderKind enc, int64_t vocab, int64_t embed_dim, int64_t hidden,
                             const std::vector<int64_t>& fc_dims, int64_t num_nodes,
                             int64_t first_node, uint64_t seed) {
    if (vocab < 1 || embed_dim < 1 || hidden < 1 || num_nodes < 1)
        throw std::invalid_argument("make_scorer: dimensions must be positive");
    ScorerParamsT<T> p;
    p.encoder = enc;
    p.vocab = vocab;
    p.embed_dim = embed_dim;
    p.hidden = hidden;
    p.first_node = first_node;

    SplitMix64 rng(seed);
    auto fill = [&](std::vector<T>& v, double bound) {
        for (auto& x : v) x = static_cast<T>(rng.next_symmetric(bound));
    };
    p.embedding.assign(vocab, embed_dim);
    fill(p.embedding.a, 0.05);

    const int64_t width = 2 * hidden;
    if (enc == EncoderKind::recurrent) {
        for (GruDir<T>* dir : {&p.fwd, &p.bwd}) {
            const double bi = 1.0 / std::sqrt(static_cast<double>(embed_dim));
            const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
            for (Mat<T>* m : {&dir->wz, &dir->wr, &dir->wh}) {
                m->assign(hidden, embed_dim);
                fill(m->a, bi);
            }
            for (Mat<T>* m : {&dir->uz, &dir->ur, &dir->uh}) {
                m->assign(hidden, hidden);
                fill(m->a, bh);
            }
            dir->bz.assign(static_cast<size_t>(hidden), T(0));
            dir->br.assign(static_cast<size_t>(hidden), T(0));
            dir->bh.assign(static_cast<size_t>(hidden), T(0));
        }
    } else {
        p.proj.assign(width, embed_dim);
        fill(p.proj.a, 1.0 / std::sqrt(static_cast<double>(embed_dim)));
        p.proj_b.assign(static_cast<size_t>(width), T(0));
    }

    p.attention.assign(num_nodes, width);
    fill(p.attention.a, 1.0 / std::sqrt(static_cast<double>(width)));

    int64_t in_dim = width;
    for (int64_t out_dim : fc_dims) {
        if (out_dim < 1) throw std::invalid_argument("make_scorer: fc dims must be positive");
        Mat<T> w;
        w.assign(out_dim, in_dim);
        fill(w.a, 1.0 / std::sqrt(static_cast<double>(in_dim)));
        p.fc.push_back(std::move(w));
        p.fc_b.emplace_back(static_cast<size_t>(out_dim), T(0));
        in_dim = out_dim;
    }
    p.out_w.assign(static_cast<size_t>(in_dim), T(0));
    fill(p.out_w, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    p.out_b.assign(1, T(0));
    return p;
}

// Next level's model: everything shared is copied; the attention matrix is
// re-drawn uniform in ±1/sqrt(2N) with one row per node of the new level.
template <typename T>
ScorerParamsT<T> init_from_previous_level(const ScorerParamsT<T>& prev, int64_t num_nodes,
                                          int64_t first_node, uint64_t seed) {
    if (num_nodes < 1) throw std::invalid_argument("init_from_previous_level: no nodes");
    ScorerParamsT<T> p = prev;
    p.first_node = first_node;
    p.level = prev.level + 1;
    SplitMix64 rng(seed);
    p.attention.assign(num_nodes, prev.feat_dim());
    const double bound = 1.0 / std::sqrt(static_cast<double>(prev.feat_dim()));
    for (auto& x : p.attention.a) x = static_cast<T>(rng.next_symmetric(bound));
    return p;
}

// AXM1 container: magic, little-endian u64 manifest length, JSON manifest,
// then the visited arrays as raw little-endian float32 in manifest order.
struct ModelMeta {
    int64_t level = 0;
    uint64_t tree_seed = 0;
    std::string note; // free-form hyperparameter record
};

void save_model(const ScorerParams& p, const ModelMeta& meta, const std::string& path);
ScorerParams load_model(const std::string& path, ModelMeta* meta = nullptr);

} // namespace xmc
