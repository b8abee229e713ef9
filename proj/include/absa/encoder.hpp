// Multi-layer bidirectional transformer encoder with explicit forward and
// backward passes. Templated on the scalar type: float for training runs,
// double for finite-difference gradient verification.
//
// Layout per layer (post-layer-norm):
//   attn = MultiHead(X) . Wo + bo
//   Xa   = LN1(X + attn)
//   ffn  = gelu(Xa . W1 + b1) . W2 + b2
//   X'   = LN2(Xa + ffn)
// Positions at or past real_length pass through untouched; masked keys get
// exactly zero attention weight.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "absa/error.hpp"
#include "absa/input_repr.hpp"
#include "absa/linalg.hpp"
#include "absa/rng.hpp"

namespace absa {

struct EncoderConfig {
    int layers = 2;            // L
    int hidden = 32;           // H
    int heads = 2;             // A
    int ffn_size = 0;          // 0 means 4*hidden
    int max_positions = 64;
    int vocab_size = 0;
    double dropout_rate = 0.0;
    bool bypass_pooler = false;
    bool mask_refinement_80_10_10 = false;  // literal mask rule by default

    int ffn() const { return ffn_size > 0 ? ffn_size : 4 * hidden; }
    int head_dim() const { return hidden / heads; }

    void validate() const {
        require(layers >= 0, "encoder config: layer count must be >= 0, got ", layers);
        require(hidden >= 1 && heads >= 1, "encoder config: hidden and heads must be >= 1");
        require(hidden % heads == 0, "encoder config: hidden ", hidden,
                " not divisible by heads ", heads);
        require(ffn() >= 1, "encoder config: ffn size must be >= 1");
        require(max_positions >= 1, "encoder config: max_positions must be >= 1");
        require(vocab_size >= 1, "encoder config: vocab_size must be >= 1, got ", vocab_size);
        require(dropout_rate >= 0.0 && dropout_rate < 1.0,
                "encoder config: dropout must be in [0, 1)");
    }
};

template <class S>
struct LayerParamsT {
    Mat<S> wq, wk, wv, wo;       // H x H, applied as X . W
    Vec<S> bq, bk, bv, bo;       // H
    Vec<S> ln1_gain, ln1_bias;   // H
    Mat<S> ffn_w_in;             // H x F
    Vec<S> ffn_b_in;             // F
    Mat<S> ffn_w_out;            // F x H
    Vec<S> ffn_b_out;            // H
    Vec<S> ln2_gain, ln2_bias;   // H
};

template <class S>
struct EncoderParamsT {
    EmbeddingTablesT<S> embeddings;
    std::vector<LayerParamsT<S>> layers;
    Vec<S> mlm_norm_gain, mlm_norm_bias;  // H, output norm before the tied projection
    Vec<S> mlm_out_bias;                  // vocab_size
    Mat<S> pooler_w;                      // H x H
    Vec<S> pooler_b;                      // H
};

using EncoderParams = EncoderParamsT<float>;

// Visits every learnable tensor in a fixed order shared by the optimizer,
// the checkpoint writer, and the gradient checker.
template <class S, class F>
void for_each_param(EncoderParamsT<S>& p, F&& f) {
    f("embeddings.token", p.embeddings.token);
    f("embeddings.segment", p.embeddings.segment);
    f("embeddings.position", p.embeddings.position);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lay = p.layers[l];
        const std::string prefix = "layer" + std::to_string(l) + ".";
        f(prefix + "attn.wq", lay.wq);
        f(prefix + "attn.bq", lay.bq);
        f(prefix + "attn.wk", lay.wk);
        f(prefix + "attn.bk", lay.bk);
        f(prefix + "attn.wv", lay.wv);
        f(prefix + "attn.bv", lay.bv);
        f(prefix + "attn.wo", lay.wo);
        f(prefix + "attn.bo", lay.bo);
        f(prefix + "ln1.gain", lay.ln1_gain);
        f(prefix + "ln1.bias", lay.ln1_bias);
        f(prefix + "ffn.w_in", lay.ffn_w_in);
        f(prefix + "ffn.b_in", lay.ffn_b_in);
        f(prefix + "ffn.w_out", lay.ffn_w_out);
        f(prefix + "ffn.b_out", lay.ffn_b_out);
        f(prefix + "ln2.gain", lay.ln2_gain);
        f(prefix + "ln2.bias", lay.ln2_bias);
    }
    f("mlm.norm_gain", p.mlm_norm_gain);
    f("mlm.norm_bias", p.mlm_norm_bias);
    f("mlm.out_bias", p.mlm_out_bias);
    f("pooler.w", p.pooler_w);
    f("pooler.b", p.pooler_b);
}

template <class S, class F>
void for_each_param(const EncoderParamsT<S>& p, F&& f) {
    for_each_param(const_cast<EncoderParamsT<S>&>(p),
                   [&](const std::string& name, auto& tensor) {
                       f(name, const_cast<const std::decay_t<decltype(tensor)>&>(tensor));
                   });
}

// Truncated-normal(0.02) weights, zero biases, unit layer-norm gains.
template <class S = float>
EncoderParamsT<S> init_encoder_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(derive_seed(seed, "init"));
    constexpr double kStd = 0.02;
    auto normal_mat = [&](Eigen::Index r, Eigen::Index c) {
        Mat<S> m(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = 0; j < c; ++j) {
                m(i, j) = static_cast<S>(rng.truncated_normal(kStd));
            }
        }
        return m;
    };
    const int h = config.hidden;
    EncoderParamsT<S> p;
    p.embeddings.token = normal_mat(config.vocab_size, h);
    p.embeddings.segment = normal_mat(2, h);
    p.embeddings.position = normal_mat(config.max_positions, h);
    p.layers.resize(static_cast<std::size_t>(config.layers));
    for (auto& lay : p.layers) {
        lay.wq = normal_mat(h, h);
        lay.wk = normal_mat(h, h);
        lay.wv = normal_mat(h, h);
        lay.wo = normal_mat(h, h);
        lay.bq = Vec<S>::Zero(h);
        lay.bk = Vec<S>::Zero(h);
        lay.bv = Vec<S>::Zero(h);
        lay.bo = Vec<S>::Zero(h);
        lay.ln1_gain = Vec<S>::Ones(h);
        lay.ln1_bias = Vec<S>::Zero(h);
        lay.ffn_w_in = normal_mat(h, config.ffn());
        lay.ffn_b_in = Vec<S>::Zero(config.ffn());
        lay.ffn_w_out = normal_mat(config.ffn(), h);
        lay.ffn_b_out = Vec<S>::Zero(h);
        lay.ln2_gain = Vec<S>::Ones(h);
        lay.ln2_bias = Vec<S>::Zero(h);
    }
    p.mlm_norm_gain = Vec<S>::Ones(h);
    p.mlm_norm_bias = Vec<S>::Zero(h);
    p.mlm_out_bias = Vec<S>::Zero(config.vocab_size);
    p.pooler_w = normal_mat(h, h);
    p.pooler_b = Vec<S>::Zero(h);
    return p;
}

template <class S>
EncoderParamsT<S> zeros_like(const EncoderParamsT<S>& src) {
    EncoderParamsT<S> out = src;
    for_each_param(out, [](const std::string&, auto& tensor) { tensor.setZero(); });
    return out;
}

template <class S, class T>
EncoderParamsT<T> cast_params(const EncoderParamsT<S>& src) {
    EncoderParamsT<T> out;
    out.embeddings.token = src.embeddings.token.template cast<T>();
    out.embeddings.segment = src.embeddings.segment.template cast<T>();
    out.embeddings.position = src.embeddings.position.template cast<T>();
    out.layers.resize(src.layers.size());
    for (std::size_t l = 0; l < src.layers.size(); ++l) {
        const auto& a = src.layers[l];
        auto& b = out.layers[l];
        b.wq = a.wq.template cast<T>(); b.bq = a.bq.template cast<T>();
        b.wk = a.wk.template cast<T>(); b.bk = a.bk.template cast<T>();
        b.wv = a.wv.template cast<T>(); b.bv = a.bv.template cast<T>();
        b.wo = a.wo.template cast<T>(); b.bo = a.bo.template cast<T>();
        b.ln1_gain = a.ln1_gain.template cast<T>(); b.ln1_bias = a.ln1_bias.template cast<T>();
        b.ffn_w_in = a.ffn_w_in.template cast<T>(); b.ffn_b_in = a.ffn_b_in.template cast<T>();
        b.ffn_w_out = a.ffn_w_out.template cast<T>(); b.ffn_b_out = a.ffn_b_out.template cast<T>();
        b.ln2_gain = a.ln2_gain.template cast<T>(); b.ln2_bias = a.ln2_bias.template cast<T>();
    }
    out.mlm_norm_gain = src.mlm_norm_gain.template cast<T>();
    out.mlm_norm_bias = src.mlm_norm_bias.template cast<T>();
    out.mlm_out_bias = src.mlm_out_bias.template cast<T>();
    out.pooler_w = src.pooler_w.template cast<T>();
    out.pooler_b = src.pooler_b.template cast<T>();
    return out;
}

namespace nn {

template <class S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865476)));
}

template <class S>
S gelu_grad(S x) {
    const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865476)));
    const S pdf = S(0.3989422804014327) * std::exp(S(-0.5) * x * x);
    return cdf + x * pdf;
}

inline constexpr double kLayerNormEps = 1e-12;

template <class S>
struct LnCache {
    Mat<S> xhat;     // normalized rows
    Vec<S> inv_std;  // per row
};

template <class S>
Mat<S> layer_norm(const Mat<S>& x, const Vec<S>& gain, const Vec<S>& bias, LnCache<S>& cache) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    cache.xhat.resize(rows, cols);
    cache.inv_std.resize(rows);
    Mat<S> out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const S mean = x.row(i).mean();
        auto centered = (x.row(i).array() - mean).eval();
        const S var = centered.square().mean();
        const S inv = S(1) / std::sqrt(var + S(kLayerNormEps));
        cache.inv_std(i) = inv;
        cache.xhat.row(i) = centered * inv;
        out.row(i) = cache.xhat.row(i).array() * gain.transpose().array() +
                     bias.transpose().array();
    }
    return out;
}

template <class S>
Mat<S> layer_norm_backward(const Mat<S>& d_out, const LnCache<S>& cache, const Vec<S>& gain,
                           Vec<S>& d_gain, Vec<S>& d_bias) {
    const Eigen::Index rows = d_out.rows(), cols = d_out.cols();
    Mat<S> d_x(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        auto dy = d_out.row(i).array();
        auto xh = cache.xhat.row(i).array();
        d_gain.array() += (dy * xh).transpose();
        d_bias.array() += dy.transpose();
        auto dxhat = (dy * gain.transpose().array()).eval();
        const S m1 = dxhat.mean();
        const S m2 = (dxhat * xh).mean();
        d_x.row(i) = cache.inv_std(i) * (dxhat - m1 - xh * m2);
    }
    return d_x;
}

// Row-wise softmax over keys with mask column exclusion: masked keys get an
// exact zero weight and take no part in the normalization.
template <class S>
Mat<S> masked_softmax_rows(const Mat<S>& scores, const std::vector<int>& key_mask) {
    const Eigen::Index rows = scores.rows(), cols = scores.cols();
    Mat<S> probs = Mat<S>::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        S max_score = std::numeric_limits<S>::lowest();
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (key_mask[static_cast<std::size_t>(j)] && scores(i, j) > max_score) {
                max_score = scores(i, j);
            }
        }
        S total = S(0);
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!key_mask[static_cast<std::size_t>(j)]) continue;
            const S e = std::exp(scores(i, j) - max_score);
            probs(i, j) = e;
            total += e;
        }
        if (total > S(0)) probs.row(i) /= total;
    }
    return probs;
}

}  // namespace nn

template <class S>
struct AttentionCache {
    Mat<S> q, k, v;               // R x H
    std::vector<Mat<S>> probs;    // per head, R x R
    Mat<S> concat;                // R x H, heads side by side
};

template <class S>
struct LayerCache {
    Mat<S> x_in;                  // R x H input to the layer
    AttentionCache<S> attn;
    Mat<S> attn_out;              // R x H after output projection
    nn::LnCache<S> ln1;
    Mat<S> x_mid;                 // R x H after LN1
    Mat<S> ffn_pre;               // R x F before gelu
    Mat<S> ffn_act;               // R x F after gelu
    nn::LnCache<S> ln2;
    Mat<S> x_out;                 // R x H layer output
};

template <class S>
struct EncoderForwardCache {
    Mat<S> embedded;              // T x H embedding sum (full length)
    std::vector<LayerCache<S>> layers;
    Mat<S> hidden;                // T x H, rows >= real_length pass through
    Vec<S> cls;                   // pooled [CLS] vector (or raw row 0)
    bool pooled = false;
    int real_length = 0;
};

namespace detail {

// Multi-head attention over the first R rows. Mask selects which of those
// rows may be attended to as keys.
template <class S>
Mat<S> attention_forward(const Mat<S>& x, const std::vector<int>& key_mask,
                         const LayerParamsT<S>& lay, int heads, AttentionCache<S>& cache) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index h = x.cols();
    const Eigen::Index d = h / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(d));
    cache.q = x * lay.wq;
    cache.q.rowwise() += lay.bq.transpose();
    cache.k = x * lay.wk;
    cache.k.rowwise() += lay.bk.transpose();
    cache.v = x * lay.wv;
    cache.v.rowwise() += lay.bv.transpose();
    cache.probs.assign(static_cast<std::size_t>(heads), Mat<S>());
    cache.concat.resize(rows, h);
    for (int head = 0; head < heads; ++head) {
        auto qh = cache.q.middleCols(head * d, d);
        auto kh = cache.k.middleCols(head * d, d);
        auto vh = cache.v.middleCols(head * d, d);
        Mat<S> scores = qh * kh.transpose() * scale;
        cache.probs[static_cast<std::size_t>(head)] = nn::masked_softmax_rows(scores, key_mask);
        cache.concat.middleCols(head * d, d) =
            cache.probs[static_cast<std::size_t>(head)] * vh;
    }
    Mat<S> out = cache.concat * lay.wo;
    out.rowwise() += lay.bo.transpose();
    return out;
}

template <class S>
Mat<S> attention_backward(const Mat<S>& d_out, const Mat<S>& x_in, const LayerParamsT<S>& lay,
                          int heads, const AttentionCache<S>& cache, LayerParamsT<S>& grads) {
    const Eigen::Index h = x_in.cols();
    const Eigen::Index d = h / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(d));
    grads.wo += cache.concat.transpose() * d_out;
    grads.bo += d_out.colwise().sum().transpose();
    Mat<S> d_concat = d_out * lay.wo.transpose();
    Mat<S> d_q(d_out.rows(), h), d_k(d_out.rows(), h), d_v(d_out.rows(), h);
    for (int head = 0; head < heads; ++head) {
        const Mat<S>& probs = cache.probs[static_cast<std::size_t>(head)];
        auto kh = cache.k.middleCols(head * d, d);
        auto qh = cache.q.middleCols(head * d, d);
        auto vh = cache.v.middleCols(head * d, d);
        auto d_ch = d_concat.middleCols(head * d, d);
        Mat<S> d_probs = d_ch * vh.transpose();
        // softmax rows: dS = P .* (dP - rowwise_dot(dP, P)); masked cells have P = 0
        Mat<S> d_scores(probs.rows(), probs.cols());
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const S dot = (d_probs.row(i).array() * probs.row(i).array()).sum();
            d_scores.row(i) =
                probs.row(i).array() * (d_probs.row(i).array() - dot) * scale;
        }
        d_q.middleCols(head * d, d) = d_scores * kh;
        d_k.middleCols(head * d, d) = d_scores.transpose() * qh;
        d_v.middleCols(head * d, d) = probs.transpose() * d_ch;
    }
    grads.wq += x_in.transpose() * d_q;
    grads.bq += d_q.colwise().sum().transpose();
    grads.wk += x_in.transpose() * d_k;
    grads.bk += d_k.colwise().sum().transpose();
    grads.wv += x_in.transpose() * d_v;
    grads.bv += d_v.colwise().sum().transpose();
    return d_q * lay.wq.transpose() + d_k * lay.wk.transpose() + d_v * lay.wv.transpose();
}

}  // namespace detail

// Standalone multi-head self-attention, the forward contract of one
// attention sublayer. probs_out receives the per-head attention weights.
template <class S>
Mat<S> self_attention(const Mat<S>& x, const std::vector<int>& attention_mask,
                      const LayerParamsT<S>& lay, int heads,
                      std::vector<Mat<S>>* probs_out = nullptr) {
    require(x.allFinite(), "self_attention: non-finite values in input");
    require(static_cast<Eigen::Index>(attention_mask.size()) == x.rows(),
            "self_attention: mask length ", attention_mask.size(), " != rows ", x.rows());
    AttentionCache<S> cache;
    Mat<S> out = detail::attention_forward(x, attention_mask, lay, heads, cache);
    if (probs_out) *probs_out = std::move(cache.probs);
    return out;
}

// Full encoder forward. Rows past real_length carry their embedding values
// through unchanged; they are masked out of every attention step.
template <class S>
void encoder_forward(const InputRepresentation& repr, const EncoderParamsT<S>& params,
                     const EncoderConfig& config, EncoderForwardCache<S>& cache) {
    config.validate();
    require(static_cast<int>(params.layers.size()) == config.layers,
            "encoder_forward: params have ", params.layers.size(), " layers, config says ",
            config.layers);
    require(params.embeddings.token.cols() == config.hidden,
            "encoder_forward: embedding width ", params.embeddings.token.cols(),
            " != hidden ", config.hidden);
    cache.real_length = repr.real_length;
    cache.embedded = embed(repr, params.embeddings);
    const int r = repr.real_length;
    std::vector<int> key_mask(repr.attention_mask.begin(), repr.attention_mask.begin() + r);

    Mat<S> x = cache.embedded.topRows(r);
    cache.layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& lay = params.layers[l];
        auto& lc = cache.layers[l];
        lc.x_in = x;
        lc.attn_out = detail::attention_forward(x, key_mask, lay, config.heads, lc.attn);
        Mat<S> residual = x + lc.attn_out;
        lc.x_mid = nn::layer_norm(residual, lay.ln1_gain, lay.ln1_bias, lc.ln1);
        lc.ffn_pre = lc.x_mid * lay.ffn_w_in;
        lc.ffn_pre.rowwise() += lay.ffn_b_in.transpose();
        lc.ffn_act = lc.ffn_pre.unaryExpr([](S v) { return nn::gelu(v); });
        Mat<S> ffn_out = lc.ffn_act * lay.ffn_w_out;
        ffn_out.rowwise() += lay.ffn_b_out.transpose();
        Mat<S> residual2 = lc.x_mid + ffn_out;
        lc.x_out = nn::layer_norm(residual2, lay.ln2_gain, lay.ln2_bias, lc.ln2);
        x = lc.x_out;
    }
    cache.hidden = cache.embedded;
    cache.hidden.topRows(r) = x;
    require(cache.hidden.allFinite(), "encoder_forward: non-finite hidden states");

    cache.pooled = !config.bypass_pooler;
    if (cache.pooled) {
        Vec<S> z = params.pooler_w.transpose() * cache.hidden.row(0).transpose() + params.pooler_b;
        cache.cls = z.array().tanh();
    } else {
        cache.cls = cache.hidden.row(0).transpose();
    }
}

// Backward through the whole encoder. d_hidden_prefix holds gradients for
// the first real_length hidden rows; d_cls for the [CLS] output vector
// (either may be empty). Gradients accumulate into `grads`.
template <class S>
void encoder_backward(const InputRepresentation& repr, const EncoderParamsT<S>& params,
                      const EncoderConfig& config, const EncoderForwardCache<S>& cache,
                      Mat<S> d_hidden_prefix, const Vec<S>& d_cls, EncoderParamsT<S>& grads) {
    const int r = cache.real_length;
    if (d_hidden_prefix.size() == 0) {
        d_hidden_prefix = Mat<S>::Zero(r, config.hidden);
    }
    require(d_hidden_prefix.rows() == r && d_hidden_prefix.cols() == config.hidden,
            "encoder_backward: bad d_hidden shape");
    if (d_cls.size() > 0) {
        if (cache.pooled) {
            // cls = tanh(Wp^T h0 + bp)
            Vec<S> d_z = d_cls.array() * (S(1) - cache.cls.array().square());
            grads.pooler_w += cache.hidden.row(0).transpose() * d_z.transpose();
            grads.pooler_b += d_z;
            d_hidden_prefix.row(0) += (params.pooler_w * d_z).transpose();
        } else {
            d_hidden_prefix.row(0) += d_cls.transpose();
        }
    }

    std::vector<int> key_mask(repr.attention_mask.begin(), repr.attention_mask.begin() + r);
    Mat<S> d_x = std::move(d_hidden_prefix);
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& lay = params.layers[li];
        const auto& lc = cache.layers[li];
        auto& gl = grads.layers[li];
        // LN2
        Mat<S> d_residual2 =
            nn::layer_norm_backward(d_x, lc.ln2, lay.ln2_gain, gl.ln2_gain, gl.ln2_bias);
        // FFN
        gl.ffn_w_out += lc.ffn_act.transpose() * d_residual2;
        gl.ffn_b_out += d_residual2.colwise().sum().transpose();
        Mat<S> d_act = d_residual2 * lay.ffn_w_out.transpose();
        Mat<S> d_pre =
            d_act.array() * lc.ffn_pre.unaryExpr([](S v) { return nn::gelu_grad(v); }).array();
        gl.ffn_w_in += lc.x_mid.transpose() * d_pre;
        gl.ffn_b_in += d_pre.colwise().sum().transpose();
        Mat<S> d_mid = d_residual2 + d_pre * lay.ffn_w_in.transpose();
        // LN1
        Mat<S> d_residual1 =
            nn::layer_norm_backward(d_mid, lc.ln1, lay.ln1_gain, gl.ln1_gain, gl.ln1_bias);
        // attention
        Mat<S> d_attn_in = detail::attention_backward(d_residual1, lc.x_in, lay, config.heads,
                                                      lc.attn, gl);
        d_x = d_residual1 + d_attn_in;
    }
    // embeddings: scatter rows into the three tables
    for (int i = 0; i < r; ++i) {
        const int tok = repr.token_ids[static_cast<std::size_t>(i)];
        const int seg = repr.segment_ids[static_cast<std::size_t>(i)];
        grads.embeddings.token.row(tok) += d_x.row(i);
        grads.embeddings.segment.row(seg) += d_x.row(i);
        grads.embeddings.position.row(i) += d_x.row(i);
    }
}

}  // namespace absa
