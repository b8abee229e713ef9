// Pretraining: masked-language-model masking, next-sentence-prediction pair
// sampling, the tied-embedding MLM output head, and the joint training loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "absa/encoder.hpp"
#include "absa/error.hpp"
#include "absa/input_repr.hpp"
#include "absa/optim.hpp"
#include "absa/rng.hpp"
#include "absa/tokenizer.hpp"

namespace absa {

struct MaskedBatch {
    std::vector<int> token_ids;         // with selected positions replaced by [MASK]
    std::vector<int> target_positions;  // ascending
    std::vector<int> target_ids;        // original ids at those positions
};

// Selects round(rate * maskable) non-special unpadded positions without
// replacement. By default every selected token becomes [MASK]; the 80/10/10
// refinement (keep original 10%, random token 10%) sits behind a flag.
inline MaskedBatch mlm_mask(const InputRepresentation& repr, const Vocab& vocab, double rate,
                            Rng& rng, bool refinement_80_10_10 = false) {
    require(rate >= 0.0 && rate <= 1.0, "mlm_mask: rate must be in [0, 1], got ", rate);
    MaskedBatch out;
    out.token_ids = repr.token_ids;
    std::vector<int> maskable;
    for (int i = 0; i < repr.real_length; ++i) {
        const int id = repr.token_ids[static_cast<std::size_t>(i)];
        if (id == vocab.cls_id || id == vocab.sep_id || id == vocab.pad_id) continue;
        maskable.push_back(i);
    }
    const auto count =
        static_cast<std::size_t>(std::llround(rate * static_cast<double>(maskable.size())));
    if (count == 0) return out;
    rng.shuffle(maskable);
    maskable.resize(count);
    std::sort(maskable.begin(), maskable.end());
    for (int pos : maskable) {
        const auto p = static_cast<std::size_t>(pos);
        out.target_positions.push_back(pos);
        out.target_ids.push_back(repr.token_ids[p]);
        if (!refinement_80_10_10) {
            out.token_ids[p] = vocab.mask_id;
            continue;
        }
        const double u = rng.uniform01();
        if (u < 0.8) {
            out.token_ids[p] = vocab.mask_id;
        } else if (u < 0.9) {
            // random non-special replacement
            int id;
            do {
                id = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(vocab.size())));
            } while (id == vocab.pad_id || id == vocab.unk_id || id == vocab.cls_id ||
                     id == vocab.sep_id || id == vocab.mask_id);
            out.token_ids[p] = id;
        }  // else: keep the original token
    }
    return out;
}

inline MaskedBatch mlm_mask(const InputRepresentation& repr, const Vocab& vocab, double rate,
                            std::uint64_t seed, bool refinement_80_10_10 = false) {
    Rng rng(derive_seed(seed, "mask"));
    return mlm_mask(repr, vocab, rate, rng, refinement_80_10_10);
}

struct NspPair {
    std::string sentence_a;
    std::string sentence_b;
    bool is_next = false;
};

using Document = std::vector<std::string>;  // ordered sentences

// Draws n pairs: coin flip for the label, IsNext = adjacent sentences of one
// document, NotNext = sentence_b uniform from a different document.
inline std::vector<NspPair> nsp_sample(const std::vector<Document>& documents, std::size_t n,
                                       std::uint64_t seed) {
    std::vector<std::size_t> multi;      // docs with >= 2 sentences
    std::vector<std::size_t> nonempty;   // docs with >= 1 sentence
    for (std::size_t d = 0; d < documents.size(); ++d) {
        if (!documents[d].empty()) nonempty.push_back(d);
        if (documents[d].size() >= 2) multi.push_back(d);
    }
    require(!multi.empty(), "nsp_sample: no document has two sentences");
    require(nonempty.size() >= 2, "nsp_sample: need at least two nonempty documents");
    Rng rng(derive_seed(seed, "nsp"));
    std::vector<NspPair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        NspPair pair;
        pair.is_next = rng.bernoulli(0.5);
        if (pair.is_next) {
            const auto& doc = documents[multi[rng.uniform_below(multi.size())]];
            const std::size_t s = rng.uniform_below(doc.size() - 1);
            pair.sentence_a = doc[s];
            pair.sentence_b = doc[s + 1];
        } else {
            const std::size_t da = nonempty[rng.uniform_below(nonempty.size())];
            const auto& doc_a = documents[da];
            pair.sentence_a = doc_a[rng.uniform_below(doc_a.size())];
            std::size_t db;
            do {
                db = nonempty[rng.uniform_below(nonempty.size())];
            } while (db == da);
            const auto& doc_b = documents[db];
            pair.sentence_b = doc_b[rng.uniform_below(doc_b.size())];
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

template <class S>
struct NspHeadT {
    Vec<S> w;  // H
    S b = S(0);
};

using NspHead = NspHeadT<float>;

struct PretrainExample {
    InputRepresentation repr;           // token ids already masked
    std::vector<int> target_positions;
    std::vector<int> target_ids;
    int nsp_label = 0;                  // 1 = IsNext
};

inline std::vector<PretrainExample> build_pretrain_examples(const std::vector<NspPair>& pairs,
                                                            const Vocab& vocab, int max_seq_len,
                                                            double mask_rate, Rng& rng) {
    std::vector<PretrainExample> out;
    out.reserve(pairs.size());
    TokenizerOptions topt;
    for (const auto& pair : pairs) {
        const auto a = tokenize(pair.sentence_a, vocab, topt);
        const auto b = tokenize(pair.sentence_b, vocab, topt);
        if (a.empty() || b.empty()) continue;
        PretrainExample ex;
        ex.repr = encode_pair(a, b, vocab, max_seq_len);
        MaskedBatch masked = mlm_mask(ex.repr, vocab, mask_rate, rng);
        ex.repr.token_ids = std::move(masked.token_ids);
        ex.target_positions = std::move(masked.target_positions);
        ex.target_ids = std::move(masked.target_ids);
        ex.nsp_label = pair.is_next ? 1 : 0;
        out.push_back(std::move(ex));
    }
    return out;
}

namespace detail {

// MLM cross-entropy at the target positions through the output layer norm and
// the tied token-embedding projection. Adds the resulting hidden-state
// gradients into d_hidden (when grads != nullptr). Returns the mean loss over
// targets; `weight` scales the gradient contribution.
template <class S>
S mlm_loss(const EncoderParamsT<S>& params, const EncoderForwardCache<S>& fwd,
           const std::vector<int>& positions, const std::vector<int>& targets, S weight,
           EncoderParamsT<S>* grads, Mat<S>* d_hidden) {
    if (positions.empty()) return S(0);
    const auto n = static_cast<Eigen::Index>(positions.size());
    const Eigen::Index h = params.embeddings.token.cols();
    Mat<S> z(n, h);
    for (Eigen::Index t = 0; t < n; ++t) {
        z.row(t) = fwd.hidden.row(positions[static_cast<std::size_t>(t)]);
    }
    nn::LnCache<S> ln;
    Mat<S> z_norm = nn::layer_norm(z, params.mlm_norm_gain, params.mlm_norm_bias, ln);
    Mat<S> logits = z_norm * params.embeddings.token.transpose();
    logits.rowwise() += params.mlm_out_bias.transpose();

    S total = S(0);
    Mat<S> d_logits(n, logits.cols());
    for (Eigen::Index t = 0; t < n; ++t) {
        const S max_logit = logits.row(t).maxCoeff();
        auto shifted = (logits.row(t).array() - max_logit).eval();
        const S log_z = std::log(shifted.exp().sum());
        const int gold = targets[static_cast<std::size_t>(t)];
        total += log_z - shifted(gold);
        if (grads) {
            d_logits.row(t) = (shifted - log_z).exp();
            d_logits(t, gold) -= S(1);
        }
    }
    const S inv_n = S(1) / static_cast<S>(n);
    if (grads) {
        d_logits *= weight * inv_n;
        grads->mlm_out_bias += d_logits.colwise().sum().transpose();
        grads->embeddings.token += d_logits.transpose() * z_norm;
        Mat<S> d_znorm = d_logits * params.embeddings.token;
        Mat<S> d_z = nn::layer_norm_backward(d_znorm, ln, params.mlm_norm_gain,
                                             grads->mlm_norm_gain, grads->mlm_norm_bias);
        for (Eigen::Index t = 0; t < n; ++t) {
            d_hidden->row(positions[static_cast<std::size_t>(t)]) += d_z.row(t);
        }
    }
    return total * inv_n;
}

// Sigmoid binary cross-entropy on the pooled [CLS] vector.
template <class S>
S nsp_loss(const NspHeadT<S>& head, const Vec<S>& cls, int label, S weight,
           NspHeadT<S>* head_grads, Vec<S>* d_cls) {
    const S z = head.w.dot(cls) + head.b;
    // softplus(z) - y*z, computed stably
    const S loss = (z > S(0) ? z : S(0)) + std::log1p(std::exp(-std::abs(z))) -
                   static_cast<S>(label) * z;
    if (head_grads) {
        const S p = S(1) / (S(1) + std::exp(-z));
        const S dz = (p - static_cast<S>(label)) * weight;
        head_grads->w += dz * cls;
        head_grads->b += dz;
        if (d_cls) *d_cls += dz * head.w;
    }
    return loss;
}

}  // namespace detail

struct PretrainEpochStats {
    double mlm_loss = 0;
    double nsp_loss = 0;
    double total_loss = 0;
};

struct PretrainOptions {
    std::size_t n_pairs = 512;
    double mask_rate = 0.15;
    int max_seq_len = 48;
    double learning_rate = 1e-3;
    int batch_size = 16;
    int epochs = 10;
    std::uint64_t seed = 1;
    bool refinement_80_10_10 = false;
};

template <class S>
struct PretrainResultT {
    EncoderParamsT<S> params;
    NspHeadT<S> nsp_head;
    std::vector<PretrainEpochStats> history;
    std::vector<PretrainExample> examples;  // the sampled corpus, for held-out reuse
};

using PretrainResult = PretrainResultT<float>;

// Forward + loss + backward for one pretraining example. Gradients accumulate
// scaled by `weight` (1/batch for training, 0-gradient path when grads null).
template <class S>
std::pair<S, S> pretrain_example_loss(const PretrainExample& ex, const EncoderParamsT<S>& params,
                                      const EncoderConfig& config, const NspHeadT<S>& nsp_head,
                                      S weight, EncoderParamsT<S>* grads,
                                      NspHeadT<S>* nsp_grads) {
    EncoderForwardCache<S> fwd;
    encoder_forward(ex.repr, params, config, fwd);
    Mat<S> d_hidden;
    Vec<S> d_cls;
    if (grads) {
        d_hidden = Mat<S>::Zero(fwd.real_length, config.hidden);
        d_cls = Vec<S>::Zero(config.hidden);
    }
    const S mlm = detail::mlm_loss(params, fwd, ex.target_positions, ex.target_ids, weight, grads,
                                   grads ? &d_hidden : nullptr);
    const S nsp = detail::nsp_loss(nsp_head, fwd.cls, ex.nsp_label, weight, nsp_grads,
                                   grads ? &d_cls : nullptr);
    if (grads) {
        encoder_backward(ex.repr, params, config, fwd, std::move(d_hidden), d_cls, *grads);
    }
    return {mlm, nsp};
}

template <class S = float>
PretrainResultT<S> pretrain(const std::vector<Document>& documents, const Vocab& vocab,
                            const EncoderConfig& config, const PretrainOptions& opt) {
    require(!documents.empty(), "pretrain: empty corpus");
    require(opt.batch_size >= 1, "pretrain: batch_size must be >= 1");
    require(opt.epochs >= 0, "pretrain: epochs must be >= 0");
    require(config.vocab_size == vocab.size(), "pretrain: config vocab_size ", config.vocab_size,
            " != vocab size ", vocab.size());

    PretrainResultT<S> result;
    result.params = init_encoder_params<S>(config, opt.seed);
    Rng init_rng(derive_seed(opt.seed, "nsp_head"));
    result.nsp_head.w = Vec<S>::Zero(config.hidden);
    for (Eigen::Index i = 0; i < config.hidden; ++i) {
        result.nsp_head.w(i) = static_cast<S>(init_rng.truncated_normal(0.02));
    }
    result.nsp_head.b = S(0);

    auto pairs = nsp_sample(documents, opt.n_pairs, opt.seed);
    Rng mask_rng(derive_seed(opt.seed, "mask"));
    result.examples =
        build_pretrain_examples(pairs, vocab, opt.max_seq_len, opt.mask_rate, mask_rng);
    require(!result.examples.empty(), "pretrain: no usable sentence pairs in the corpus");

    AdamOptimizer<S> adam({opt.learning_rate});
    Rng shuffle_rng(derive_seed(opt.seed, "shuffle"));
    std::vector<std::size_t> order(result.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        PretrainEpochStats stats;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            auto grads = zeros_like(result.params);
            NspHeadT<S> nsp_grads;
            nsp_grads.w = Vec<S>::Zero(config.hidden);
            nsp_grads.b = S(0);
            const S weight = S(1) / static_cast<S>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = result.examples[order[i]];
                auto [mlm, nsp] = pretrain_example_loss(ex, result.params, config, result.nsp_head,
                                                        weight, &grads, &nsp_grads);
                require(std::isfinite(static_cast<double>(mlm + nsp)),
                        "pretrain: non-finite loss at epoch ", epoch, ", example ", order[i]);
                stats.mlm_loss += static_cast<double>(mlm);
                stats.nsp_loss += static_cast<double>(nsp);
                ++seen;
            }
            auto spans = collect_spans<S>(result.params, grads);
            spans.push_back({result.nsp_head.w.data(), nsp_grads.w.data(),
                             static_cast<std::size_t>(result.nsp_head.w.size())});
            spans.push_back({&result.nsp_head.b, &nsp_grads.b, 1});
            adam.step(spans);
        }
        stats.mlm_loss /= static_cast<double>(seen);
        stats.nsp_loss /= static_cast<double>(seen);
        stats.total_loss = stats.mlm_loss + stats.nsp_loss;
        result.history.push_back(stats);
    }
    return result;
}

struct PretrainEval {
    double mlm_loss = 0;
    double mlm_accuracy = 0;  // argmax recovery rate over target positions
    double nsp_loss = 0;
    double nsp_accuracy = 0;
};

template <class S>
PretrainEval evaluate_pretrain(const std::vector<PretrainExample>& examples,
                               const EncoderParamsT<S>& params, const EncoderConfig& config,
                               const NspHeadT<S>& nsp_head) {
    PretrainEval ev;
    std::size_t n_targets = 0, n_hits = 0, n_nsp_hits = 0;
    double mlm_sum = 0, nsp_sum = 0;
    for (const auto& ex : examples) {
        EncoderForwardCache<S> fwd;
        encoder_forward(ex.repr, params, config, fwd);
        if (!ex.target_positions.empty()) {
            nn::LnCache<S> ln;
            const auto n = static_cast<Eigen::Index>(ex.target_positions.size());
            Mat<S> z(n, config.hidden);
            for (Eigen::Index t = 0; t < n; ++t) {
                z.row(t) = fwd.hidden.row(ex.target_positions[static_cast<std::size_t>(t)]);
            }
            Mat<S> z_norm = nn::layer_norm(z, params.mlm_norm_gain, params.mlm_norm_bias, ln);
            Mat<S> logits = z_norm * params.embeddings.token.transpose();
            logits.rowwise() += params.mlm_out_bias.transpose();
            for (Eigen::Index t = 0; t < n; ++t) {
                Eigen::Index argmax;
                logits.row(t).maxCoeff(&argmax);
                const int gold = ex.target_ids[static_cast<std::size_t>(t)];
                if (static_cast<int>(argmax) == gold) ++n_hits;
                const S max_logit = logits.row(t).maxCoeff();
                auto shifted = (logits.row(t).array() - max_logit).eval();
                mlm_sum += static_cast<double>(std::log(shifted.exp().sum()) - shifted(gold));
                ++n_targets;
            }
        }
        const S z = nsp_head.w.dot(fwd.cls) + nsp_head.b;
        nsp_sum += static_cast<double>((z > S(0) ? z : S(0)) +
                                       std::log1p(std::exp(-std::abs(z))) -
                                       static_cast<S>(ex.nsp_label) * z);
        if ((z > S(0)) == (ex.nsp_label == 1)) ++n_nsp_hits;
    }
    if (n_targets > 0) {
        ev.mlm_loss = mlm_sum / static_cast<double>(n_targets);
        ev.mlm_accuracy = static_cast<double>(n_hits) / static_cast<double>(n_targets);
    }
    if (!examples.empty()) {
        ev.nsp_loss = nsp_sum / static_cast<double>(examples.size());
        ev.nsp_accuracy = static_cast<double>(n_nsp_hits) / static_cast<double>(examples.size());
    }
    return ev;
}

}  // namespace absa
