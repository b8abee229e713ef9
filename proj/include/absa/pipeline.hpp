// End-to-end plumbing shared by the CLI and the experiment harness: review
// splitting + pair expansion, model-level F1 on held-out reviews, sentence
// splitting for pretraining corpora, and model checkpoints with head
// metadata.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absa/checkpoint.hpp"
#include "absa/dataset.hpp"
#include "absa/encoder.hpp"
#include "absa/eval.hpp"
#include "absa/pretrain.hpp"
#include "absa/tokenizer.hpp"
#include "absa/training.hpp"
#include "absa/transform.hpp"

namespace absa {

// Sentence segmentation for pretraining documents: split on ./!/?, trim.
inline std::vector<std::string> split_sentences(const std::string& text) {
    auto trim = [](const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    };
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            const std::string piece = trim(current);
            if (!piece.empty()) out.push_back(piece);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    const std::string piece = trim(current);
    if (!piece.empty()) out.push_back(piece);
    return out;
}

inline std::vector<Document> documents_from_reviews(const std::vector<Review>& reviews) {
    std::vector<Document> docs;
    docs.reserve(reviews.size());
    for (const auto& r : reviews) docs.push_back(split_sentences(r.text));
    return docs;
}

inline std::map<std::string, GoldSet> gold_sets(const std::vector<Review>& reviews) {
    std::map<std::string, GoldSet> out;
    for (const auto& r : reviews) out[r.id] = r.gold;
    return out;
}

// Reviews are split before pair expansion so no review contributes instances
// to both sides.
struct PairTask {
    TransformMethod method = TransformMethod::nli_b;
    CategoryConfig categories;
    std::vector<Review> train_reviews, val_reviews;
    std::vector<PairInstance> train_pairs, val_pairs;
    std::vector<ClsExample> train_examples, val_examples;
    std::map<std::string, GoldSet> val_gold;
};

inline PairTask build_pair_task(const std::vector<Review>& reviews, const Vocab& vocab,
                                const CategoryConfig& categories, TransformMethod method,
                                double train_fraction, std::uint64_t seed, int max_seq_len,
                                const TransformOptions& topts = {}) {
    PairTask task;
    task.method = method;
    task.categories = categories;
    auto split = split_dataset(reviews, train_fraction, seed);
    task.train_reviews = std::move(split.train);
    task.val_reviews = std::move(split.validation);
    task.train_pairs = transform_dataset(task.train_reviews, categories, method, topts);
    task.val_pairs = transform_dataset(task.val_reviews, categories, method, topts);
    task.train_examples = build_pair_examples(task.train_pairs, vocab, max_seq_len);
    task.val_examples = build_pair_examples(task.val_pairs, vocab, max_seq_len);
    task.val_gold = gold_sets(task.val_reviews);
    return task;
}

// ABSA-level micro F1 of a pair model: score the expanded instances,
// reassemble per-review scores, apply the inverse decision rule, compare
// against review gold.
template <class S>
EvalReport evaluate_pair_model(const ClassifierModelT<S>& model,
                               const std::vector<PairInstance>& pairs,
                               const std::vector<ClsExample>& examples,
                               const std::map<std::string, GoldSet>& gold,
                               TransformMethod method, const CategoryConfig& categories,
                               unsigned n_threads = 1) {
    require(pairs.size() == examples.size(), "evaluate_pair_model: ", pairs.size(),
            " pairs but ", examples.size(), " examples");
    Mat<S> scores = predict(model, examples, n_threads);
    auto per_review = pair_scores_from_predictions(pairs, scores, method);
    std::map<std::string, GoldSet> predictions;
    for (const auto& [id, _] : gold) {
        auto it = per_review.find(id);
        require(it != per_review.end(), "evaluate_pair_model: no instances for review ", id);
        predictions[id] = aggregate_predictions(it->second, method, categories);
    }
    return f1_scores(predictions, gold);
}

template <class S>
EvalReport evaluate_suite(const SingleSentenceSuiteT<S>& suite,
                          const std::vector<Review>& reviews, const Vocab& vocab,
                          unsigned n_threads = 1) {
    auto predictions = suite_predict(suite, reviews, vocab, n_threads);
    return f1_scores(predictions, gold_sets(reviews));
}

// ---- model checkpoints (encoder tensors + head tensors + head metadata) ----

inline Checkpoint checkpoint_from_model(const ClassifierModel& model) {
    Checkpoint ckpt = checkpoint_from_params(model.encoder, model.config);
    NamedTensor w;
    w.dims = {static_cast<std::uint64_t>(model.head.w.rows()),
              static_cast<std::uint64_t>(model.head.w.cols())};
    w.data.assign(model.head.w.data(), model.head.w.data() + model.head.w.size());
    ckpt.tensors.emplace("head.w", std::move(w));
    NamedTensor b;
    b.dims = {static_cast<std::uint64_t>(model.head.b.size())};
    b.data.assign(model.head.b.data(), model.head.b.data() + model.head.b.size());
    ckpt.tensors.emplace("head.b", std::move(b));
    ckpt.meta["head"] = {{"kind", to_string(model.head.kind)},
                         {"outputs", model.head.outputs()}};
    return ckpt;
}

inline ClassifierModel model_from_checkpoint(const Checkpoint& ckpt) {
    ClassifierModel model;
    model.config = ckpt.config;
    model.encoder = params_from_checkpoint(ckpt);
    require(ckpt.meta.contains("head"), "checkpoint: no head metadata; not a classifier checkpoint");
    model.head.kind = head_kind_from_string(ckpt.meta.at("head").at("kind").get<std::string>());
    const int outputs = ckpt.meta.at("head").at("outputs").get<int>();
    auto wit = ckpt.tensors.find("head.w");
    auto bit = ckpt.tensors.find("head.b");
    require(wit != ckpt.tensors.end() && bit != ckpt.tensors.end(),
            "checkpoint: missing head tensors");
    const auto& wt = wit->second;
    const auto& bt = bit->second;
    require(wt.dims.size() == 2 && wt.dims[0] == static_cast<std::uint64_t>(model.config.hidden) &&
                wt.dims[1] == static_cast<std::uint64_t>(outputs),
            "checkpoint: tensor 'head.w' shape mismatch");
    require(bt.dims.size() == 1 && bt.dims[0] == static_cast<std::uint64_t>(outputs),
            "checkpoint: tensor 'head.b' shape mismatch");
    model.head.w.resize(model.config.hidden, outputs);
    std::copy(wt.data.begin(), wt.data.end(), model.head.w.data());
    model.head.b.resize(outputs);
    std::copy(bt.data.begin(), bt.data.end(), model.head.b.data());
    return model;
}

inline Checkpoint checkpoint_from_pretrain(const PretrainResult& result,
                                           const EncoderConfig& config) {
    Checkpoint ckpt = checkpoint_from_params(result.params, config);
    NamedTensor w;
    w.dims = {static_cast<std::uint64_t>(result.nsp_head.w.size())};
    w.data.assign(result.nsp_head.w.data(), result.nsp_head.w.data() + result.nsp_head.w.size());
    ckpt.tensors.emplace("nsp.w", std::move(w));
    NamedTensor b;
    b.dims = {1};
    b.data = {result.nsp_head.b};
    ckpt.tensors.emplace("nsp.b", std::move(b));
    return ckpt;
}

}  // namespace absa
