// Classification heads, the two adaptation strategies, the Adam training
// loop, the 11-model single-sentence suite, and the hyperparameter grid.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absa/dataset.hpp"
#include "absa/encoder.hpp"
#include "absa/error.hpp"
#include "absa/input_repr.hpp"
#include "absa/optim.hpp"
#include "absa/parallel.hpp"
#include "absa/rng.hpp"
#include "absa/tokenizer.hpp"
#include "absa/transform.hpp"

namespace absa {

enum class AdaptationStrategy { feature_extraction, fine_tuning };

inline std::string to_string(AdaptationStrategy s) {
    return s == AdaptationStrategy::feature_extraction ? "feature-extraction" : "fine-tuning";
}

inline AdaptationStrategy strategy_from_string(const std::string& s) {
    if (s == "feature-extraction" || s == "feature_extraction") {
        return AdaptationStrategy::feature_extraction;
    }
    if (s == "fine-tuning" || s == "fine_tuning") return AdaptationStrategy::fine_tuning;
    fail("unknown adaptation strategy '", s,
         "' (expected feature-extraction or fine-tuning)");
}

struct Hyperparams {
    double learning_rate = 3e-5;
    int batch_size = 16;
    int epochs = 25;
    std::uint64_t seed = 1;

    void validate() const {
        require(learning_rate > 0, "hyperparams: learning_rate must be > 0");
        require(batch_size >= 1, "hyperparams: batch_size must be >= 1");
        require(epochs >= 0, "hyperparams: epochs must be >= 0");
    }
};

enum class HeadKind { multilabel_aspect, per_category_sentiment, pair_classifier };

inline std::string to_string(HeadKind k) {
    switch (k) {
        case HeadKind::multilabel_aspect: return "multilabel_aspect";
        case HeadKind::per_category_sentiment: return "per_category_sentiment";
        case HeadKind::pair_classifier: return "pair_classifier";
    }
    fail("unreachable head kind");
}

inline HeadKind head_kind_from_string(const std::string& s) {
    if (s == "multilabel_aspect") return HeadKind::multilabel_aspect;
    if (s == "per_category_sentiment") return HeadKind::per_category_sentiment;
    if (s == "pair_classifier") return HeadKind::pair_classifier;
    fail("unknown head kind '", s, "'");
}

template <class S>
struct HeadParamsT {
    HeadKind kind = HeadKind::pair_classifier;
    Mat<S> w;  // H x K
    Vec<S> b;  // K

    int outputs() const { return static_cast<int>(b.size()); }
};

using HeadParams = HeadParamsT<float>;

template <class S = float>
HeadParamsT<S> init_head(HeadKind kind, int hidden, int outputs, std::uint64_t seed) {
    require(outputs >= 1, "init_head: need at least one output, got ", outputs);
    Rng rng(derive_seed(seed, "head"));
    HeadParamsT<S> head;
    head.kind = kind;
    head.w.resize(hidden, outputs);
    for (int i = 0; i < hidden; ++i) {
        for (int j = 0; j < outputs; ++j) {
            head.w(i, j) = static_cast<S>(rng.truncated_normal(0.02));
        }
    }
    head.b = Vec<S>::Zero(outputs);
    return head;
}

namespace detail {

template <class S>
Vec<S> softmax_vec(const Vec<S>& z) {
    const S m = z.maxCoeff();
    Vec<S> e = (z.array() - m).exp();
    return e / e.sum();
}

inline constexpr double kProbClamp = 1e-12;

}  // namespace detail

// Affine map then sigmoid (multilabel) or softmax (sentiment/pair heads).
template <class S>
Vec<S> head_forward(const Vec<S>& cls, const HeadParamsT<S>& head) {
    require(head.w.rows() == cls.size(), "head_forward: cls size ", cls.size(),
            " does not match head input ", head.w.rows());
    Vec<S> z = head.w.transpose() * cls + head.b;
    if (head.kind == HeadKind::multilabel_aspect) {
        return z.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
    }
    return detail::softmax_vec(z);
}

// Mean binary cross-entropy over the K sigmoid outputs.
template <class S>
double compute_loss(const Vec<S>& scores, const std::vector<int>& gold_bits,
                    HeadKind kind) {
    require(kind == HeadKind::multilabel_aspect, "compute_loss: bit-vector gold requires the multilabel head");
    require(static_cast<Eigen::Index>(gold_bits.size()) == scores.size(),
            "compute_loss: gold has ", gold_bits.size(), " bits for ", scores.size(), " outputs");
    double total = 0;
    for (Eigen::Index k = 0; k < scores.size(); ++k) {
        const int y = gold_bits[static_cast<std::size_t>(k)];
        require(y == 0 || y == 1, "compute_loss: gold bit must be 0 or 1, got ", y);
        const double p = std::clamp(static_cast<double>(scores(k)), detail::kProbClamp,
                                    1.0 - detail::kProbClamp);
        total += y ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(scores.size());
}

// Categorical cross-entropy against a class index.
template <class S>
double compute_loss(const Vec<S>& scores, int gold, HeadKind kind) {
    require(kind != HeadKind::multilabel_aspect, "compute_loss: class-index gold requires a softmax head");
    require(gold >= 0 && gold < scores.size(), "compute_loss: gold class ", gold,
            " out of range for ", scores.size(), " outputs");
    const double p = std::clamp(static_cast<double>(scores(gold)), detail::kProbClamp, 1.0);
    return -std::log(p);
}

// One supervised example: softmax heads use `gold`, the multilabel head uses
// `multi_gold` (one bit per configured category).
struct ClsExample {
    InputRepresentation repr;
    int gold = -1;
    std::vector<int> multi_gold;
};

template <class S>
struct ClassifierModelT {
    EncoderConfig config;
    EncoderParamsT<S> encoder;
    HeadParamsT<S> head;
};

using ClassifierModel = ClassifierModelT<float>;

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_f1;   // classification-level micro F1 on the validation set
    std::vector<double> seconds;
};

namespace detail {

// Forward + loss (+ optional backward). Gradients accumulate scaled by
// `weight`; encoder gradients are skipped entirely when egrads is null
// (feature extraction).
template <class S>
S classifier_example_loss(const ClassifierModelT<S>& model, const ClsExample& ex, S weight,
                          EncoderParamsT<S>* egrads, HeadParamsT<S>* hgrads) {
    EncoderForwardCache<S> fwd;
    encoder_forward(ex.repr, model.encoder, model.config, fwd);
    Vec<S> z = model.head.w.transpose() * fwd.cls + model.head.b;
    const auto k = z.size();
    S loss;
    Vec<S> dz(k);
    if (model.head.kind == HeadKind::multilabel_aspect) {
        require(static_cast<Eigen::Index>(ex.multi_gold.size()) == k,
                "train: multilabel gold has ", ex.multi_gold.size(), " bits for ", k, " outputs");
        loss = S(0);
        for (Eigen::Index i = 0; i < k; ++i) {
            const S y = static_cast<S>(ex.multi_gold[static_cast<std::size_t>(i)]);
            const S zi = z(i);
            loss += (zi > S(0) ? zi : S(0)) + std::log1p(std::exp(-std::abs(zi))) - y * zi;
            dz(i) = (S(1) / (S(1) + std::exp(-zi)) - y) / static_cast<S>(k);
        }
        loss /= static_cast<S>(k);
    } else {
        require(ex.gold >= 0 && ex.gold < k, "train: gold class ", ex.gold,
                " out of range for ", k, " outputs");
        const S m = z.maxCoeff();
        Vec<S> shifted = z.array() - m;
        const S log_z = std::log(shifted.array().exp().sum());
        loss = log_z - shifted(ex.gold);
        dz = (shifted.array() - log_z).exp();
        dz(ex.gold) -= S(1);
    }
    if (hgrads) {
        dz *= weight;
        hgrads->w += fwd.cls * dz.transpose();
        hgrads->b += dz;
        if (egrads) {
            Vec<S> d_cls = model.head.w * dz;
            encoder_backward(ex.repr, model.encoder, model.config, fwd, Mat<S>(), d_cls, *egrads);
        }
    }
    return loss;
}

// Classification-level micro F1: bit-level for the multilabel head (0.5
// threshold), exact-match (accuracy) for softmax heads.
template <class S>
std::pair<double, double> classifier_eval(const ClassifierModelT<S>& model,
                                          const std::vector<ClsExample>& examples) {
    double loss_sum = 0;
    long tp = 0, fp = 0, fn = 0;
    for (const auto& ex : examples) {
        EncoderForwardCache<S> fwd;
        encoder_forward(ex.repr, model.encoder, model.config, fwd);
        Vec<S> scores = head_forward(fwd.cls, model.head);
        if (model.head.kind == HeadKind::multilabel_aspect) {
            loss_sum += compute_loss(scores, ex.multi_gold, model.head.kind);
            for (Eigen::Index i = 0; i < scores.size(); ++i) {
                const bool pred = scores(i) > S(0.5);
                const bool gold = ex.multi_gold[static_cast<std::size_t>(i)] == 1;
                if (pred && gold) ++tp;
                else if (pred) ++fp;
                else if (gold) ++fn;
            }
        } else {
            loss_sum += compute_loss(scores, ex.gold, model.head.kind);
            Eigen::Index argmax;
            scores.maxCoeff(&argmax);
            if (static_cast<int>(argmax) == ex.gold) ++tp;
            else { ++fp; ++fn; }
        }
    }
    const double n = static_cast<double>(examples.size());
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
    const double f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 1.0;
    return {examples.empty() ? 0.0 : loss_sum / n, f1};
}

}  // namespace detail

template <class S>
struct TrainResultT {
    ClassifierModelT<S> model;
    TrainHistory history;
};

// Minibatch Adam. Feature extraction keeps the encoder bit-identical and
// trains the head only; fine-tuning updates everything.
template <class S>
TrainResultT<S> train(const ClassifierModelT<S>& init, const std::vector<ClsExample>& dataset,
                      AdaptationStrategy strategy, const Hyperparams& hp,
                      const std::vector<ClsExample>* validation = nullptr) {
    hp.validate();
    init.config.validate();
    require(!dataset.empty(), "train: empty dataset");
    require(init.head.w.rows() == init.config.hidden, "train: head input width ",
            init.head.w.rows(), " != hidden ", init.config.hidden);

    TrainResultT<S> result{init, {}};
    const bool tune_encoder = strategy == AdaptationStrategy::fine_tuning;
    AdamOptimizer<S> adam({hp.learning_rate});
    Rng shuffle_rng(derive_seed(hp.seed, "shuffle"));
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const auto start_time = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(hp.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
            EncoderParamsT<S> egrads;
            if (tune_encoder) egrads = zeros_like(result.model.encoder);
            HeadParamsT<S> hgrads;
            hgrads.kind = init.head.kind;
            hgrads.w = Mat<S>::Zero(init.head.w.rows(), init.head.w.cols());
            hgrads.b = Vec<S>::Zero(init.head.b.size());
            const S weight = S(1) / static_cast<S>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const S loss = detail::classifier_example_loss(
                    result.model, dataset[order[i]], weight,
                    tune_encoder ? &egrads : nullptr, &hgrads);
                require(std::isfinite(static_cast<double>(loss)),
                        "train: non-finite loss at epoch ", epoch, ", example ", order[i],
                        " (learning_rate ", hp.learning_rate, ")");
                loss_sum += static_cast<double>(loss);
            }
            std::vector<TensorSpan<S>> spans;
            if (tune_encoder) spans = collect_spans<S>(result.model.encoder, egrads);
            spans.push_back({result.model.head.w.data(), hgrads.w.data(),
                             static_cast<std::size_t>(result.model.head.w.size())});
            spans.push_back({result.model.head.b.data(), hgrads.b.data(),
                             static_cast<std::size_t>(result.model.head.b.size())});
            adam.step(spans);
        }
        result.history.train_loss.push_back(loss_sum / static_cast<double>(dataset.size()));
        if (validation) {
            auto [vloss, vf1] = detail::classifier_eval(result.model, *validation);
            result.history.val_loss.push_back(vloss);
            result.history.val_f1.push_back(vf1);
        } else {
            result.history.val_loss.push_back(std::numeric_limits<double>::quiet_NaN());
            result.history.val_f1.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        result.history.seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
                .count());
    }
    return result;
}

// Batched scoring; output row order equals input order regardless of thread
// count.
template <class S>
Mat<S> predict(const ClassifierModelT<S>& model, const std::vector<ClsExample>& instances,
               unsigned n_threads = 1) {
    Mat<S> scores(static_cast<Eigen::Index>(instances.size()), model.head.outputs());
    parallel_for(instances.size(), n_threads, [&](std::size_t i) {
        EncoderForwardCache<S> fwd;
        encoder_forward(instances[i].repr, model.encoder, model.config, fwd);
        scores.row(static_cast<Eigen::Index>(i)) =
            head_forward(fwd.cls, model.head).transpose();
    });
    return scores;
}

// ---- sentence-pair task plumbing ----

inline int pair_head_outputs(TransformMethod method) { return is_binary_method(method) ? 2 : 3; }

// PairInstance -> supervised example. B-method labels are already 0/1 class
// indices; M-method labels are AuxLabel indices.
inline std::vector<ClsExample> build_pair_examples(const std::vector<PairInstance>& pairs,
                                                   const Vocab& vocab, int max_seq_len) {
    TokenizerOptions topt;
    std::vector<ClsExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        ClsExample ex;
        const auto a = tokenize(p.text_a, vocab, topt);
        const auto b = tokenize(p.text_b, vocab, topt);
        require(!a.empty(), "pair instance ", p.review_id, "/", p.category,
                ": auxiliary sentence tokenizes to nothing");
        ex.repr = encode_pair(a, b, vocab, max_seq_len);
        ex.gold = p.label;
        out.push_back(std::move(ex));
    }
    return out;
}

// Reassembles per-review PairScores from model outputs, one row per instance.
// B-methods store P(label=1) at the slot of the instance's auxiliary
// polarity; M-methods store the full 3-class distribution.
template <class S>
std::map<std::string, PairScores> pair_scores_from_predictions(
    const std::vector<PairInstance>& pairs, const Mat<S>& scores, TransformMethod method) {
    require(scores.rows() == static_cast<Eigen::Index>(pairs.size()),
            "pair_scores_from_predictions: ", scores.rows(), " score rows for ", pairs.size(),
            " instances");
    const double kUnset = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, PairScores> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        auto& ps = out[p.review_id];
        auto it = ps.by_category.find(p.category);
        if (it == ps.by_category.end()) {
            it = ps.by_category.emplace(p.category, std::array<double, 3>{kUnset, kUnset, kUnset})
                     .first;
        }
        const auto row = static_cast<Eigen::Index>(i);
        if (is_binary_method(method)) {
            require(scores.cols() == 2, "pair_scores_from_predictions: binary method expects 2 columns");
            require(p.aux_polarity.has_value(), "pair_scores_from_predictions: instance ",
                    p.review_id, "/", p.category, " lacks an auxiliary polarity");
            it->second[static_cast<std::size_t>(*p.aux_polarity)] =
                static_cast<double>(scores(row, 1));
        } else {
            require(scores.cols() == 3, "pair_scores_from_predictions: 3-class method expects 3 columns");
            for (int c = 0; c < 3; ++c) {
                it->second[static_cast<std::size_t>(c)] = static_cast<double>(scores(row, c));
            }
        }
    }
    return out;
}

// ---- single-sentence 11-model suite ----

struct SuiteConfig {
    CategoryConfig categories;
    EncoderConfig encoder;
    int max_seq_len = 48;
    double aspect_threshold = 0.5;
};

template <class S>
struct SingleSentenceSuiteT {
    SuiteConfig config;
    ClassifierModelT<S> aspect;
    std::map<std::string, ClassifierModelT<S>> sentiment;
    std::vector<std::string> skipped;  // categories with no training reviews
};

using SingleSentenceSuite = SingleSentenceSuiteT<float>;

inline ClsExample make_single_example(const Review& review, const Vocab& vocab,
                                      const CategoryConfig& config, int max_seq_len) {
    TokenizerOptions topt;
    ClsExample ex;
    auto tokens = tokenize(review.text, vocab, topt);
    if (tokens.empty()) {
        tokens.push_back({std::string(kUnkToken), vocab.unk_id, false});
    }
    ex.repr = encode_single(tokens, vocab, max_seq_len);
    ex.multi_gold.reserve(config.categories.size());
    for (const auto& cat : config.categories) {
        ex.multi_gold.push_back(review.has_category(cat) ? 1 : 0);
    }
    return ex;
}

// One multilabel aspect model plus one 2-class sentiment model per category
// with data: |categories| + 1 models in the full case.
template <class S>
SingleSentenceSuiteT<S> train_single_sentence_suite(const std::vector<Review>& reviews,
                                                    const Vocab& vocab, const SuiteConfig& sc,
                                                    const EncoderParamsT<S>& encoder_init,
                                                    AdaptationStrategy strategy,
                                                    const Hyperparams& hp) {
    sc.categories.validate();
    require(!reviews.empty(), "train_single_sentence_suite: no reviews");
    SingleSentenceSuiteT<S> suite;
    suite.config = sc;

    std::vector<ClsExample> aspect_examples;
    aspect_examples.reserve(reviews.size());
    for (const auto& r : reviews) {
        aspect_examples.push_back(make_single_example(r, vocab, sc.categories, sc.max_seq_len));
    }
    ClassifierModelT<S> aspect_init{
        sc.encoder, encoder_init,
        init_head<S>(HeadKind::multilabel_aspect, sc.encoder.hidden,
                     static_cast<int>(sc.categories.categories.size()),
                     derive_seed(hp.seed, "aspect"))};
    Hyperparams aspect_hp = hp;
    aspect_hp.seed = derive_seed(hp.seed, "aspect");
    suite.aspect = train(aspect_init, aspect_examples, strategy, aspect_hp).model;

    for (std::size_t ci = 0; ci < sc.categories.categories.size(); ++ci) {
        const auto& cat = sc.categories.categories[ci];
        std::vector<ClsExample> examples;
        for (std::size_t ri = 0; ri < reviews.size(); ++ri) {
            const auto pol = reviews[ri].polarity_of(cat);
            if (!pol) continue;
            ClsExample ex;
            ex.repr = aspect_examples[ri].repr;
            ex.gold = static_cast<int>(*pol);
            examples.push_back(std::move(ex));
        }
        if (examples.empty()) {
            suite.skipped.push_back(cat);
            continue;
        }
        ClassifierModelT<S> init{
            sc.encoder, encoder_init,
            init_head<S>(HeadKind::per_category_sentiment, sc.encoder.hidden, 2,
                         derive_seed(hp.seed, "sentiment:" + cat))};
        Hyperparams cat_hp = hp;
        cat_hp.seed = derive_seed(hp.seed, "sentiment:" + cat);
        suite.sentiment.emplace(cat, train(init, examples, strategy, cat_hp).model);
    }
    return suite;
}

// Composed prediction: categories whose aspect score clears the threshold get
// their sentiment model's argmax polarity. Categories without a sentiment
// model are omitted.
template <class S>
std::map<std::string, GoldSet> suite_predict(const SingleSentenceSuiteT<S>& suite,
                                             const std::vector<Review>& reviews,
                                             const Vocab& vocab, unsigned n_threads = 1) {
    std::vector<GoldSet> slots(reviews.size());
    parallel_for(reviews.size(), n_threads, [&](std::size_t i) {
        const ClsExample ex =
            make_single_example(reviews[i], vocab, suite.config.categories, suite.config.max_seq_len);
        EncoderForwardCache<S> fwd;
        encoder_forward(ex.repr, suite.aspect.encoder, suite.aspect.config, fwd);
        Vec<S> aspect_scores = head_forward(fwd.cls, suite.aspect.head);
        for (std::size_t ci = 0; ci < suite.config.categories.categories.size(); ++ci) {
            if (static_cast<double>(aspect_scores(static_cast<Eigen::Index>(ci))) <=
                suite.config.aspect_threshold) {
                continue;
            }
            const auto& cat = suite.config.categories.categories[ci];
            auto it = suite.sentiment.find(cat);
            if (it == suite.sentiment.end()) continue;
            EncoderForwardCache<S> sfwd;
            encoder_forward(ex.repr, it->second.encoder, it->second.config, sfwd);
            Vec<S> sent = head_forward(sfwd.cls, it->second.head);
            Eigen::Index argmax;
            sent.maxCoeff(&argmax);
            slots[i].insert({cat, static_cast<Polarity>(argmax)});
        }
    });
    std::map<std::string, GoldSet> out;
    for (std::size_t i = 0; i < reviews.size(); ++i) out[reviews[i].id] = std::move(slots[i]);
    return out;
}

// ---- grid search ----

struct GridSpec {
    std::vector<double> learning_rates;
    std::vector<int> batch_sizes;
};

struct GridRow {
    double learning_rate = 0;
    int batch_size = 0;
    double f1 = 0;
    bool diverged = false;
};

struct GridResult {
    std::vector<GridRow> rows;       // learning-rate-major order of the spec
    std::size_t best_index = 0;
};

// Runs evaluate(hp) for every combination. A combination that aborts (e.g.
// divergent learning rate -> non-finite loss) scores 0 and is flagged. Ties
// break toward the smaller learning rate, then the larger batch size.
inline GridResult grid_search(const GridSpec& grid, const Hyperparams& base,
                              const std::function<double(const Hyperparams&)>& evaluate,
                              unsigned n_threads = 1) {
    require(!grid.learning_rates.empty() && !grid.batch_sizes.empty(),
            "grid_search: empty grid");
    GridResult result;
    for (double lr : grid.learning_rates) {
        for (int bs : grid.batch_sizes) {
            result.rows.push_back({lr, bs, 0.0, false});
        }
    }
    parallel_for(result.rows.size(), n_threads, [&](std::size_t i) {
        Hyperparams hp = base;
        hp.learning_rate = result.rows[i].learning_rate;
        hp.batch_size = result.rows[i].batch_size;
        try {
            result.rows[i].f1 = evaluate(hp);
        } catch (const Error&) {
            result.rows[i].f1 = 0.0;
            result.rows[i].diverged = true;
        }
    });
    auto better = [](const GridRow& a, const GridRow& b) {
        if (a.f1 != b.f1) return a.f1 > b.f1;
        if (a.learning_rate != b.learning_rate) return a.learning_rate < b.learning_rate;
        return a.batch_size > b.batch_size;
    };
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (better(result.rows[i], result.rows[result.best_index])) result.best_index = i;
    }
    return result;
}

}  // namespace absa
