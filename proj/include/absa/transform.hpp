// Task transformation between the single-sentence and sentence-pair
// formulations of ABSA: auxiliary-sentence construction, dataset expansion,
// per-category grouping, the inverse decision rule that maps pair scores back
// to (category, polarity) sets, and deterministic train/validation splits.
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "absa/dataset.hpp"
#include "absa/error.hpp"
#include "absa/rng.hpp"

namespace absa {

// Auxiliary-sentence templates. The NLI forms are fixed hyphenated
// pseudo-sentences; the QA forms are plain question templates with
// <category> / <polarity> placeholders and carry no authority beyond being a
// reasonable question shape.
struct TransformOptions {
    std::string qa_m_template = "bagaimana pendapat tentang <category> ?";
    std::string qa_b_template = "apakah pendapat tentang <category> <polarity> ?";
};

inline std::string polarity_word(AuxLabel l) {
    switch (l) {
        case AuxLabel::positive: return "positif";
        case AuxLabel::negative: return "negatif";
        default: return "none";
    }
}

namespace detail {

inline std::string substitute(std::string templ, std::string_view key, const std::string& value) {
    auto pos = templ.find(key);
    require(pos != std::string::npos, "transform: template \"", templ,
            "\" is missing placeholder ", key);
    templ.replace(pos, key.size(), value);
    return templ;
}

}  // namespace detail

inline std::string build_aux_sentence(const std::string& category,
                                      std::optional<AuxLabel> polarity, TransformMethod method,
                                      const CategoryConfig& config,
                                      const TransformOptions& opts = {}) {
    require(config.contains(category), "transform: unknown category \"", category, "\"");
    if (is_binary_method(method)) {
        require(polarity.has_value(), "transform: B-method requires a polarity for category \"",
                category, "\"");
        if (method == TransformMethod::nli_b) {
            return category + "-" + polarity_word(*polarity);
        }
        return detail::substitute(
            detail::substitute(opts.qa_b_template, "<category>", category), "<polarity>",
            polarity_word(*polarity));
    }
    require(!polarity.has_value(), "transform: polarity given for M-method on category \"",
            category, "\"");
    if (method == TransformMethod::nli_m) return category;
    return detail::substitute(opts.qa_m_template, "<category>", category);
}

inline constexpr std::array<AuxLabel, 3> kAuxLabelOrder = {AuxLabel::positive, AuxLabel::negative,
                                                           AuxLabel::none};

// Expands reviews into pair instances. B-methods produce one instance per
// (review, category, polarity) with a 0/1 label; M-methods one per
// (review, category) labeled with the gold polarity or none. Output order is
// review, then category, then positive/negative/none.
inline std::vector<PairInstance> transform_dataset(const std::vector<Review>& reviews,
                                                   const CategoryConfig& config,
                                                   TransformMethod method,
                                                   const TransformOptions& opts = {}) {
    config.validate();
    std::vector<PairInstance> out;
    const bool binary = is_binary_method(method);
    out.reserve(reviews.size() * config.categories.size() * (binary ? 3 : 1));
    for (const Review& review : reviews) {
        validate_review(review, config);
        for (const std::string& category : config.categories) {
            auto gold_polarity = review.polarity_of(category);
            if (binary) {
                for (AuxLabel aux : kAuxLabelOrder) {
                    PairInstance p;
                    p.text_a = build_aux_sentence(category, aux, method, config, opts);
                    p.text_b = review.text;
                    p.review_id = review.id;
                    p.category = category;
                    p.aux_polarity = aux;
                    bool match = gold_polarity ? aux == to_aux_label(*gold_polarity)
                                               : aux == AuxLabel::none;
                    p.label = match ? 1 : 0;
                    out.push_back(std::move(p));
                }
            } else {
                PairInstance p;
                p.text_a = build_aux_sentence(category, std::nullopt, method, config, opts);
                p.text_b = review.text;
                p.review_id = review.id;
                p.category = category;
                p.label = static_cast<int>(gold_polarity ? to_aux_label(*gold_polarity)
                                                         : AuxLabel::none);
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

// Per-category sentiment datasets for the single-sentence approach: a review
// appears under a category iff its gold set labels that category.
inline std::map<std::string, std::vector<std::pair<std::string, Polarity>>> group_by_category(
    const std::vector<Review>& reviews, const CategoryConfig& config) {
    config.validate();
    std::map<std::string, std::vector<std::pair<std::string, Polarity>>> groups;
    for (const std::string& category : config.categories) groups[category];
    for (const Review& review : reviews) {
        validate_review(review, config);
        for (const auto& [category, polarity] : review.gold) {
            groups[category].emplace_back(review.text, polarity);
        }
    }
    return groups;
}

// Per-review scores for the inverse decision rule. For B-methods,
// by_category[c][i] is the probability of label 1 for the auxiliary sentence
// (c, kAuxLabelOrder[i]); for M-methods it is the class distribution over
// (positive, negative, none).
struct PairScores {
    std::map<std::string, std::array<double, 3>> by_category;
};

// Maps per-category scores back to a (category, polarity) set: argmax per
// category, categories whose argmax is `none` are omitted, ties broken in
// the fixed order none > negative > positive.
inline GoldSet aggregate_predictions(const PairScores& scores, TransformMethod method,
                                     const CategoryConfig& config) {
    config.validate();
    GoldSet out;
    for (const std::string& category : config.categories) {
        auto it = scores.by_category.find(category);
        require(it != scores.by_category.end(), "aggregate: missing scores for (", category,
                ", *)");
        const auto& s = it->second;
        for (int i = 0; i < 3; ++i) {
            require(std::isfinite(s[static_cast<std::size_t>(i)]), "aggregate: non-finite score for (",
                    category, ", ", to_string(kAuxLabelOrder[static_cast<std::size_t>(i)]), ")");
        }
        if (!is_binary_method(method)) {
            double sum = s[0] + s[1] + s[2];
            require(std::abs(sum - 1.0) <= 1e-6, "aggregate: distribution for \"", category,
                    "\" sums to ", sum, ", expected 1");
        }
        // Indices in kAuxLabelOrder: positive=0, negative=1, none=2. Scan in
        // tie-break priority none > negative > positive.
        int best = 2;
        for (int idx : {1, 0}) {
            if (s[static_cast<std::size_t>(idx)] > s[static_cast<std::size_t>(best)]) best = idx;
        }
        if (best == 0) out.emplace(category, Polarity::positive);
        else if (best == 1) out.emplace(category, Polarity::negative);
    }
    return out;
}

// Ideal scores for a gold set: probability 1 on the matching label row. Used
// by the round-trip identity (transform -> perfect model -> aggregate).
inline PairScores ideal_scores(const Review& review, TransformMethod method,
                               const CategoryConfig& config) {
    PairScores scores;
    for (const std::string& category : config.categories) {
        auto gold = review.polarity_of(category);
        AuxLabel truth = gold ? to_aux_label(*gold) : AuxLabel::none;
        std::array<double, 3> s{0.0, 0.0, 0.0};
        s[static_cast<std::size_t>(truth)] = 1.0;
        (void)method;  // identical shape for B and M ideal scores
        scores.by_category[category] = s;
    }
    return scores;
}

template <class T>
struct Split {
    std::vector<T> train;
    std::vector<T> validation;
};

// Deterministic shuffled split; |train| = round(fraction * n).
template <class T>
Split<T> split_dataset(const std::vector<T>& items, double train_fraction, std::uint64_t seed) {
    require(train_fraction > 0.0 && train_fraction < 1.0,
            "split: train fraction must be in (0, 1), got ", train_fraction);
    require(items.size() >= 2, "split: need at least 2 items, got ", items.size());
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(items.size())));
    Split<T> split;
    split.train.reserve(n_train);
    split.validation.reserve(items.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? split.train : split.validation).push_back(items[order[i]]);
    }
    return split;
}

// Split for expanded pair data: groups by review_id so no review straddles
// the boundary. The fraction applies to review groups.
inline Split<PairInstance> split_pairs_grouped(const std::vector<PairInstance>& pairs,
                                               double train_fraction, std::uint64_t seed) {
    require(train_fraction > 0.0 && train_fraction < 1.0,
            "split: train fraction must be in (0, 1), got ", train_fraction);
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<const PairInstance*>> groups;
    for (const auto& p : pairs) {
        auto [it, inserted] = groups.try_emplace(p.review_id);
        if (inserted) group_order.push_back(p.review_id);
        it->second.push_back(&p);
    }
    require(group_order.size() >= 2, "split: need at least 2 review groups, got ",
            group_order.size());
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(group_order);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(group_order.size())));
    Split<PairInstance> split;
    for (std::size_t i = 0; i < group_order.size(); ++i) {
        auto& dst = i < n_train ? split.train : split.validation;
        for (const PairInstance* p : groups[group_order[i]]) dst.push_back(*p);
    }
    return split;
}

}  // namespace absa
