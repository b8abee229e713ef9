// ABSA domain types: reviews with gold (category, polarity) sets, the
// sentence-pair instances derived from them, and the JSON-lines file formats
// for both.
#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "absa/error.hpp"

namespace absa {

enum class Polarity { positive, negative };

enum class AuxLabel { positive, negative, none };

enum class TransformMethod { nli_b, nli_m, qa_b, qa_m };

inline bool is_binary_method(TransformMethod m) {
    return m == TransformMethod::nli_b || m == TransformMethod::qa_b;
}

inline std::string to_string(Polarity p) {
    return p == Polarity::positive ? "positive" : "negative";
}

inline std::string to_string(AuxLabel l) {
    switch (l) {
        case AuxLabel::positive: return "positive";
        case AuxLabel::negative: return "negative";
        default: return "none";
    }
}

inline std::string to_string(TransformMethod m) {
    switch (m) {
        case TransformMethod::nli_b: return "nli-b";
        case TransformMethod::nli_m: return "nli-m";
        case TransformMethod::qa_b: return "qa-b";
        default: return "qa-m";
    }
}

inline Polarity polarity_from_string(const std::string& s) {
    if (s == "positive") return Polarity::positive;
    if (s == "negative") return Polarity::negative;
    fail("unknown polarity \"", s, "\" (expected positive|negative)");
}

inline AuxLabel aux_label_from_string(const std::string& s) {
    if (s == "positive") return AuxLabel::positive;
    if (s == "negative") return AuxLabel::negative;
    if (s == "none") return AuxLabel::none;
    fail("unknown label \"", s, "\" (expected positive|negative|none)");
}

inline TransformMethod method_from_string(const std::string& s) {
    if (s == "nli-b") return TransformMethod::nli_b;
    if (s == "nli-m") return TransformMethod::nli_m;
    if (s == "qa-b") return TransformMethod::qa_b;
    if (s == "qa-m") return TransformMethod::qa_m;
    fail("unknown method \"", s, "\" (expected nli-b|nli-m|qa-b|qa-m)");
}

inline AuxLabel to_aux_label(Polarity p) {
    return p == Polarity::positive ? AuxLabel::positive : AuxLabel::negative;
}

using GoldPair = std::pair<std::string, Polarity>;
using GoldSet = std::set<GoldPair>;

struct Review {
    std::string id;
    std::string text;
    GoldSet gold;

    bool has_category(const std::string& category) const {
        return polarity_of(category).has_value();
    }

    std::optional<Polarity> polarity_of(const std::string& category) const {
        for (const auto& [cat, pol] : gold) {
            if (cat == category) return pol;
        }
        return std::nullopt;
    }
};

struct CategoryConfig {
    std::vector<std::string> categories;

    bool contains(const std::string& category) const {
        return std::find(categories.begin(), categories.end(), category) != categories.end();
    }

    void validate() const {
        require(!categories.empty(), "category config: empty category list");
        std::set<std::string> seen;
        for (const auto& c : categories) {
            require(!c.empty(), "category config: empty category name");
            require(seen.insert(c).second, "category config: duplicate category \"", c, "\"");
        }
    }
};

// One sentence-pair training instance. label is 0/1 for B-methods and an
// AuxLabel index (positive=0, negative=1, none=2) for M-methods.
struct PairInstance {
    std::string text_a;
    std::string text_b;
    int label = 0;
    std::string review_id;
    std::string category;
    std::optional<AuxLabel> aux_polarity;  // set for B-methods only
};

inline void validate_review(const Review& r, const CategoryConfig& config) {
    std::set<std::string> cats;
    for (const auto& [cat, pol] : r.gold) {
        (void)pol;
        require(cats.insert(cat).second, "review ", r.id, ": category \"", cat,
                "\" labeled with more than one polarity");
        require(config.contains(cat), "review ", r.id, ": category \"", cat,
                "\" not in the configured category list");
    }
}

// ---- JSON-lines formats -------------------------------------------------

inline nlohmann::json review_to_json(const Review& r) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& [cat, pol] : r.gold) {
        labels.push_back({{"category", cat}, {"polarity", to_string(pol)}});
    }
    return {{"id", r.id}, {"text", r.text}, {"labels", labels}};
}

inline Review review_from_json(const nlohmann::json& j) {
    Review r;
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    for (const auto& lab : j.at("labels")) {
        r.gold.emplace(lab.at("category").get<std::string>(),
                       polarity_from_string(lab.at("polarity").get<std::string>()));
    }
    return r;
}

inline std::vector<Review> load_reviews(std::istream& in, const char* source = "dataset") {
    std::vector<Review> reviews;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        require(!j.is_discarded(), source, ": malformed JSON at line ", line_no);
        try {
            reviews.push_back(review_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            fail(source, ": invalid review at line ", line_no, ": ", e.what());
        }
    }
    return reviews;
}

inline std::vector<Review> load_reviews_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "dataset: cannot open ", path);
    return load_reviews(in, path.c_str());
}

inline void save_reviews(std::ostream& out, const std::vector<Review>& reviews) {
    for (const auto& r : reviews) out << review_to_json(r).dump() << "\n";
}

inline nlohmann::json pair_to_json(const PairInstance& p) {
    nlohmann::json j{{"text_a", p.text_a}, {"text_b", p.text_b},
                     {"review_id", p.review_id}, {"category", p.category}};
    if (p.aux_polarity) {
        j["label"] = p.label;
        j["aux_polarity"] = to_string(*p.aux_polarity);
    } else {
        j["label"] = to_string(static_cast<AuxLabel>(p.label));
    }
    return j;
}

inline PairInstance pair_from_json(const nlohmann::json& j) {
    PairInstance p;
    p.text_a = j.at("text_a").get<std::string>();
    p.text_b = j.at("text_b").get<std::string>();
    p.review_id = j.at("review_id").get<std::string>();
    p.category = j.at("category").get<std::string>();
    if (j.contains("aux_polarity")) {
        p.aux_polarity = aux_label_from_string(j.at("aux_polarity").get<std::string>());
        p.label = j.at("label").get<int>();
        require(p.label == 0 || p.label == 1, "pair instance: binary label must be 0 or 1");
    } else {
        p.label = static_cast<int>(aux_label_from_string(j.at("label").get<std::string>()));
    }
    return p;
}

inline std::vector<PairInstance> load_pairs_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "pairs: cannot open ", path);
    std::vector<PairInstance> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        require(!j.is_discarded(), path, ": malformed JSON at line ", line_no);
        try {
            pairs.push_back(pair_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            fail(path, ": invalid pair instance at line ", line_no, ": ", e.what());
        }
    }
    return pairs;
}

// Category config file: one category per line, '#' comments allowed.
inline CategoryConfig load_categories(std::istream& in) {
    CategoryConfig config;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        config.categories.push_back(line.substr(start));
    }
    config.validate();
    return config;
}

inline CategoryConfig load_categories_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "categories: cannot open ", path);
    return load_categories(in);
}

}  // namespace absa
