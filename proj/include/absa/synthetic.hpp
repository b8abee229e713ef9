// Deterministic synthetic review generator. Reviews are built from clause
// templates "<keyword> <cue>" where the keyword selects the aspect category
// and the cue selects the polarity, so gold labels are correct by
// construction. Cue words are shared between categories on purpose: a model
// has to bind a cue to the right keyword instead of keying on cue presence.
#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "absa/dataset.hpp"
#include "absa/error.hpp"
#include "absa/rng.hpp"
#include "absa/tokenizer.hpp"

namespace absa {

struct LexiconEntry {
    std::vector<std::string> keywords;
    std::vector<std::string> positive_cues;
    std::vector<std::string> negative_cues;
};

using Lexicon = std::map<std::string, LexiconEntry>;

struct SyntheticOptions {
    double include_probability = 0.35;  // chance each category appears in a review
    double positive_probability = 0.5;  // polarity mix among appearing categories
};

inline void validate_lexicon(const Lexicon& lexicon, const CategoryConfig& config) {
    for (const std::string& category : config.categories) {
        auto it = lexicon.find(category);
        require(it != lexicon.end(), "lexicon: no entry for category \"", category, "\"");
        const LexiconEntry& e = it->second;
        require(!e.keywords.empty(), "lexicon: category \"", category, "\" has no keywords");
        require(!e.positive_cues.empty(), "lexicon: category \"", category,
                "\" has no positive cues");
        require(!e.negative_cues.empty(), "lexicon: category \"", category,
                "\" has no negative cues");
    }
}

inline std::vector<Review> generate_synthetic_reviews(std::uint64_t seed, std::size_t n,
                                                      const CategoryConfig& config,
                                                      const Lexicon& lexicon,
                                                      const SyntheticOptions& opts = {}) {
    config.validate();
    validate_lexicon(lexicon, config);
    Rng rng(derive_seed(seed, "synthetic"));
    std::vector<Review> reviews;
    reviews.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Review review;
        review.id = "r" + std::to_string(i);
        std::vector<std::string> clauses;
        for (const std::string& category : config.categories) {
            if (!rng.bernoulli(opts.include_probability)) continue;
            const LexiconEntry& e = lexicon.at(category);
            bool positive = rng.bernoulli(opts.positive_probability);
            const auto& cues = positive ? e.positive_cues : e.negative_cues;
            const std::string& keyword =
                e.keywords[rng.uniform_below(e.keywords.size())];
            const std::string& cue = cues[rng.uniform_below(cues.size())];
            clauses.push_back(keyword + " " + cue);
            review.gold.emplace(category,
                                positive ? Polarity::positive : Polarity::negative);
        }
        rng.shuffle(clauses);
        if (clauses.empty()) {
            review.text = "biasa saja.";
        } else {
            std::string text;
            for (const auto& clause : clauses) {
                if (!text.empty()) text += " ";
                text += clause + ".";
            }
            review.text = std::move(text);
        }
        reviews.push_back(std::move(review));
    }
    return reviews;
}

// Hotel-domain default: ten categories, keyword lists pinned per category,
// cue vocabulary overlapping across categories.
inline CategoryConfig default_categories() {
    return CategoryConfig{{"service", "kebersihan", "linen", "ac", "makanan", "lokasi", "harga",
                           "wifi", "staf", "fasilitas"}};
}

inline Lexicon default_lexicon() {
    Lexicon lex;
    lex["service"] = {{"pelayanan", "pelayanannya", "layanan"},
                      {"bagus", "ramah", "cepat", "memuaskan"},
                      {"buruk", "lambat", "mengecewakan", "kasar"}};
    lex["kebersihan"] = {{"kamarnya", "kebersihan", "toilet"},
                         {"bersih", "wangi", "nyaman"},
                         {"kotor", "bau", "apek"}};
    lex["linen"] = {{"linen", "sprei", "selimut", "handuk"},
                    {"bersih", "wangi", "nyaman"},
                    {"kotor", "apek", "bau"}};
    lex["ac"] = {{"ac", "acnya", "pendingin"},
                 {"dingin", "bagus", "berfungsi"},
                 {"rusak", "bocor", "berisik"}};
    lex["makanan"] = {{"makanan", "sarapan", "snack"},
                      {"enak", "lengkap", "segar"},
                      {"hambar", "basi", "kurang"}};
    lex["lokasi"] = {{"lokasi", "lokasinya", "akses"},
                     {"strategis", "bagus", "dekat"},
                     {"jauh", "buruk", "berisik"}};
    lex["harga"] = {{"harga", "harganya", "tarif"},
                    {"murah", "terjangkau", "sepadan"},
                    {"mahal", "mengecewakan"}};
    lex["wifi"] = {{"wifi", "internet", "sinyal"},
                   {"kencang", "stabil", "bagus"},
                   {"lemot", "putus", "rusak"}};
    lex["staf"] = {{"staf", "stafnya", "resepsionis"},
                   {"ramah", "membantu", "cepat"},
                   {"kasar", "lambat", "cuek"}};
    lex["fasilitas"] = {{"fasilitas", "kolam", "parkir"},
                        {"lengkap", "bagus", "terawat"},
                        {"rusak", "kurang", "kotor"}};
    return lex;
}

// Vocabulary covering everything the generator and the auxiliary-sentence
// templates can emit, plus single-letter pieces so unseen ASCII words still
// segment. Entry order is deterministic.
inline std::vector<std::string> vocab_entries_for(const Lexicon& lexicon,
                                                  const CategoryConfig& config) {
    std::set<std::string> words;
    for (const std::string& category : config.categories) {
        words.insert(category);
        auto it = lexicon.find(category);
        if (it != lexicon.end()) {
            const LexiconEntry& e = it->second;
            words.insert(e.keywords.begin(), e.keywords.end());
            words.insert(e.positive_cues.begin(), e.positive_cues.end());
            words.insert(e.negative_cues.begin(), e.negative_cues.end());
        }
    }
    for (const char* w : {"positif", "negatif", "none", "bagaimana", "pendapat", "tentang",
                          "apakah", "dan", "biasa", "saja", "-", ".", ",", "!", "?"}) {
        words.insert(w);
    }
    std::vector<std::string> entries{std::string(kPadToken), std::string(kUnkToken),
                                     std::string(kClsToken), std::string(kSepToken),
                                     std::string(kMaskToken)};
    entries.insert(entries.end(), words.begin(), words.end());
    for (char c = 'a'; c <= 'z'; ++c) entries.push_back(std::string(1, c));
    for (char c = 'a'; c <= 'z'; ++c) entries.push_back("##" + std::string(1, c));
    return entries;
}

// ---- lexicon JSON file --------------------------------------------------

inline Lexicon lexicon_from_json(const nlohmann::json& j) {
    Lexicon lex;
    for (const auto& [category, entry] : j.items()) {
        LexiconEntry e;
        e.keywords = entry.at("keywords").get<std::vector<std::string>>();
        e.positive_cues = entry.at("positive").get<std::vector<std::string>>();
        e.negative_cues = entry.at("negative").get<std::vector<std::string>>();
        lex[category] = std::move(e);
    }
    return lex;
}

inline nlohmann::json lexicon_to_json(const Lexicon& lex) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [category, e] : lex) {
        j[category] = {{"keywords", e.keywords},
                       {"positive", e.positive_cues},
                       {"negative", e.negative_cues}};
    }
    return j;
}

inline Lexicon load_lexicon_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "lexicon: cannot open ", path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    require(!j.is_discarded(), "lexicon: ", path, " is not valid JSON");
    try {
        return lexicon_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        fail("lexicon: ", path, ": ", e.what());
    }
}

}  // namespace absa
