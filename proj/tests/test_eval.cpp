#include <map>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "absa/eval.hpp"
#include "absa/rng.hpp"
#include "helpers.hpp"

using absa::GoldPair;
using absa::GoldSet;
using absa::Polarity;

namespace {

// Independent scalar re-computation of the three F1 views, using flat vectors
// and long-double arithmetic instead of the production set/map machinery.
struct OracleOut {
    long double micro = 0;
    long double macro = 0;
    std::map<std::string, long double> per_category;
};

OracleOut oracle_f1(const std::map<std::string, GoldSet>& predictions,
                    const std::map<std::string, GoldSet>& gold) {
    using Triple = std::pair<std::string, GoldPair>;  // (review, pair)
    std::vector<Triple> pred_list, gold_list;
    for (const auto& [id, s] : predictions) {
        for (const auto& p : s) pred_list.emplace_back(id, p);
    }
    for (const auto& [id, s] : gold) {
        for (const auto& p : s) gold_list.emplace_back(id, p);
    }
    auto contains = [](const std::vector<Triple>& list, const Triple& t) {
        for (const auto& x : list) {
            if (x == t) return true;
        }
        return false;
    };
    auto f1_of = [](long tp, long fp, long fn) -> long double {
        if (tp + fp + fn == 0) return 1.0L;
        const long double denom = 2.0L * tp + fp + fn;
        return denom > 0 ? 2.0L * tp / denom : 0.0L;
    };

    long tp = 0, fp = 0, fn = 0;
    for (const auto& t : pred_list) (contains(gold_list, t) ? tp : fp)++;
    for (const auto& t : gold_list) {
        if (!contains(pred_list, t)) ++fn;
    }
    OracleOut out;
    out.micro = f1_of(tp, fp, fn);

    // per-pair counts for macro, per-category pooled counts
    std::set<GoldPair> all_pairs;
    std::set<std::string> all_cats;
    for (const auto& t : pred_list) { all_pairs.insert(t.second); all_cats.insert(t.second.first); }
    for (const auto& t : gold_list) { all_pairs.insert(t.second); all_cats.insert(t.second.first); }
    long double macro_sum = 0;
    long macro_n = 0;
    for (const auto& pair : all_pairs) {
        long ptp = 0, pfp = 0, pfn = 0;
        for (const auto& t : pred_list) {
            if (t.second == pair) (contains(gold_list, t) ? ptp : pfp)++;
        }
        for (const auto& t : gold_list) {
            if (t.second == pair && !contains(pred_list, t)) ++pfn;
        }
        if (ptp + pfn > 0) {
            macro_sum += f1_of(ptp, pfp, pfn);
            ++macro_n;
        }
    }
    out.macro = macro_n > 0 ? macro_sum / macro_n : out.micro;
    for (const auto& cat : all_cats) {
        long ctp = 0, cfp = 0, cfn = 0;
        for (const auto& t : pred_list) {
            if (t.second.first == cat) (contains(gold_list, t) ? ctp : cfp)++;
        }
        for (const auto& t : gold_list) {
            if (t.second.first == cat && !contains(pred_list, t)) ++cfn;
        }
        out.per_category[cat] = f1_of(ctp, cfp, cfn);
    }
    return out;
}

GoldSet random_set(absa::Rng& rng, const std::vector<std::string>& cats) {
    GoldSet s;
    for (const auto& c : cats) {
        const auto roll = rng.uniform_below(5);
        if (roll == 0) s.emplace(c, Polarity::positive);
        else if (roll == 1) s.emplace(c, Polarity::negative);
    }
    return s;
}

}  // namespace

TEST_CASE("f1_from_counts handles the degenerate corners", "[eval]") {
    CHECK(absa::f1_from_counts(2, 1, 1) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(absa::f1_from_counts(0, 0, 0) == 1.0);  // vacuously perfect
    CHECK(absa::f1_from_counts(0, 3, 0) == 0.0);
    CHECK(absa::f1_from_counts(0, 0, 4) == 0.0);
    CHECK(absa::f1_from_counts(5, 0, 0) == 1.0);
}

TEST_CASE("f1_scores on a worked example", "[eval]") {
    std::map<std::string, GoldSet> gold, pred;
    gold["r1"] = {{"service", Polarity::positive}, {"kebersihan", Polarity::positive}};
    pred["r1"] = {{"service", Polarity::positive}, {"kebersihan", Polarity::negative}};
    gold["r2"] = {{"service", Polarity::negative}};
    pred["r2"] = {};
    gold["r3"] = {};
    pred["r3"] = {{"lokasi", Polarity::positive}};

    const auto report = absa::f1_scores(pred, gold);
    CHECK(report.tp == 1);
    CHECK(report.fp == 2);
    CHECK(report.fn == 2);
    CHECK(report.micro_f1 == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    // gold-supported pairs: service+ (f1 1), service- (0), kebersihan+ (0)
    CHECK(report.macro_f1 == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(report.per_category_f1.at("service") == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(report.per_category_f1.at("kebersihan") == 0.0);
    CHECK(report.per_category_f1.at("lokasi") == 0.0);
    REQUIRE(report.mistakes.size() == 3);
    CHECK(report.confusion.at({"service", Polarity::positive}).tp == 1);
    CHECK(report.confusion.at({"kebersihan", Polarity::negative}).fp == 1);
}

TEST_CASE("f1_scores matches a long-double scalar oracle on random data", "[eval]") {
    const std::vector<std::string> cats = {"service", "kebersihan", "ac", "wifi"};
    absa::Rng rng(2024);
    for (int config = 0; config < 2000; ++config) {
        std::map<std::string, GoldSet> gold, pred;
        const int n_reviews = 1 + static_cast<int>(rng.uniform_below(10));
        for (int r = 0; r < n_reviews; ++r) {
            const std::string id = "r" + std::to_string(r);
            gold[id] = random_set(rng, cats);
            pred[id] = random_set(rng, cats);
        }
        const auto report = absa::f1_scores(pred, gold);
        const auto oracle = oracle_f1(pred, gold);
        INFO("config " << config);
        REQUIRE(report.micro_f1 ==
                Catch::Approx(static_cast<double>(oracle.micro)).margin(1e-12));
        REQUIRE(report.macro_f1 ==
                Catch::Approx(static_cast<double>(oracle.macro)).margin(1e-12));
        REQUIRE(report.per_category_f1.size() == oracle.per_category.size());
        for (const auto& [cat, f1] : oracle.per_category) {
            REQUIRE(report.per_category_f1.at(cat) ==
                    Catch::Approx(static_cast<double>(f1)).margin(1e-12));
        }
    }
}

TEST_CASE("perfect predictions score one and empty predictions zero", "[eval]") {
    const std::vector<std::string> cats = {"service", "ac"};
    absa::Rng rng(7);
    std::map<std::string, GoldSet> gold, empty;
    bool any_pair = false;
    for (int r = 0; r < 20; ++r) {
        const std::string id = "r" + std::to_string(r);
        gold[id] = random_set(rng, cats);
        any_pair = any_pair || !gold[id].empty();
        empty[id] = {};
    }
    REQUIRE(any_pair);
    const auto perfect = absa::f1_scores(gold, gold);
    CHECK(perfect.micro_f1 == 1.0);
    CHECK(perfect.macro_f1 == 1.0);
    CHECK(perfect.mistakes.empty());
    const auto nothing = absa::f1_scores(empty, gold);
    CHECK(nothing.micro_f1 == 0.0);
    CHECK(nothing.fp == 0);
}

TEST_CASE("every flipped review lands in the mistake list", "[eval]") {
    std::map<std::string, GoldSet> gold, pred;
    for (int r = 0; r < 20; ++r) {
        const std::string id = "r" + std::to_string(r);
        gold[id] = {{"service", Polarity::positive}};
        pred[id] = gold[id];
    }
    for (int r = 0; r < 7; ++r) {
        pred["r" + std::to_string(r)] = {{"service", Polarity::negative}};
    }
    const auto report = absa::f1_scores(pred, gold);
    CHECK(report.mistakes.size() == 7);
    CHECK(report.tp == 13);
    CHECK(report.fp == 7);
    CHECK(report.fn == 7);
}

TEST_CASE("f1_scores rejects mismatched review ids by name", "[eval]") {
    std::map<std::string, GoldSet> gold, pred;
    gold["a"] = {};
    gold["b"] = {};
    pred["b"] = {};
    pred["c"] = {};
    CHECK_THROWS_WITH(absa::f1_scores(pred, gold),
                      Catch::Matchers::ContainsSubstring("missing from predictions: a") &&
                          Catch::Matchers::ContainsSubstring("missing from gold: c"));
}

TEST_CASE("error_report lists spurious and missing pairs with review text", "[eval]") {
    std::map<std::string, GoldSet> gold, pred;
    gold["r1"] = {{"service", Polarity::positive}, {"ac", Polarity::negative}};
    pred["r1"] = {{"service", Polarity::negative}, {"ac", Polarity::negative}};
    gold["r2"] = {{"wifi", Polarity::positive}};
    pred["r2"] = {{"wifi", Polarity::positive}};  // correct, not listed
    std::vector<absa::Review> reviews(2);
    reviews[0].id = "r1";
    reviews[0].text = "pelayanan buruk tapi ac oke";
    reviews[1].id = "r2";
    reviews[1].text = "wifi kencang";

    const auto entries = absa::error_report(pred, gold, reviews);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].id == "r1");
    CHECK(entries[0].text == "pelayanan buruk tapi ac oke");
    REQUIRE(entries[0].spurious.size() == 1);
    CHECK(entries[0].spurious[0] == "service-negative");
    REQUIRE(entries[0].missing.size() == 1);
    CHECK(entries[0].missing[0] == "service-positive");
    CHECK(entries[0].predicted.size() == 2);
    CHECK(entries[0].gold.size() == 2);

    // the report-based overload reproduces the same listing
    const auto report = absa::f1_scores(pred, gold);
    const auto from_report = absa::error_report(report, reviews);
    REQUIRE(from_report.size() == 1);
    CHECK(from_report[0].id == entries[0].id);
    CHECK(from_report[0].spurious == entries[0].spurious);
    CHECK(from_report[0].missing == entries[0].missing);

    const auto jsonl = absa::error_report_jsonl(entries);
    CHECK(jsonl.find("\"id\":\"r1\"") != std::string::npos);
    CHECK(jsonl.find("service-negative") != std::string::npos);
}

TEST_CASE("compare_report checks both orderings across the four cells", "[eval]") {
    std::map<std::pair<std::string, std::string>, double> results = {
        {{"single", "feature-extraction"}, 0.8764},
        {{"single", "fine-tuning"}, 0.8943},
        {{"pair", "feature-extraction"}, 0.9553},
        {{"pair", "fine-tuning"}, 0.9751},
    };
    const auto report = absa::compare_report(results);
    REQUIRE(report.rows.size() == 4);
    REQUIRE(report.strategy_ordering_holds.has_value());
    REQUIRE(report.approach_ordering_holds.has_value());
    CHECK(*report.strategy_ordering_holds);
    CHECK(*report.approach_ordering_holds);
    CHECK(report.deltas.at("single: fine-tuning minus feature-extraction") ==
          Catch::Approx(0.0179).margin(1e-12));
    CHECK(report.deltas.at("pair: fine-tuning minus feature-extraction") ==
          Catch::Approx(0.0198).margin(1e-12));
    CHECK(report.deltas.at("feature-extraction: pair minus single") ==
          Catch::Approx(0.0789).margin(1e-12));
    CHECK(report.deltas.at("fine-tuning: pair minus single") ==
          Catch::Approx(0.0808).margin(1e-12));
    CHECK(report.text.find("holds") != std::string::npos);

    // a regression in one cell flips the strategy ordering only
    results[{"pair", "fine-tuning"}] = 0.90;
    const auto broken = absa::compare_report(results);
    CHECK_FALSE(*broken.strategy_ordering_holds);
    CHECK(broken.text.find("violated") != std::string::npos);

    // with only single-sentence cells the approach comparison stays unset
    std::map<std::pair<std::string, std::string>, double> partial = {
        {{"single", "feature-extraction"}, 0.80},
        {{"single", "fine-tuning"}, 0.85},
    };
    const auto half = absa::compare_report(partial);
    CHECK(half.strategy_ordering_holds.has_value());
    CHECK_FALSE(half.approach_ordering_holds.has_value());

    CHECK_THROWS(absa::compare_report({}));
}

TEST_CASE("report serializations carry the headline numbers", "[eval]") {
    std::map<std::string, GoldSet> gold, pred;
    gold["r1"] = {{"service", Polarity::positive}};
    pred["r1"] = {{"service", Polarity::positive}};
    gold["r2"] = {{"ac", Polarity::negative}};
    pred["r2"] = {};
    const auto report = absa::f1_scores(pred, gold);
    const auto j = absa::to_json(report);
    CHECK(j.at("micro_f1").get<double>() == Catch::Approx(report.micro_f1));
    CHECK(j.at("tp").get<long>() == 1);
    CHECK(j.at("mistake_count").get<std::size_t>() == 1);
    CHECK(j.at("confusion").contains("service-positive"));

    const auto csv = absa::eval_report_csv(report);
    CHECK(csv.rfind("scope,name,f1\n", 0) == 0);
    CHECK(csv.find("micro,,") != std::string::npos);
    CHECK(csv.find("category,service,") != std::string::npos);
}
