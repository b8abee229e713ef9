// F1 metrics over (category, polarity) pairs, comparison tables across
// (approach, strategy) cells, and misclassification listings.
#pragma once

#include <array>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "absa/dataset.hpp"
#include "absa/error.hpp"

namespace absa {

struct PairCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

inline double f1_from_counts(long tp, long fp, long fn) {
    if (tp == 0 && fp == 0 && fn == 0) return 1.0;  // vacuously perfect
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
    return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

inline std::string pair_label(const GoldPair& p) {
    return p.first + "-" + to_string(p.second);
}

struct EvalReport {
    double micro_f1 = 0;
    double macro_f1 = 0;
    std::map<std::string, double> per_category_f1;
    std::map<GoldPair, PairCounts> confusion;
    long tp = 0, fp = 0, fn = 0;  // global micro sums

    struct Mistake {
        std::string id;
        GoldSet predicted;
        GoldSet gold;
    };
    std::vector<Mistake> mistakes;  // reviews whose predicted set != gold set
};

// Pair-level F1. A predicted (category, polarity) is a true positive iff the
// same pair is in the review's gold set. Micro F1 pools counts globally;
// macro averages per-pair F1 over pairs with gold support.
inline EvalReport f1_scores(const std::map<std::string, GoldSet>& predictions,
                            const std::map<std::string, GoldSet>& gold) {
    std::vector<std::string> missing_in_pred, missing_in_gold;
    for (const auto& [id, _] : gold) {
        if (!predictions.count(id)) missing_in_pred.push_back(id);
    }
    for (const auto& [id, _] : predictions) {
        if (!gold.count(id)) missing_in_gold.push_back(id);
    }
    if (!missing_in_pred.empty() || !missing_in_gold.empty()) {
        std::ostringstream msg;
        msg << "f1_scores: review id mismatch;";
        if (!missing_in_pred.empty()) {
            msg << " missing from predictions:";
            for (const auto& id : missing_in_pred) msg << " " << id;
            msg << ";";
        }
        if (!missing_in_gold.empty()) {
            msg << " missing from gold:";
            for (const auto& id : missing_in_gold) msg << " " << id;
        }
        fail(msg.str());
    }

    EvalReport report;
    for (const auto& [id, gold_set] : gold) {
        const GoldSet& pred_set = predictions.at(id);
        for (const auto& pair : pred_set) {
            if (gold_set.count(pair)) {
                ++report.confusion[pair].tp;
                ++report.tp;
            } else {
                ++report.confusion[pair].fp;
                ++report.fp;
            }
        }
        for (const auto& pair : gold_set) {
            if (!pred_set.count(pair)) {
                ++report.confusion[pair].fn;
                ++report.fn;
            }
        }
        if (pred_set != gold_set) {
            report.mistakes.push_back({id, pred_set, gold_set});
        }
    }

    report.micro_f1 = f1_from_counts(report.tp, report.fp, report.fn);

    double macro_sum = 0;
    std::size_t macro_n = 0;
    std::map<std::string, PairCounts> by_category;
    for (const auto& [pair, counts] : report.confusion) {
        if (counts.tp + counts.fn > 0) {  // pairs with gold support
            macro_sum += f1_from_counts(counts.tp, counts.fp, counts.fn);
            ++macro_n;
        }
        auto& cat = by_category[pair.first];
        cat.tp += counts.tp;
        cat.fp += counts.fp;
        cat.fn += counts.fn;
    }
    report.macro_f1 = macro_n > 0 ? macro_sum / static_cast<double>(macro_n) : report.micro_f1;
    for (const auto& [category, counts] : by_category) {
        report.per_category_f1[category] = f1_from_counts(counts.tp, counts.fp, counts.fn);
    }
    return report;
}

inline nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["micro_f1"] = report.micro_f1;
    j["macro_f1"] = report.macro_f1;
    j["tp"] = report.tp;
    j["fp"] = report.fp;
    j["fn"] = report.fn;
    j["per_category_f1"] = report.per_category_f1;
    nlohmann::json confusion = nlohmann::json::object();
    for (const auto& [pair, counts] : report.confusion) {
        confusion[pair_label(pair)] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}};
    }
    j["confusion"] = confusion;
    j["mistake_count"] = report.mistakes.size();
    return j;
}

inline std::string eval_report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << std::setprecision(10);
    out << "scope,name,f1\n";
    out << "micro,," << report.micro_f1 << "\n";
    out << "macro,," << report.macro_f1 << "\n";
    for (const auto& [category, f1] : report.per_category_f1) {
        out << "category," << category << "," << f1 << "\n";
    }
    return out.str();
}

// ---- misclassification listing (symmetric difference per review) ----

struct ErrorEntry {
    std::string id;
    std::string text;
    std::vector<std::string> predicted;  // full predicted pair labels
    std::vector<std::string> gold;       // full gold pair labels
    std::vector<std::string> spurious;   // predicted but not gold
    std::vector<std::string> missing;    // gold but not predicted
};

inline std::vector<ErrorEntry> error_report(const std::map<std::string, GoldSet>& predictions,
                                            const std::map<std::string, GoldSet>& gold,
                                            const std::vector<Review>& reviews) {
    std::map<std::string, const Review*> by_id;
    for (const auto& r : reviews) by_id[r.id] = &r;
    std::vector<ErrorEntry> entries;
    for (const auto& [id, gold_set] : gold) {
        auto pit = predictions.find(id);
        if (pit == predictions.end()) continue;
        const GoldSet& pred_set = pit->second;
        if (pred_set == gold_set) continue;
        ErrorEntry entry;
        entry.id = id;
        if (auto it = by_id.find(id); it != by_id.end()) entry.text = it->second->text;
        for (const auto& p : pred_set) {
            entry.predicted.push_back(pair_label(p));
            if (!gold_set.count(p)) entry.spurious.push_back(pair_label(p));
        }
        for (const auto& p : gold_set) {
            entry.gold.push_back(pair_label(p));
            if (!pred_set.count(p)) entry.missing.push_back(pair_label(p));
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

// Same listing built from an already-computed report's mistakes.
inline std::vector<ErrorEntry> error_report(const EvalReport& report,
                                            const std::vector<Review>& reviews) {
    std::map<std::string, GoldSet> predictions, gold;
    for (const auto& m : report.mistakes) {
        predictions[m.id] = m.predicted;
        gold[m.id] = m.gold;
    }
    return error_report(predictions, gold, reviews);
}

inline std::string error_report_jsonl(const std::vector<ErrorEntry>& entries) {
    std::ostringstream out;
    for (const auto& e : entries) {
        nlohmann::json j;
        j["id"] = e.id;
        j["text"] = e.text;
        j["predicted"] = e.predicted;
        j["gold"] = e.gold;
        j["spurious"] = e.spurious;
        j["missing"] = e.missing;
        out << j.dump() << "\n";
    }
    return out.str();
}

// ---- comparison table across (approach, strategy) cells ----

inline constexpr const char* kApproachSingle = "single";
inline constexpr const char* kApproachPair = "pair";

struct CompareReport {
    struct Row {
        std::string approach;
        std::string strategy;
        double f1 = 0;
    };
    std::vector<Row> rows;
    std::map<std::string, double> deltas;
    // Set only when both cells of the comparison exist. "Holds" means
    // fine-tuning does not trail feature extraction, and the pair approach
    // does not trail the single-sentence approach.
    std::optional<bool> strategy_ordering_holds;
    std::optional<bool> approach_ordering_holds;
    std::string text;
};

inline CompareReport compare_report(
    const std::map<std::pair<std::string, std::string>, double>& results) {
    require(!results.empty(), "compare_report: no results");
    CompareReport report;
    for (const auto& [key, f1] : results) {
        report.rows.push_back({key.first, key.second, f1});
    }

    auto cell = [&](const char* approach, const char* strategy) -> std::optional<double> {
        auto it = results.find({approach, strategy});
        if (it == results.end()) return std::nullopt;
        return it->second;
    };
    const char* kFe = "feature-extraction";
    const char* kFt = "fine-tuning";
    for (const char* approach : {kApproachSingle, kApproachPair}) {
        auto fe = cell(approach, kFe), ft = cell(approach, kFt);
        if (fe && ft) {
            report.deltas[std::string(approach) + ": fine-tuning minus feature-extraction"] =
                *ft - *fe;
            const bool holds = *ft >= *fe;
            report.strategy_ordering_holds =
                report.strategy_ordering_holds.value_or(true) && holds;
        }
    }
    for (const char* strategy : {kFe, kFt}) {
        auto single = cell(kApproachSingle, strategy), pair = cell(kApproachPair, strategy);
        if (single && pair) {
            report.deltas[std::string(strategy) + ": pair minus single"] = *pair - *single;
            const bool holds = *pair >= *single;
            report.approach_ordering_holds =
                report.approach_ordering_holds.value_or(true) && holds;
        }
    }

    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "approach            strategy              f1\n";
    for (const auto& row : report.rows) {
        out << std::left << std::setw(20) << row.approach << std::setw(22) << row.strategy
            << row.f1 << "\n";
    }
    for (const auto& [name, delta] : report.deltas) {
        out << "delta  " << name << " = " << std::showpos << delta << std::noshowpos << "\n";
    }
    if (report.strategy_ordering_holds) {
        out << "ordering fine-tuning >= feature-extraction: "
            << (*report.strategy_ordering_holds ? "holds" : "violated") << "\n";
    }
    if (report.approach_ordering_holds) {
        out << "ordering pair >= single: "
            << (*report.approach_ordering_holds ? "holds" : "violated") << "\n";
    }
    report.text = out.str();
    return report;
}

inline nlohmann::json to_json(const CompareReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"approach", row.approach},
                        {"strategy", row.strategy},
                        {"f1", row.f1}});
    }
    nlohmann::json j;
    j["rows"] = rows;
    j["deltas"] = report.deltas;
    if (report.strategy_ordering_holds) {
        j["strategy_ordering_holds"] = *report.strategy_ordering_holds;
    }
    if (report.approach_ordering_holds) {
        j["approach_ordering_holds"] = *report.approach_ordering_holds;
    }
    return j;
}

}  // namespace absa
