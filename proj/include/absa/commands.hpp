// The eight CLI commands as library functions over a KvConfig so they can be
// driven from main() and exercised directly in tests. Every command is
// deterministic given (config, seed) and validates its whole configuration
// before doing any work.
#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "absa/config.hpp"
#include "absa/eval.hpp"
#include "absa/parallel.hpp"
#include "absa/pipeline.hpp"
#include "absa/synthetic.hpp"

namespace absa {

namespace cmd_detail {

inline void write_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open '", path, "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(out.good(), "write to '", path, "' failed");
}

inline CategoryConfig categories_from(ConfigCheck& check) {
    auto path = check.opt_path("categories");
    return path ? load_categories_file(*path) : default_categories();
}

inline Lexicon lexicon_from(ConfigCheck& check) {
    auto path = check.opt_path("lexicon");
    return path ? load_lexicon_file(*path) : default_lexicon();
}

inline EncoderConfig encoder_config_from(ConfigCheck& check, int vocab_size, int max_seq_len) {
    EncoderConfig config;
    config.layers = static_cast<int>(check.integer("encoder.layers", 2));
    config.hidden = static_cast<int>(check.integer("encoder.hidden", 32));
    config.heads = static_cast<int>(check.integer("encoder.heads", 2));
    config.ffn_size = static_cast<int>(check.integer("encoder.ffn_size", 0));
    config.max_positions = static_cast<int>(check.integer("encoder.max_positions", max_seq_len));
    config.dropout_rate = check.number("encoder.dropout", 0.0);
    config.bypass_pooler = check.boolean("encoder.bypass_pooler", false);
    config.vocab_size = vocab_size;
    return config;
}

inline Hyperparams hyperparams_from(ConfigCheck& check, std::uint64_t seed) {
    Hyperparams hp;
    hp.learning_rate = check.number("hp.learning_rate", 3e-5);
    hp.batch_size = static_cast<int>(check.integer("hp.batch_size", 16));
    hp.epochs = static_cast<int>(check.integer("hp.epochs", 25));
    hp.seed = seed;
    return hp;
}

inline std::string history_csv(const TrainHistory& history) {
    std::ostringstream csv;
    csv << std::setprecision(10);
    csv << "epoch,train_loss,val_loss,val_f1\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        csv << e << "," << history.train_loss[e] << "," << history.val_loss[e] << ","
            << history.val_f1[e] << "\n";
    }
    return csv.str();
}

inline std::string reviews_jsonl(const std::vector<Review>& reviews) {
    std::ostringstream stream;
    for (const auto& r : reviews) stream << review_to_json(r).dump() << "\n";
    return stream.str();
}

}  // namespace cmd_detail

// generate: seeded synthetic review dataset (plus optional matching vocab).
inline void cmd_generate(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::uint64_t seed = check.u64("seed", 1);
    const auto n = static_cast<std::size_t>(check.integer("n", 1000));
    const std::string out_path = check.require_str("out");
    const auto vocab_out = check.opt_str("vocab_out");
    SyntheticOptions sopt;
    sopt.include_probability = check.number("include_probability", sopt.include_probability);
    sopt.positive_probability = check.number("positive_probability", sopt.positive_probability);
    CategoryConfig categories = cmd_detail::categories_from(check);
    Lexicon lexicon = cmd_detail::lexicon_from(check);
    check.finish();

    auto reviews = generate_synthetic_reviews(seed, n, categories, lexicon, sopt);
    cmd_detail::write_file(out_path, cmd_detail::reviews_jsonl(reviews));
    if (vocab_out) {
        std::ostringstream stream;
        for (const auto& entry : vocab_entries_for(lexicon, categories)) stream << entry << "\n";
        cmd_detail::write_file(*vocab_out, stream.str());
        out << "wrote vocab to " << *vocab_out << "\n";
    }
    out << "wrote " << reviews.size() << " reviews to " << out_path << "\n";
}

// tokenize: subword listing per input line + OOV summary.
inline void cmd_tokenize(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::string vocab_path = check.require_path("vocab");
    const auto text = check.opt_str("text");
    const auto input = check.opt_path("input");
    check.check(text.has_value() || input.has_value(),
                "need either 'text' or 'input' (file with one text per line)");
    TokenizerOptions topt;
    topt.strip_accents = check.boolean("strip_accents", false);
    check.finish();

    const Vocab vocab = load_vocab_file(vocab_path);
    std::vector<std::string> lines;
    if (text) lines.push_back(*text);
    if (input) {
        std::ifstream in(*input);
        require(in.good(), "cannot open '", *input, "'");
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
    }
    for (const auto& line : lines) {
        const auto tokens = tokenize(line, vocab, topt);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            out << (i ? " " : "") << tokens[i].surface;
        }
        out << "\n";
    }
    const OovStats stats = oov_stats(lines, vocab, topt);
    out << "words: " << stats.total_words << "\n";
    out << "oov occurrences: " << stats.oov_word_occurrences << "\n";
    out << "unique oov words: " << stats.unique_oov_words << "\n";
    for (const auto& [word, count] : stats.oov_list) {
        out << "  " << word << " " << count << "\n";
    }
}

// transform: review dataset -> auxiliary-sentence pair instances.
inline void cmd_transform(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::string dataset = check.require_path("dataset");
    const std::string method_str = check.str("method", "nli-b");
    const std::string out_path = check.require_str("out");
    CategoryConfig categories = cmd_detail::categories_from(check);
    TransformMethod method = TransformMethod::nli_b;
    try {
        method = method_from_string(method_str);
    } catch (const Error& e) {
        check.check(false, e.what());
    }
    check.finish();

    const auto reviews = load_reviews_file(dataset);
    const auto pairs = transform_dataset(reviews, categories, method);
    std::ostringstream stream;
    for (const auto& p : pairs) stream << pair_to_json(p).dump() << "\n";
    cmd_detail::write_file(out_path, stream.str());
    out << "reviews: " << reviews.size() << "\n";
    out << "categories: " << categories.categories.size() << "\n";
    out << "instances: " << pairs.size();
    if (is_binary_method(method)) {
        out << " (= " << reviews.size() << " x " << categories.categories.size() << " x 3)";
    } else {
        out << " (= " << reviews.size() << " x " << categories.categories.size() << ")";
    }
    out << "\n";
    out << "wrote " << out_path << "\n";
}

// pretrain: MLM+NSP on sentence pairs drawn from the dataset's reviews.
inline void cmd_pretrain(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::string vocab_path = check.require_path("vocab");
    const std::string dataset = check.require_path("dataset");
    const std::string ckpt_out = check.require_str("checkpoint_out");
    const auto history_out = check.opt_str("history_out");
    const std::uint64_t seed = check.u64("seed", 1);
    const int max_seq_len = static_cast<int>(check.integer("max_seq_len", 48));
    PretrainOptions popt;
    popt.n_pairs = static_cast<std::size_t>(check.integer("pretrain.n_pairs", 512));
    popt.mask_rate = check.number("pretrain.mask_rate", 0.15);
    popt.learning_rate = check.number("pretrain.learning_rate", 1e-3);
    popt.batch_size = static_cast<int>(check.integer("pretrain.batch_size", 16));
    popt.epochs = static_cast<int>(check.integer("pretrain.epochs", 10));
    popt.max_seq_len = max_seq_len;
    popt.seed = seed;
    check.finish();

    const Vocab vocab = load_vocab_file(vocab_path);
    ConfigCheck encoder_check(cfg);
    EncoderConfig config = cmd_detail::encoder_config_from(encoder_check, vocab.size(), max_seq_len);
    encoder_check.finish();
    config.validate();

    const auto reviews = load_reviews_file(dataset);
    const auto documents = documents_from_reviews(reviews);
    const auto result = pretrain<float>(documents, vocab, config, popt);

    save_checkpoint(ckpt_out, checkpoint_from_pretrain(result, config));
    if (history_out) {
        std::ostringstream csv;
        csv << std::setprecision(10);
        csv << "epoch,mlm_loss,nsp_loss,total_loss\n";
        for (std::size_t e = 0; e < result.history.size(); ++e) {
            csv << e << "," << result.history[e].mlm_loss << "," << result.history[e].nsp_loss
                << "," << result.history[e].total_loss << "\n";
        }
        cmd_detail::write_file(*history_out, csv.str());
    }
    out << "examples: " << result.examples.size() << "\n";
    if (!result.history.empty()) {
        out << "first epoch loss: " << result.history.front().total_loss << "\n";
        out << "last epoch loss: " << result.history.back().total_loss << "\n";
    }
    out << "wrote " << ckpt_out << "\n";
}

namespace cmd_detail {

struct TrainSetup {
    Vocab vocab;
    CategoryConfig categories;
    std::vector<Review> reviews;
    AdaptationStrategy strategy = AdaptationStrategy::fine_tuning;
    Hyperparams hp;
    double train_fraction = 0.8;
    int max_seq_len = 48;
    unsigned threads = 1;
    EncoderConfig encoder_config;
    EncoderParams encoder_init;
};

// Reads everything cmd_train/cmd_grid share; the encoder comes from
// checkpoint_in when given (its stored config wins) and fresh seeded
// initialization otherwise.
inline TrainSetup read_train_setup(const KvConfig& cfg, ConfigCheck& check) {
    TrainSetup setup;
    const std::string vocab_path = check.require_path("vocab");
    const std::string dataset = check.require_path("dataset");
    const auto ckpt_in = check.opt_path("checkpoint_in");
    const std::uint64_t seed = check.u64("seed", 1);
    setup.hp = hyperparams_from(check, seed);
    std::string strategy_str = check.str("strategy", "fine-tuning");
    try {
        setup.strategy = strategy_from_string(strategy_str);
    } catch (const Error& e) {
        check.check(false, e.what());
    }
    setup.train_fraction = check.number("train_fraction", 0.8);
    setup.max_seq_len = static_cast<int>(check.integer("max_seq_len", 48));
    setup.threads = static_cast<unsigned>(check.integer("threads", 1));
    setup.categories = categories_from(check);
    EncoderConfig cfg_config = encoder_config_from(check, 0, setup.max_seq_len);
    check.finish();

    setup.vocab = load_vocab_file(vocab_path);
    setup.reviews = load_reviews_file(dataset);
    if (ckpt_in) {
        const Checkpoint ckpt = load_checkpoint(*ckpt_in);
        setup.encoder_config = ckpt.config;
        require(setup.encoder_config.vocab_size == setup.vocab.size(),
                "checkpoint vocab size ", setup.encoder_config.vocab_size,
                " does not match vocab file (", setup.vocab.size(), " tokens)");
        require(setup.encoder_config.max_positions >= setup.max_seq_len,
                "checkpoint max_positions ", setup.encoder_config.max_positions,
                " < max_seq_len ", setup.max_seq_len);
        setup.encoder_init = params_from_checkpoint(ckpt);
    } else {
        setup.encoder_config = cfg_config;
        setup.encoder_config.vocab_size = setup.vocab.size();
        setup.encoder_config.validate();
        setup.encoder_init = init_encoder_params<float>(setup.encoder_config, seed);
    }
    return setup;
}

inline nlohmann::json report_json(const EvalReport& report, const std::string& approach,
                                  const std::string& strategy, const std::string& method) {
    nlohmann::json j = to_json(report);
    j["approach"] = approach;
    j["strategy"] = strategy;
    j["method"] = method;
    return j;
}

}  // namespace cmd_detail

// train: one (approach, strategy) cell; writes checkpoint/history/report.
inline void cmd_train(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::string approach = check.str("approach", "pair");
    check.check(approach == "pair" || approach == "single",
                "key 'approach': expected pair or single, got '" + approach + "'");
    const std::string method_str = check.str("method", "nli-b");
    TransformMethod method = TransformMethod::nli_b;
    try {
        method = method_from_string(method_str);
    } catch (const Error& e) {
        check.check(false, e.what());
    }
    const auto ckpt_out = check.opt_str("checkpoint_out");
    const auto history_out = check.opt_str("history_out");
    const auto report_out = check.opt_str("report_out");
    const auto errors_out = check.opt_str("errors_out");
    const auto val_out = check.opt_str("val_out");
    const double aspect_threshold = check.number("aspect_threshold", 0.5);
    check.check(!(approach == "single" && ckpt_out.has_value()),
                "checkpoint_out is not supported for approach=single (the suite is several models)");
    cmd_detail::TrainSetup setup = cmd_detail::read_train_setup(cfg, check);

    EvalReport report;
    if (approach == "pair") {
        PairTask task = build_pair_task(setup.reviews, setup.vocab, setup.categories, method,
                                        setup.train_fraction, setup.hp.seed, setup.max_seq_len);
        ClassifierModel init{setup.encoder_config, setup.encoder_init,
                             init_head<float>(HeadKind::pair_classifier,
                                              setup.encoder_config.hidden,
                                              pair_head_outputs(method), setup.hp.seed)};
        auto result = train(init, task.train_examples, setup.strategy, setup.hp,
                            &task.val_examples);
        report = evaluate_pair_model(result.model, task.val_pairs, task.val_examples,
                                     task.val_gold, method, setup.categories, setup.threads);
        if (ckpt_out) save_checkpoint(*ckpt_out, checkpoint_from_model(result.model));
        if (history_out) cmd_detail::write_file(*history_out, cmd_detail::history_csv(result.history));
        if (val_out) cmd_detail::write_file(*val_out, cmd_detail::reviews_jsonl(task.val_reviews));
        if (errors_out) {
            cmd_detail::write_file(*errors_out,
                                   error_report_jsonl(error_report(report, task.val_reviews)));
        }
    } else {
        auto split = split_dataset(setup.reviews, setup.train_fraction, setup.hp.seed);
        SuiteConfig sc{setup.categories, setup.encoder_config, setup.max_seq_len,
                       aspect_threshold};
        auto suite = train_single_sentence_suite(split.train, setup.vocab, sc,
                                                 setup.encoder_init, setup.strategy, setup.hp);
        for (const auto& skipped : suite.skipped) {
            out << "warning: category '" << skipped << "' has no training reviews; skipped\n";
        }
        report = evaluate_suite(suite, split.validation, setup.vocab, setup.threads);
        if (val_out) cmd_detail::write_file(*val_out, cmd_detail::reviews_jsonl(split.validation));
        if (errors_out) {
            cmd_detail::write_file(*errors_out,
                                   error_report_jsonl(error_report(report, split.validation)));
        }
        if (history_out) {
            // suite mode trains several models; no single history is written
            out << "note: history_out ignored for approach=single\n";
        }
    }
    if (report_out) {
        cmd_detail::write_file(
            *report_out,
            cmd_detail::report_json(report, approach, to_string(setup.strategy), method_str)
                    .dump(2) +
                "\n");
    }
    out << "val micro f1: " << report.micro_f1 << "\n";
    out << "val macro f1: " << report.macro_f1 << "\n";
}

// grid: one pair model per (learning rate, batch size); Table-5-shaped CSV.
inline void cmd_grid(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::string method_str = check.str("method", "nli-b");
    TransformMethod method = TransformMethod::nli_b;
    try {
        method = method_from_string(method_str);
    } catch (const Error& e) {
        check.check(false, e.what());
    }
    const std::string out_path = check.require_str("out");
    GridSpec grid;
    grid.learning_rates = check.number_list("grid.learning_rates", {3e-5, 2e-5});
    grid.batch_sizes = check.integer_list("grid.batch_sizes", {16, 32});
    cmd_detail::TrainSetup setup = cmd_detail::read_train_setup(cfg, check);

    PairTask task = build_pair_task(setup.reviews, setup.vocab, setup.categories, method,
                                    setup.train_fraction, setup.hp.seed, setup.max_seq_len);
    auto evaluate = [&](const Hyperparams& hp) {
        ClassifierModel init{setup.encoder_config, setup.encoder_init,
                             init_head<float>(HeadKind::pair_classifier,
                                              setup.encoder_config.hidden,
                                              pair_head_outputs(method), hp.seed)};
        auto result = train(init, task.train_examples, setup.strategy, hp);
        return evaluate_pair_model(result.model, task.val_pairs, task.val_examples, task.val_gold,
                                   method, setup.categories, 1)
            .micro_f1;
    };
    const GridResult result = grid_search(grid, setup.hp, evaluate, setup.threads);

    std::ostringstream csv;
    csv << std::setprecision(10);
    csv << "learning_rate,batch_size,f1\n";
    for (const auto& row : result.rows) {
        csv << row.learning_rate << "," << row.batch_size << "," << row.f1 << "\n";
    }
    cmd_detail::write_file(out_path, csv.str());
    for (const auto& row : result.rows) {
        out << "lr=" << row.learning_rate << " batch=" << row.batch_size << " f1=" << row.f1
            << (row.diverged ? " (diverged)" : "") << "\n";
    }
    const auto& best = result.rows[result.best_index];
    out << "best: lr=" << best.learning_rate << " batch=" << best.batch_size
        << " f1=" << best.f1 << "\n";
    out << "wrote " << out_path << "\n";
}

// eval: score a trained checkpoint on a dataset, or compare several run
// reports into the 2x2 table.
inline void cmd_eval(const KvConfig& cfg, std::ostream& out) {
    if (cfg.has("inputs")) {
        ConfigCheck check(cfg);
        std::vector<std::string> paths;
        {
            std::istringstream stream(check.require_str("inputs"));
            std::string item;
            while (std::getline(stream, item, ',')) {
                if (!item.empty()) paths.push_back(item);
            }
        }
        for (const auto& p : paths) {
            check.check(std::filesystem::exists(p), "inputs: path '" + p + "' does not exist");
        }
        const auto report_out = check.opt_str("report_out");
        check.finish();

        std::map<std::pair<std::string, std::string>, double> cells;
        for (const auto& path : paths) {
            std::ifstream in(path);
            require(in.good(), "cannot open '", path, "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                fail("'", path, "': bad JSON: ", e.what());
            }
            require(j.contains("approach") && j.contains("strategy") && j.contains("micro_f1"),
                    "'", path, "': expected a run report with approach/strategy/micro_f1");
            cells[{j["approach"].get<std::string>(), j["strategy"].get<std::string>()}] =
                j["micro_f1"].get<double>();
        }
        const CompareReport report = compare_report(cells);
        out << report.text;
        if (report_out) {
            cmd_detail::write_file(*report_out, to_json(report).dump(2) + "\n");
            out << "wrote " << *report_out << "\n";
        }
        return;
    }

    ConfigCheck check(cfg);
    const std::string ckpt_path = check.require_path("checkpoint_in");
    const std::string vocab_path = check.require_path("vocab");
    const std::string dataset = check.require_path("dataset");
    const std::string method_str = check.str("method", "nli-b");
    TransformMethod method = TransformMethod::nli_b;
    try {
        method = method_from_string(method_str);
    } catch (const Error& e) {
        check.check(false, e.what());
    }
    const auto report_out = check.opt_str("report_out");
    const auto errors_out = check.opt_str("errors_out");
    const int max_seq_len = static_cast<int>(check.integer("max_seq_len", 48));
    const auto threads = static_cast<unsigned>(check.integer("threads", 1));
    CategoryConfig categories = cmd_detail::categories_from(check);
    check.finish();

    const Vocab vocab = load_vocab_file(vocab_path);
    const ClassifierModel model = model_from_checkpoint(load_checkpoint(ckpt_path));
    require(model.config.vocab_size == vocab.size(), "checkpoint vocab size ",
            model.config.vocab_size, " does not match vocab file (", vocab.size(), " tokens)");
    require(model.head.kind == HeadKind::pair_classifier,
            "eval expects a pair-classifier checkpoint, got ", to_string(model.head.kind));
    require(model.head.outputs() == pair_head_outputs(method), "checkpoint head has ",
            model.head.outputs(), " outputs but method ", method_str, " needs ",
            pair_head_outputs(method));
    const auto reviews = load_reviews_file(dataset);
    const auto pairs = transform_dataset(reviews, categories, method);
    const auto examples = build_pair_examples(pairs, vocab, max_seq_len);
    const EvalReport report = evaluate_pair_model(model, pairs, examples, gold_sets(reviews),
                                                  method, categories, threads);
    out << "micro f1: " << report.micro_f1 << "\n";
    out << "macro f1: " << report.macro_f1 << "\n";
    for (const auto& [category, f1] : report.per_category_f1) {
        out << "  " << category << ": " << f1 << "\n";
    }
    if (report_out) {
        cmd_detail::write_file(*report_out,
                               cmd_detail::report_json(report, "pair", "-", method_str).dump(2) +
                                   "\n");
    }
    if (errors_out) {
        cmd_detail::write_file(*errors_out, error_report_jsonl(error_report(report, reviews)));
    }
}

// report: OOV analysis of a dataset against a vocabulary.
inline void cmd_report(const KvConfig& cfg, std::ostream& out) {
    ConfigCheck check(cfg);
    const std::string vocab_path = check.require_path("vocab");
    const std::string dataset = check.require_path("dataset");
    const auto out_path = check.opt_str("out");
    check.finish();

    const Vocab vocab = load_vocab_file(vocab_path);
    const auto reviews = load_reviews_file(dataset);
    std::vector<std::string> texts;
    texts.reserve(reviews.size());
    for (const auto& r : reviews) texts.push_back(r.text);
    const OovStats stats = oov_stats(texts, vocab);
    out << "reviews: " << reviews.size() << "\n";
    out << "words: " << stats.total_words << "\n";
    out << "oov occurrences: " << stats.oov_word_occurrences << "\n";
    out << "unique oov words: " << stats.unique_oov_words << "\n";
    for (const auto& [word, count] : stats.oov_list) {
        out << "  " << word << " " << count << "\n";
    }
    if (out_path) {
        nlohmann::json j;
        j["total_words"] = stats.total_words;
        j["oov_occurrences"] = stats.oov_word_occurrences;
        j["unique_oov_words"] = stats.unique_oov_words;
        nlohmann::json list = nlohmann::json::array();
        for (const auto& [word, count] : stats.oov_list) {
            list.push_back({{"word", word}, {"count", count}});
        }
        j["oov"] = list;
        cmd_detail::write_file(*out_path, j.dump(2) + "\n");
        out << "wrote " << *out_path << "\n";
    }
}

inline int run_command(const std::string& command, const KvConfig& cfg, std::ostream& out,
                       std::ostream& err) {
    try {
        if (command == "generate") cmd_generate(cfg, out);
        else if (command == "tokenize") cmd_tokenize(cfg, out);
        else if (command == "transform") cmd_transform(cfg, out);
        else if (command == "pretrain") cmd_pretrain(cfg, out);
        else if (command == "train") cmd_train(cfg, out);
        else if (command == "grid") cmd_grid(cfg, out);
        else if (command == "eval") cmd_eval(cfg, out);
        else if (command == "report") cmd_report(cfg, out);
        else {
            err << "unknown command '" << command << "'\n";
            return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace absa
