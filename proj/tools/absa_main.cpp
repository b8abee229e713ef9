// Command-line entry point: subcommands over a key=value config file with
// flag overrides (flags win).
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "absa/absa.hpp"

namespace {

struct FlagValues {
    std::string config, seed, vocab, dataset, method, strategy, out, text;
    std::vector<std::string> sets;
};

void add_common_options(CLI::App* sub, FlagValues& flags) {
    sub->add_option("--config", flags.config, "key=value config file");
    sub->add_option("--seed", flags.seed, "master seed (overrides config)");
    sub->add_option("--vocab", flags.vocab, "vocabulary file, one token per line");
    sub->add_option("--dataset", flags.dataset, "JSON-lines review dataset");
    sub->add_option("--method", flags.method, "nli-b | nli-m | qa-b | qa-m");
    sub->add_option("--strategy", flags.strategy, "feature-extraction | fine-tuning");
    sub->add_option("--out", flags.out, "primary output path");
    sub->add_option("--text", flags.text, "inline input text (tokenize)");
    sub->add_option("--set", flags.sets, "extra key=value override (repeatable)")
        ->type_name("KEY=VALUE");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aspect-based sentiment analysis via sentence-pair classification"};
    app.require_subcommand(1);
    FlagValues flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"generate", "write a seeded synthetic review dataset"},
        {"tokenize", "print subword segmentations and OOV statistics"},
        {"transform", "expand reviews into auxiliary-sentence pair instances"},
        {"pretrain", "MLM+NSP pretraining; writes an encoder checkpoint"},
        {"train", "train one (approach, strategy) cell; writes checkpoint/report"},
        {"grid", "learning-rate x batch-size grid search; writes a CSV"},
        {"eval", "evaluate a checkpoint, or compare several run reports"},
        {"report", "OOV report for a dataset against a vocabulary"},
    };
    for (const auto& [name, description] : commands) {
        add_common_options(app.add_subcommand(name, description), flags);
    }
    CLI11_PARSE(app, argc, argv);

    absa::KvConfig cfg;
    try {
        if (!flags.config.empty()) cfg = absa::KvConfig::parse_file(flags.config);
        if (!flags.seed.empty()) cfg.set("seed", flags.seed);
        if (!flags.vocab.empty()) cfg.set("vocab", flags.vocab);
        if (!flags.dataset.empty()) cfg.set("dataset", flags.dataset);
        if (!flags.method.empty()) cfg.set("method", flags.method);
        if (!flags.strategy.empty()) cfg.set("strategy", flags.strategy);
        if (!flags.out.empty()) cfg.set("out", flags.out);
        if (!flags.text.empty()) cfg.set("text", flags.text);
        for (const auto& kv : flags.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) {
                std::cerr << "error: --set expects KEY=VALUE, got '" << kv << "'\n";
                return 2;
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return absa::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout,
                             std::cerr);
}
