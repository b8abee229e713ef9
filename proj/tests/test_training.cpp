#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "absa/checkpoint.hpp"
#include "absa/optim.hpp"
#include "absa/pipeline.hpp"
#include "absa/training.hpp"
#include "helpers.hpp"

using absa::AdaptationStrategy;
using absa::ClsExample;
using absa::HeadKind;
using absa::Hyperparams;
using absa::Vec;
using absa::Vocab;

namespace {

absa::EncoderConfig tiny_config(int vocab_size) {
    absa::EncoderConfig c;
    c.layers = 1;
    c.hidden = 8;
    c.heads = 2;
    c.ffn_size = 16;
    c.max_positions = 16;
    c.vocab_size = vocab_size;
    return c;
}

// two-class toy problem: the single payload word decides the class
std::vector<ClsExample> word_class_examples(const Vocab& vocab, int copies) {
    std::vector<ClsExample> out;
    for (int i = 0; i < copies; ++i) {
        for (const auto& [word, gold] : {std::pair<const char*, int>{"good", 0}, {"bad", 1}}) {
            ClsExample ex;
            ex.repr = absa::encode_single(absa::tokenize(word, vocab, {}), vocab, 8);
            ex.gold = gold;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("adam takes bias-corrected steps of hand-computed size", "[training]") {
    absa::AdamOptimizer<double> adam({0.1, 0.9, 0.999, 1e-8});
    double param = 1.0;
    double grad = 2.0;
    std::vector<absa::TensorSpan<double>> spans{{&param, &grad, 1}};
    adam.step(spans);
    // first step: mhat = g, vhat = g^2, so the move is lr * g / (|g| + eps)
    CHECK(param == Catch::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
    CHECK(adam.step_count() == 1);

    const double p1 = param;
    grad = -1.0;
    adam.step(spans);
    // second step by hand: m = .9*.2 - .1 = 0.08, v = .999*.004 + .001*1
    const double mhat = 0.08 / (1.0 - 0.81);
    const double vhat = (0.999 * 0.004 + 0.001) / (1.0 - 0.999 * 0.999);
    CHECK(param == Catch::Approx(p1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));

    std::vector<absa::TensorSpan<double>> wrong{{&param, &grad, 1}, {&param, &grad, 1}};
    CHECK_THROWS_WITH(adam.step(wrong), Catch::Matchers::ContainsSubstring("parameter count"));
}

TEST_CASE("head_forward applies sigmoid or softmax by kind", "[training]") {
    Vec<float> cls = Vec<float>::Zero(4);
    absa::HeadParamsT<float> head;
    head.kind = HeadKind::multilabel_aspect;
    head.w = absa::Mat<float>::Zero(4, 3);
    head.b = Vec<float>::Zero(3);
    const Vec<float> sig = absa::head_forward(cls, head);
    for (int i = 0; i < 3; ++i) CHECK(sig(i) == Catch::Approx(0.5));

    head.kind = HeadKind::pair_classifier;
    const Vec<float> uniform = absa::head_forward(cls, head);
    for (int i = 0; i < 3; ++i) CHECK(uniform(i) == Catch::Approx(1.0f / 3.0f));

    head.b << 0.0f, std::log(2.0f), 0.0f;
    const Vec<float> skew = absa::head_forward(cls, head);
    CHECK(skew(1) == Catch::Approx(0.5));
    CHECK(skew(0) == Catch::Approx(0.25));

    head.w = absa::Mat<float>::Zero(5, 3);  // wrong input width
    CHECK_THROWS(absa::head_forward(cls, head));
}

TEST_CASE("compute_loss matches closed forms", "[training]") {
    Vec<double> half = Vec<double>::Constant(2, 0.5);
    CHECK(absa::compute_loss(half, std::vector<int>{1, 0}, HeadKind::multilabel_aspect) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));
    Vec<double> third = Vec<double>::Constant(3, 1.0 / 3.0);
    CHECK(absa::compute_loss(third, 0, HeadKind::pair_classifier) ==
          Catch::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(absa::compute_loss(third, 2, HeadKind::per_category_sentiment) ==
          Catch::Approx(std::log(3.0)).epsilon(1e-12));
    // kind/gold shape misuse
    CHECK_THROWS(absa::compute_loss(half, std::vector<int>{1, 0}, HeadKind::pair_classifier));
    CHECK_THROWS(absa::compute_loss(half, 0, HeadKind::multilabel_aspect));
    CHECK_THROWS(absa::compute_loss(half, 2, HeadKind::pair_classifier));
    CHECK_THROWS(absa::compute_loss(half, std::vector<int>{1, 2}, HeadKind::multilabel_aspect));
}

TEST_CASE("train with zero epochs is a no-op", "[training]") {
    const Vocab vocab = testutil::make_vocab({"good", "bad"});
    const auto config = tiny_config(vocab.size());
    absa::ClassifierModelT<float> init{
        config, absa::init_encoder_params<float>(config, 7),
        absa::init_head<float>(HeadKind::per_category_sentiment, config.hidden, 2, 7)};
    Hyperparams hp;
    hp.epochs = 0;
    const auto result =
        absa::train(init, word_class_examples(vocab, 2), AdaptationStrategy::fine_tuning, hp);
    CHECK(result.history.train_loss.empty());
    CHECK(absa::params_fingerprint(result.model.encoder) ==
          absa::params_fingerprint(init.encoder));
    CHECK((result.model.head.w - init.head.w).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("feature extraction freezes the encoder bit for bit", "[training]") {
    const Vocab vocab = testutil::make_vocab({"good", "bad"});
    const auto config = tiny_config(vocab.size());
    absa::ClassifierModelT<float> init{
        config, absa::init_encoder_params<float>(config, 7),
        absa::init_head<float>(HeadKind::per_category_sentiment, config.hidden, 2, 7)};
    const auto examples = word_class_examples(vocab, 4);
    Hyperparams hp;
    hp.learning_rate = 5e-3;
    hp.batch_size = 4;
    hp.epochs = 20;

    const auto fe = absa::train(init, examples, AdaptationStrategy::feature_extraction, hp);
    CHECK(absa::params_fingerprint(fe.model.encoder) == absa::params_fingerprint(init.encoder));
    CHECK((fe.model.head.w - init.head.w).cwiseAbs().maxCoeff() > 0.0f);
    CHECK(fe.history.train_loss.back() < fe.history.train_loss.front());

    const auto ft = absa::train(init, examples, AdaptationStrategy::fine_tuning, hp);
    CHECK(absa::params_fingerprint(ft.model.encoder) != absa::params_fingerprint(init.encoder));
    CHECK(ft.history.train_loss.back() < ft.history.train_loss.front());
    CHECK(ft.history.train_loss.back() < 0.1);  // separable data trains to near zero
}

TEST_CASE("validation history tracks loss and classification f1", "[training]") {
    const Vocab vocab = testutil::make_vocab({"good", "bad"});
    const auto config = tiny_config(vocab.size());
    absa::ClassifierModelT<float> init{
        config, absa::init_encoder_params<float>(config, 7),
        absa::init_head<float>(HeadKind::per_category_sentiment, config.hidden, 2, 7)};
    const auto examples = word_class_examples(vocab, 4);
    Hyperparams hp;
    hp.learning_rate = 5e-3;
    hp.batch_size = 4;
    hp.epochs = 12;
    const auto with_val =
        absa::train(init, examples, AdaptationStrategy::fine_tuning, hp, &examples);
    REQUIRE(with_val.history.val_f1.size() == 12);
    CHECK(std::isfinite(with_val.history.val_loss.back()));
    CHECK(with_val.history.val_f1.back() == 1.0);  // same data it trained on
    CHECK(with_val.history.seconds.size() == 12);

    const auto without = absa::train(init, examples, AdaptationStrategy::fine_tuning, hp);
    CHECK(std::isnan(without.history.val_f1.back()));
}

TEST_CASE("train rejects empty data and bad hyperparameters", "[training]") {
    const Vocab vocab = testutil::make_vocab({"good", "bad"});
    const auto config = tiny_config(vocab.size());
    absa::ClassifierModelT<float> init{
        config, absa::init_encoder_params<float>(config, 7),
        absa::init_head<float>(HeadKind::per_category_sentiment, config.hidden, 2, 7)};
    Hyperparams hp;
    CHECK_THROWS(absa::train(init, {}, AdaptationStrategy::fine_tuning, hp));
    hp.learning_rate = 0.0;
    CHECK_THROWS(absa::train(init, word_class_examples(vocab, 1),
                             AdaptationStrategy::fine_tuning, hp));
}

TEST_CASE("predict is thread-count invariant", "[training]") {
    const Vocab vocab = testutil::make_vocab({"good", "bad", "meh", "fine"});
    const auto config = tiny_config(vocab.size());
    absa::ClassifierModelT<float> model{
        config, absa::init_encoder_params<float>(config, 3),
        absa::init_head<float>(HeadKind::pair_classifier, config.hidden, 3, 3)};
    std::vector<ClsExample> instances;
    for (const char* text : {"good bad", "meh", "fine good meh", "bad", "good", "meh fine"}) {
        ClsExample ex;
        ex.repr = absa::encode_single(absa::tokenize(text, vocab, {}), vocab, 8);
        ex.gold = 0;
        instances.push_back(std::move(ex));
    }
    const auto serial = absa::predict(model, instances, 1);
    const auto parallel = absa::predict(model, instances, 4);
    REQUIRE(serial.rows() == parallel.rows());
    CHECK((serial - parallel).cwiseAbs().maxCoeff() == 0.0f);
    // probability rows
    for (Eigen::Index i = 0; i < serial.rows(); ++i) {
        CHECK(serial.row(i).sum() == Catch::Approx(1.0).margin(1e-5));
    }
}

TEST_CASE("build_pair_examples encodes and carries labels", "[training]") {
    const Vocab vocab = testutil::make_vocab({"service", "positif", "bagus", "-"});
    std::vector<absa::PairInstance> pairs(1);
    pairs[0].text_a = "service-positif";
    pairs[0].text_b = "bagus";
    pairs[0].label = 1;
    pairs[0].review_id = "r0";
    pairs[0].category = "service";
    const auto examples = absa::build_pair_examples(pairs, vocab, 12);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].gold == 1);
    // layout: [CLS] service - positif [SEP] bagus [SEP]
    const auto& ids = examples[0].repr.token_ids;
    CHECK(ids[0] == vocab.cls_id);
    CHECK(ids[1] == vocab.lookup("service"));
    CHECK(examples[0].repr.real_length == 7);
    CHECK(examples[0].repr.segment_ids[5] == 1);

    pairs[0].text_a = "";
    CHECK_THROWS_WITH(absa::build_pair_examples(pairs, vocab, 12),
                      Catch::Matchers::ContainsSubstring("tokenizes to nothing"));
}

TEST_CASE("pair_scores_from_predictions places probabilities by slot", "[training]") {
    using absa::AuxLabel;
    std::vector<absa::PairInstance> pairs(3);
    for (int i = 0; i < 3; ++i) {
        pairs[static_cast<std::size_t>(i)].review_id = "r1";
        pairs[static_cast<std::size_t>(i)].category = "service";
        pairs[static_cast<std::size_t>(i)].aux_polarity = static_cast<AuxLabel>(i);
    }
    absa::Mat<float> scores(3, 2);
    scores << 0.9f, 0.1f, 0.7f, 0.3f, 0.4f, 0.6f;
    const auto by_review =
        absa::pair_scores_from_predictions(pairs, scores, absa::TransformMethod::nli_b);
    REQUIRE(by_review.count("r1") == 1);
    const auto& s = by_review.at("r1").by_category.at("service");
    CHECK(s[0] == Catch::Approx(0.1));  // P(label=1) for the positive aux sentence
    CHECK(s[1] == Catch::Approx(0.3));
    CHECK(s[2] == Catch::Approx(0.6));

    // M-method rows copy the whole distribution
    std::vector<absa::PairInstance> mpairs(1);
    mpairs[0].review_id = "r2";
    mpairs[0].category = "ac";
    absa::Mat<float> mscores(1, 3);
    mscores << 0.2f, 0.5f, 0.3f;
    const auto mby =
        absa::pair_scores_from_predictions(mpairs, mscores, absa::TransformMethod::nli_m);
    const auto& ms = mby.at("r2").by_category.at("ac");
    CHECK(ms[1] == Catch::Approx(0.5));

    CHECK_THROWS_WITH(
        absa::pair_scores_from_predictions(pairs, mscores, absa::TransformMethod::nli_b),
        Catch::Matchers::ContainsSubstring("score rows"));
    CHECK_THROWS(absa::pair_scores_from_predictions(pairs, scores, absa::TransformMethod::nli_m));
}

TEST_CASE("single-sentence suite trains one model per supported category", "[training][slow]") {
    const Vocab vocab = testutil::make_vocab(
        {"pelayanan", "bagus", "buruk", "kamarnya", "bersih", "kotor", "dan"});
    absa::CategoryConfig categories{{"service", "kebersihan", "wifi"}};
    std::vector<absa::Review> reviews;
    for (int i = 0; i < 6; ++i) {
        absa::Review r;
        r.id = "r" + std::to_string(i);
        const bool svc_pos = i % 2 == 0;
        const bool kbr_pos = i % 3 != 0;
        r.text = std::string("pelayanan ") + (svc_pos ? "bagus" : "buruk") + " dan kamarnya " +
                 (kbr_pos ? "bersih" : "kotor");
        r.gold.emplace("service", svc_pos ? absa::Polarity::positive : absa::Polarity::negative);
        r.gold.emplace("kebersihan",
                       kbr_pos ? absa::Polarity::positive : absa::Polarity::negative);
        reviews.push_back(std::move(r));
    }
    absa::SuiteConfig sc;
    sc.categories = categories;
    sc.encoder = tiny_config(vocab.size());
    sc.max_seq_len = 12;
    Hyperparams hp;
    hp.learning_rate = 5e-3;
    hp.batch_size = 3;
    hp.epochs = 15;
    const auto encoder_init = absa::init_encoder_params<float>(sc.encoder, 11);
    const auto suite = absa::train_single_sentence_suite(reviews, vocab, sc, encoder_init,
                                                         AdaptationStrategy::fine_tuning, hp);
    CHECK(suite.sentiment.size() == 2);  // wifi never appears in the data
    REQUIRE(suite.skipped.size() == 1);
    CHECK(suite.skipped[0] == "wifi");
    CHECK(suite.aspect.head.kind == HeadKind::multilabel_aspect);
    CHECK(suite.aspect.head.outputs() == 3);
    CHECK(suite.sentiment.at("service").head.outputs() == 2);

    // prediction never emits a category without a sentiment model
    const auto predictions = absa::suite_predict(suite, reviews, vocab);
    REQUIRE(predictions.size() == reviews.size());
    for (const auto& [id, set] : predictions) {
        for (const auto& [cat, pol] : set) {
            (void)pol;
            CHECK(cat != "wifi");
        }
    }
    // trained on separable text, the suite should recover most gold sets
    const auto report = absa::evaluate_suite(suite, reviews, vocab);
    CHECK(report.micro_f1 > 0.6);
}

TEST_CASE("grid_search enumerates learning-rate-major rows", "[training]") {
    absa::GridSpec grid;
    grid.learning_rates = {3e-5, 2e-5};
    grid.batch_sizes = {16, 32};
    Hyperparams base;
    base.epochs = 5;
    std::map<std::pair<double, int>, int> calls;
    const auto result = absa::grid_search(grid, base, [&](const Hyperparams& hp) {
        ++calls[{hp.learning_rate, hp.batch_size}];
        CHECK(hp.epochs == 5);  // non-grid fields ride along
        return 0.5;
    });
    REQUIRE(result.rows.size() == 4);
    CHECK(result.rows[0].learning_rate == 3e-5);
    CHECK(result.rows[0].batch_size == 16);
    CHECK(result.rows[1].learning_rate == 3e-5);
    CHECK(result.rows[1].batch_size == 32);
    CHECK(result.rows[2].learning_rate == 2e-5);
    CHECK(result.rows[3].batch_size == 32);
    CHECK(calls.size() == 4);
    for (const auto& [key, n] : calls) {
        (void)key;
        CHECK(n == 1);
    }
    // all-ties break toward the smaller learning rate, then the larger batch
    CHECK(result.best_index == 3);
}

TEST_CASE("grid_search flags divergent combinations and ranks them last", "[training]") {
    absa::GridSpec grid;
    grid.learning_rates = {1.0, 2e-5};
    grid.batch_sizes = {16};
    const auto result = absa::grid_search(grid, {}, [&](const Hyperparams& hp) -> double {
        absa::require(hp.learning_rate < 0.5, "train: non-finite loss at learning_rate ",
                      hp.learning_rate);
        return 0.9;
    });
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].diverged);
    CHECK(result.rows[0].f1 == 0.0);
    CHECK_FALSE(result.rows[1].diverged);
    CHECK(result.best_index == 1);

    CHECK_THROWS(absa::grid_search({}, {}, [](const Hyperparams&) { return 0.0; }));
}

TEST_CASE("build_pair_task splits reviews before expansion", "[training]") {
    const Vocab vocab = testutil::make_vocab(
        {"pelayanan", "bagus", "buruk", "service", "kebersihan", "positif", "negatif", "none"});
    absa::CategoryConfig categories{{"service", "kebersihan"}};
    std::vector<absa::Review> reviews;
    for (int i = 0; i < 10; ++i) {
        absa::Review r;
        r.id = "r" + std::to_string(i);
        r.text = i % 2 == 0 ? "pelayanan bagus" : "pelayanan buruk";
        r.gold.emplace("service",
                       i % 2 == 0 ? absa::Polarity::positive : absa::Polarity::negative);
        reviews.push_back(std::move(r));
    }
    const auto task = absa::build_pair_task(reviews, vocab, categories,
                                            absa::TransformMethod::nli_b, 0.8, 42, 16);
    CHECK(task.train_reviews.size() == 8);
    CHECK(task.val_reviews.size() == 2);
    CHECK(task.train_pairs.size() == 8 * 2 * 3);
    CHECK(task.val_pairs.size() == 2 * 2 * 3);
    CHECK(task.train_examples.size() == task.train_pairs.size());
    CHECK(task.val_gold.size() == 2);
    std::set<std::string> train_ids, val_ids;
    for (const auto& r : task.train_reviews) train_ids.insert(r.id);
    for (const auto& r : task.val_reviews) val_ids.insert(r.id);
    for (const auto& id : val_ids) CHECK(train_ids.count(id) == 0);
    for (const auto& p : task.val_pairs) CHECK(val_ids.count(p.review_id) == 1);
}

TEST_CASE("evaluate_pair_model demands instances for every gold review", "[training]") {
    const Vocab vocab = testutil::make_vocab({"service", "bagus"});
    const auto config = tiny_config(vocab.size());
    absa::ClassifierModelT<float> model{
        config, absa::init_encoder_params<float>(config, 1),
        absa::init_head<float>(HeadKind::pair_classifier, config.hidden, 3, 1)};
    std::vector<absa::PairInstance> pairs(1);
    pairs[0].text_a = "service";
    pairs[0].text_b = "bagus";
    pairs[0].review_id = "r1";
    pairs[0].category = "service";
    const auto examples = absa::build_pair_examples(pairs, vocab, 12);
    std::map<std::string, absa::GoldSet> gold;
    gold["r1"] = {};
    gold["r2"] = {};  // no instances for this one
    absa::CategoryConfig categories{{"service"}};
    CHECK_THROWS_WITH(absa::evaluate_pair_model(model, pairs, examples, gold,
                                                absa::TransformMethod::nli_m, categories),
                      Catch::Matchers::ContainsSubstring("no instances for review r2"));
}
