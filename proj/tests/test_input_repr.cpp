#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "absa/input_repr.hpp"
#include "helpers.hpp"

using absa::Token;
using absa::Vocab;

namespace {

std::vector<Token> toks(const Vocab& v, const std::vector<std::string>& surfaces) {
    std::vector<Token> out;
    for (const auto& s : surfaces) out.push_back({s, v.lookup(s), false});
    return out;
}

}  // namespace

TEST_CASE("single-sentence layout and padding", "[input_repr]") {
    const Vocab v = testutil::make_vocab({"kamar", "bersih"});
    const auto repr = absa::encode_single(toks(v, {"kamar", "bersih"}), v, 8);
    CHECK(repr.token_ids ==
          std::vector<int>{v.cls_id, v.lookup("kamar"), v.lookup("bersih"), v.sep_id, v.pad_id,
                           v.pad_id, v.pad_id, v.pad_id});
    CHECK(repr.segment_ids == std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0});
    CHECK(repr.position_ids == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(repr.attention_mask == std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0});
    CHECK(repr.real_length == 4);
}

TEST_CASE("single-sentence truncation keeps the head", "[input_repr]") {
    const Vocab v = testutil::make_vocab({"w"});
    std::vector<Token> tokens(100, Token{"w", v.lookup("w"), false});
    const auto repr = absa::encode_single(tokens, v, 16);
    CHECK(repr.real_length == 16);  // [CLS] + 14 tokens + [SEP]
    int kept = 0;
    for (int id : repr.token_ids) {
        if (id == v.lookup("w")) ++kept;
    }
    CHECK(kept == 14);
    CHECK(repr.token_ids.front() == v.cls_id);
    CHECK(repr.token_ids[15] == v.sep_id);
}

TEST_CASE("pair layout places segments and separators", "[input_repr]") {
    const Vocab v = testutil::make_vocab({"a1", "a2", "b1"});
    const auto repr = absa::encode_pair(toks(v, {"a1", "a2"}), toks(v, {"b1"}), v, 8);
    CHECK(repr.token_ids == std::vector<int>{v.cls_id, v.lookup("a1"), v.lookup("a2"), v.sep_id,
                                             v.lookup("b1"), v.sep_id, v.pad_id, v.pad_id});
    CHECK(repr.segment_ids == std::vector<int>{0, 0, 0, 0, 1, 1, 0, 0});
    CHECK(repr.attention_mask == std::vector<int>{1, 1, 1, 1, 1, 1, 0, 0});
    CHECK(repr.real_length == 6);
}

TEST_CASE("pair truncation pops from the longer side, b on ties", "[input_repr]") {
    const Vocab v = testutil::make_vocab({"a", "b"});
    const std::vector<Token> a10(10, Token{"a", v.lookup("a"), false});
    const std::vector<Token> b10(10, Token{"b", v.lookup("b"), false});

    // 10+10 against budget 13-3=10 -> alternating pops land on 5/5
    const auto repr = absa::encode_pair(a10, b10, v, 13);
    int na = 0, nb = 0;
    for (int id : repr.token_ids) {
        na += id == v.lookup("a");
        nb += id == v.lookup("b");
    }
    CHECK(na == 5);
    CHECK(nb == 5);
    CHECK(repr.real_length == 13);

    // asymmetric: 8+2 against budget 6 -> only a shrinks, to 4
    const std::vector<Token> a8(8, Token{"a", v.lookup("a"), false});
    const std::vector<Token> b2(2, Token{"b", v.lookup("b"), false});
    const auto repr2 = absa::encode_pair(a8, b2, v, 9);
    na = nb = 0;
    for (int id : repr2.token_ids) {
        na += id == v.lookup("a");
        nb += id == v.lookup("b");
    }
    CHECK(na == 4);
    CHECK(nb == 2);

    // the first odd pop hits b
    const std::vector<Token> a2(2, Token{"a", v.lookup("a"), false});
    const auto repr3 = absa::encode_pair(a2, b2, v, 6);  // budget 3
    na = nb = 0;
    for (int id : repr3.token_ids) {
        na += id == v.lookup("a");
        nb += id == v.lookup("b");
    }
    CHECK(na == 2);
    CHECK(nb == 1);
}

TEST_CASE("pair encoding rejects an empty first sequence", "[input_repr]") {
    const Vocab v = testutil::make_vocab({"b"});
    CHECK_THROWS(absa::encode_pair({}, toks(v, {"b"}), v, 8));
    CHECK_THROWS(absa::encode_single({}, v, 2));  // max_seq_len too small
}

TEST_CASE("embedding rows sum token, segment and position entries", "[input_repr]") {
    const Vocab v = testutil::make_vocab({"x"});
    auto repr = absa::encode_single(toks(v, {"x"}), v, 4);
    absa::EmbeddingTablesT<double> tables;
    const int H = 3;
    tables.token = absa::Mat<double>::Zero(v.size(), H);
    for (int i = 0; i < v.size(); ++i) {
        for (int j = 0; j < H; ++j) tables.token(i, j) = 100.0 * i + j;
    }
    tables.segment = absa::Mat<double>::Zero(2, H);
    tables.segment.row(1).setConstant(0.5);
    tables.position = absa::Mat<double>::Zero(8, H);
    for (int i = 0; i < 8; ++i) tables.position.row(i).setConstant(0.01 * i);

    const auto out = absa::embed(repr, tables);
    REQUIRE(out.rows() == 4);
    REQUIRE(out.cols() == H);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < H; ++j) {
            const double expected = 100.0 * repr.token_ids[static_cast<std::size_t>(i)] + j +
                                    0.01 * i;
            CHECK(out(i, j) == Catch::Approx(expected));
        }
    }

    // position table must cover the sequence
    tables.position = absa::Mat<double>::Zero(2, H);
    CHECK_THROWS(absa::embed(repr, tables));
}
