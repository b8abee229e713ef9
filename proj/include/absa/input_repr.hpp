// Encoder input layout: [CLS]/[SEP] insertion, truncation, padding, segment
// and position ids, and the summed embedding lookup.
#pragma once

#include <vector>

#include "absa/error.hpp"
#include "absa/linalg.hpp"
#include "absa/tokenizer.hpp"

namespace absa {

struct InputRepresentation {
    std::vector<int> token_ids;
    std::vector<int> segment_ids;
    std::vector<int> position_ids;   // always 0..max_seq_len-1
    std::vector<int> attention_mask; // 1 iff position < real_length
    int real_length = 0;

    int max_seq_len() const { return static_cast<int>(token_ids.size()); }
};

namespace detail {

inline InputRepresentation blank_repr(int max_seq_len, int pad_id) {
    InputRepresentation repr;
    repr.token_ids.assign(static_cast<std::size_t>(max_seq_len), pad_id);
    repr.segment_ids.assign(static_cast<std::size_t>(max_seq_len), 0);
    repr.position_ids.resize(static_cast<std::size_t>(max_seq_len));
    for (int i = 0; i < max_seq_len; ++i) repr.position_ids[static_cast<std::size_t>(i)] = i;
    repr.attention_mask.assign(static_cast<std::size_t>(max_seq_len), 0);
    return repr;
}

inline void place(InputRepresentation& repr, int pos, int token_id, int segment) {
    repr.token_ids[static_cast<std::size_t>(pos)] = token_id;
    repr.segment_ids[static_cast<std::size_t>(pos)] = segment;
    repr.attention_mask[static_cast<std::size_t>(pos)] = 1;
}

}  // namespace detail

// [CLS] tokens [SEP], all segment 0; tokens tail-truncated to fit.
inline InputRepresentation encode_single(const std::vector<Token>& tokens, const Vocab& vocab,
                                         int max_seq_len) {
    require(max_seq_len >= 3, "encode_single: max_seq_len must be >= 3, got ", max_seq_len);
    auto repr = detail::blank_repr(max_seq_len, vocab.pad_id);
    const int keep = std::min<int>(static_cast<int>(tokens.size()), max_seq_len - 2);
    int pos = 0;
    detail::place(repr, pos++, vocab.cls_id, 0);
    for (int i = 0; i < keep; ++i) {
        detail::place(repr, pos++, tokens[static_cast<std::size_t>(i)].id, 0);
    }
    detail::place(repr, pos++, vocab.sep_id, 0);
    repr.real_length = pos;
    return repr;
}

// [CLS] a [SEP] with segment 0, then b [SEP] with segment 1. When the pair
// exceeds the budget, the longer sequence loses tokens from its tail first
// (b on ties), repeating until the pair fits.
inline InputRepresentation encode_pair(const std::vector<Token>& tokens_a,
                                       const std::vector<Token>& tokens_b, const Vocab& vocab,
                                       int max_seq_len) {
    require(max_seq_len >= 4, "encode_pair: max_seq_len must be >= 4, got ", max_seq_len);
    require(!tokens_a.empty(), "encode_pair: first sequence must be nonempty");
    int len_a = static_cast<int>(tokens_a.size());
    int len_b = static_cast<int>(tokens_b.size());
    const int budget = max_seq_len - 3;  // [CLS] and two [SEP]
    while (len_a + len_b > budget) {
        if (len_a > len_b) --len_a;
        else --len_b;
    }
    require(len_a >= 1, "encode_pair: budget too small to keep any token of the first sequence");

    auto repr = detail::blank_repr(max_seq_len, vocab.pad_id);
    int pos = 0;
    detail::place(repr, pos++, vocab.cls_id, 0);
    for (int i = 0; i < len_a; ++i) {
        detail::place(repr, pos++, tokens_a[static_cast<std::size_t>(i)].id, 0);
    }
    detail::place(repr, pos++, vocab.sep_id, 0);
    for (int i = 0; i < len_b; ++i) {
        detail::place(repr, pos++, tokens_b[static_cast<std::size_t>(i)].id, 1);
    }
    detail::place(repr, pos++, vocab.sep_id, 1);
    repr.real_length = pos;
    return repr;
}

template <class Scalar>
struct EmbeddingTablesT {
    Mat<Scalar> token;     // vocab_size x H
    Mat<Scalar> segment;   // 2 x H
    Mat<Scalar> position;  // max_positions x H
};

// output[i] = token[ids[i]] + segment[segments[i]] + position[i]
template <class Scalar>
Mat<Scalar> embed(const InputRepresentation& repr, const EmbeddingTablesT<Scalar>& tables) {
    const int seq_len = repr.max_seq_len();
    const auto hidden = tables.token.cols();
    require(tables.segment.cols() == hidden && tables.position.cols() == hidden,
            "embed: inconsistent hidden size across embedding tables");
    require(tables.position.rows() >= seq_len, "embed: position table has ",
            tables.position.rows(), " rows, need ", seq_len);
    Mat<Scalar> out(seq_len, hidden);
    for (int i = 0; i < seq_len; ++i) {
        const int tok = repr.token_ids[static_cast<std::size_t>(i)];
        const int seg = repr.segment_ids[static_cast<std::size_t>(i)];
        require(tok >= 0 && tok < tables.token.rows(), "embed: token id ", tok,
                " out of bounds at position ", i);
        require(seg >= 0 && seg < tables.segment.rows(), "embed: segment id ", seg,
                " out of bounds at position ", i);
        out.row(i) = tables.token.row(tok) + tables.segment.row(seg) + tables.position.row(i);
    }
    return out;
}

}  // namespace absa
