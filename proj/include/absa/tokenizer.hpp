// Subword tokenization: vocabulary loading, basic tokenization (lower-casing,
// whitespace and punctuation splitting), greedy first-longest-match WordPiece
// segmentation, and OOV accounting.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "absa/error.hpp"

namespace absa {

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kContinuationPrefix = "##";

// Immutable after construction; safe to share across threads.
struct Vocab {
    std::vector<std::string> entries;               // id = index
    std::unordered_map<std::string, int> id_of;
    int pad_id = -1, unk_id = -1, cls_id = -1, sep_id = -1, mask_id = -1;

    int size() const { return static_cast<int>(entries.size()); }

    bool contains(std::string_view token) const {
        return id_of.find(std::string(token)) != id_of.end();
    }

    // -1 when absent.
    int lookup(std::string_view token) const {
        auto it = id_of.find(std::string(token));
        return it == id_of.end() ? -1 : it->second;
    }

    const std::string& surface(int id) const {
        require(id >= 0 && id < size(), "vocab: id ", id, " out of range 0..", size() - 1);
        return entries[static_cast<std::size_t>(id)];
    }
};

struct Token {
    std::string surface;
    int id = -1;
    bool is_continuation = false;
};

struct OovStats {
    std::size_t total_words = 0;
    std::size_t oov_word_occurrences = 0;
    std::size_t unique_oov_words = 0;
    std::vector<std::pair<std::string, std::size_t>> oov_list;  // (word, frequency)
};

namespace uni {

// Minimal UTF-8 / character-class support. Classification covers ASCII plus
// the Unicode ranges that show up in review text; anything else passes
// through as a regular letter-like character.

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp <= 0x7f) {
        out.push_back(static_cast<char>(cp));
    } else if (cp <= 0x7ff) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp <= 0xffff) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

// Malformed bytes decode as U+FFFD, one replacement per bad byte.
inline std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char b = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        char32_t cp;
        if (b < 0x80) { cp = b; extra = 0; }
        else if ((b >> 5) == 0x6) { cp = b & 0x1f; extra = 1; }
        else if ((b >> 4) == 0xe) { cp = b & 0x0f; extra = 2; }
        else if ((b >> 3) == 0x1e) { cp = b & 0x07; extra = 3; }
        else { out.push_back(0xfffd); ++i; continue; }
        if (extra > 0 && i + extra >= s.size()) {
            out.push_back(0xfffd); ++i; continue;
        }
        bool ok = true;
        char32_t acc = cp;
        for (std::size_t k = 1; k <= extra; ++k) {
            unsigned char c = static_cast<unsigned char>(s[i + k]);
            if ((c >> 6) != 0x2) { ok = false; break; }
            acc = (acc << 6) | (c & 0x3f);
        }
        if (!ok) { out.push_back(0xfffd); ++i; continue; }
        out.push_back(acc);
        i += extra + 1;
    }
    return out;
}

inline std::string encode_utf8(const std::vector<char32_t>& cps, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) append_utf8(out, cps[i]);
    return out;
}

inline bool is_whitespace(char32_t c) {
    if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == 0x0b || c == 0x0c) return true;
    if (c == 0xa0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200a)) return true;
    return c == 0x2028 || c == 0x2029 || c == 0x202f || c == 0x205f || c == 0x3000;
}

inline bool is_control(char32_t c) {
    if (c == U'\t' || c == U'\n' || c == U'\r') return false;  // treated as whitespace
    if (c < 0x20 || c == 0x7f) return true;
    return (c >= 0x200b && c <= 0x200f) || c == 0xfeff;  // zero-width / BOM
}

inline bool is_punctuation(char32_t c) {
    if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
        (c >= 123 && c <= 126)) {
        return true;
    }
    // General punctuation, CJK symbols, and fullwidth forms.
    return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205e) ||
           (c >= 0x3001 && c <= 0x303f) || (c >= 0xff01 && c <= 0xff0f) ||
           (c >= 0xff1a && c <= 0xff20) || (c >= 0xff3b && c <= 0xff40) ||
           (c >= 0xff5b && c <= 0xff65);
}

inline char32_t to_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 0x20;
    if (c >= 0xc0 && c <= 0xde && c != 0xd7) return c + 0x20;          // Latin-1
    if (c >= 0x100 && c <= 0x177 && (c % 2 == 0)) return c + 1;       // Latin Ext-A pairs
    if (c >= 0x179 && c <= 0x17d && (c % 2 == 1)) return c + 1;
    return c;
}

// Latin-1 / Latin Ext-A accented letter -> base ASCII letter.
inline std::optional<char32_t> strip_accent(char32_t c) {
    struct Range { char32_t lo, hi; char base; };
    static constexpr Range kRanges[] = {
        {0xe0, 0xe5, 'a'}, {0xe7, 0xe7, 'c'}, {0xe8, 0xeb, 'e'}, {0xec, 0xef, 'i'},
        {0xf1, 0xf1, 'n'}, {0xf2, 0xf6, 'o'}, {0xf9, 0xfc, 'u'}, {0xfd, 0xfd, 'y'},
        {0xff, 0xff, 'y'}, {0x101, 0x105, 'a'}, {0x107, 0x10d, 'c'}, {0x10f, 0x111, 'd'},
        {0x113, 0x11b, 'e'}, {0x11d, 0x123, 'g'}, {0x125, 0x127, 'h'}, {0x129, 0x131, 'i'},
        {0x135, 0x135, 'j'}, {0x137, 0x138, 'k'}, {0x13a, 0x142, 'l'}, {0x144, 0x148, 'n'},
        {0x14d, 0x151, 'o'}, {0x155, 0x159, 'r'}, {0x15b, 0x161, 's'}, {0x163, 0x167, 't'},
        {0x169, 0x173, 'u'}, {0x175, 0x175, 'w'}, {0x177, 0x177, 'y'}, {0x17a, 0x17e, 'z'},
    };
    for (const auto& r : kRanges) {
        if (c >= r.lo && c <= r.hi) return static_cast<char32_t>(r.base);
    }
    return std::nullopt;
}

}  // namespace uni

struct TokenizerOptions {
    bool strip_accents = false;     // off: Indonesian text rarely needs it
    int max_word_chars = 200;       // longer words fall back to [UNK]
};

// One token per line, 0-based line number is the id. Byte-compatible with
// published BERT vocabulary files.
inline Vocab load_vocab(std::istream& in) {
    Vocab v;
    std::string line;
    int line_no = 0;
    bool saw_any = false;
    while (std::getline(in, line)) {
        saw_any = true;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        require(!line.empty(), "vocab: empty token at line ", line_no);
        auto [it, inserted] = v.id_of.emplace(line, line_no);
        require(inserted, "vocab: duplicate token \"", line, "\" at lines ", it->second,
                " and ", line_no);
        v.entries.push_back(line);
        ++line_no;
    }
    require(saw_any, "vocab: empty stream");
    auto special = [&](std::string_view name) {
        int id = v.lookup(name);
        require(id >= 0, "vocab: missing special token ", name);
        return id;
    };
    v.pad_id = special(kPadToken);
    v.unk_id = special(kUnkToken);
    v.cls_id = special(kClsToken);
    v.sep_id = special(kSepToken);
    v.mask_id = special(kMaskToken);
    return v;
}

inline Vocab load_vocab_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "vocab: cannot open ", path);
    return load_vocab(in);
}

// Lower-cases, drops control characters, splits on whitespace, and makes
// every punctuation character its own word.
inline std::vector<std::string> basic_tokenize(std::string_view text,
                                               const TokenizerOptions& opts = {}) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    };
    for (char32_t cp : uni::decode_utf8(text)) {
        if (uni::is_control(cp) || cp == 0) continue;
        if (uni::is_whitespace(cp)) {
            flush();
            continue;
        }
        cp = uni::to_lower(cp);
        if (opts.strip_accents) {
            if (auto base = uni::strip_accent(cp)) cp = *base;
        }
        if (uni::is_punctuation(cp)) {
            flush();
            uni::append_utf8(current, cp);
            flush();
            continue;
        }
        uni::append_utf8(current, cp);
    }
    flush();
    return words;
}

// Greedy first-longest-match segmentation of a single word. Every failure
// mode collapses to the single piece [UNK].
inline std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab,
                                          int max_word_chars = 200) {
    std::vector<char32_t> cps = uni::decode_utf8(word);
    if (cps.empty() || static_cast<int>(cps.size()) > max_word_chars) {
        return {std::string(kUnkToken)};
    }
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < cps.size()) {
        std::size_t end = cps.size();
        std::string match;
        while (end > start) {
            std::string candidate;
            if (start > 0) candidate = std::string(kContinuationPrefix);
            candidate += uni::encode_utf8(cps, start, end);
            if (vocab.contains(candidate)) {
                match = std::move(candidate);
                break;
            }
            --end;
        }
        if (match.empty()) return {std::string(kUnkToken)};
        pieces.push_back(std::move(match));
        start = end;
    }
    return pieces;
}

inline std::vector<Token> tokenize(std::string_view text, const Vocab& vocab,
                                   const TokenizerOptions& opts = {}) {
    std::vector<Token> tokens;
    for (const std::string& word : basic_tokenize(text, opts)) {
        for (std::string& piece : wordpiece(word, vocab, opts.max_word_chars)) {
            Token t;
            t.is_continuation = piece.rfind(kContinuationPrefix, 0) == 0;
            t.id = vocab.lookup(piece);
            t.surface = std::move(piece);
            tokens.push_back(std::move(t));
        }
    }
    return tokens;
}

// A word is OOV iff its segmentation is exactly [UNK]. The list is sorted by
// descending frequency, then by word, so reports are stable.
inline OovStats oov_stats(const std::vector<std::string>& corpus, const Vocab& vocab,
                          const TokenizerOptions& opts = {}) {
    OovStats stats;
    std::map<std::string, std::size_t> freq;
    for (const std::string& text : corpus) {
        for (const std::string& word : basic_tokenize(text, opts)) {
            ++stats.total_words;
            auto pieces = wordpiece(word, vocab, opts.max_word_chars);
            if (pieces.size() == 1 && pieces[0] == kUnkToken) {
                ++stats.oov_word_occurrences;
                ++freq[word];
            }
        }
    }
    stats.oov_list.assign(freq.begin(), freq.end());
    std::sort(stats.oov_list.begin(), stats.oov_list.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    stats.unique_oov_words = stats.oov_list.size();
    return stats;
}

}  // namespace absa
