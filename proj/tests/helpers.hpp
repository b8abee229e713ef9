// Shared test fixtures: small vocabularies, a loop-by-loop reference encoder
// used as an independent oracle for the Eigen implementation, and a central
// finite-difference gradient checker.
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "absa/absa.hpp"

namespace testutil {

inline absa::Vocab make_vocab(const std::vector<std::string>& words) {
    std::ostringstream stream;
    stream << "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\n";
    for (const auto& w : words) stream << w << "\n";
    std::istringstream in(stream.str());
    return absa::load_vocab(in);
}

// Vocabulary slice that reproduces the published multilingual segmentation of
// "kamarnya bersih dan pelayanannya bagus": the twelve pieces are present and
// no longer prefix of any of the five words is.
inline absa::Vocab mbert_slice_vocab() {
    return make_vocab({"kama", "##rny", "##a", "be", "##rsi", "##h", "dan", "pela", "##yanan",
                       "##nya", "bag", "##us"});
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("absa_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---- reference encoder -------------------------------------------------
// Scalar re-implementation of the forward pass, written with explicit loops
// and std::vector only. Used to cross-check the production implementation.

using DVec = std::vector<double>;
using DMat = std::vector<DVec>;

inline double ref_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline DMat ref_layer_norm(const DMat& x, const absa::Vec<double>& gain,
                           const absa::Vec<double>& bias) {
    const double eps = 1e-12;
    DMat out(x.size(), DVec(x.empty() ? 0 : x[0].size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t h = x[i].size();
        double mean = 0;
        for (double v : x[i]) mean += v;
        mean /= static_cast<double>(h);
        double var = 0;
        for (double v : x[i]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(h);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < h; ++j) {
            out[i][j] = gain(static_cast<Eigen::Index>(j)) * (x[i][j] - mean) * inv +
                        bias(static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

struct RefEncoderOut {
    DMat hidden;  // max_seq_len x H
    DVec cls;
};

inline RefEncoderOut reference_encoder(const absa::InputRepresentation& repr,
                                       const absa::EncoderParamsT<double>& p,
                                       const absa::EncoderConfig& config) {
    const int T = repr.max_seq_len();
    const int H = config.hidden;
    const int A = config.heads;
    const int d = H / A;
    const int F = config.ffn();
    const int r = repr.real_length;

    DMat embedded(static_cast<std::size_t>(T), DVec(static_cast<std::size_t>(H)));
    for (int i = 0; i < T; ++i) {
        for (int j = 0; j < H; ++j) {
            embedded[i][j] = p.embeddings.token(repr.token_ids[i], j) +
                             p.embeddings.segment(repr.segment_ids[i], j) +
                             p.embeddings.position(i, j);
        }
    }

    DMat x(embedded.begin(), embedded.begin() + r);
    for (const auto& lay : p.layers) {
        // x . W + b for q, k, v
        auto project = [&](const absa::Mat<double>& w, const absa::Vec<double>& b) {
            DMat out(static_cast<std::size_t>(r), DVec(static_cast<std::size_t>(H)));
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < H; ++j) {
                    double acc = b(j);
                    for (int k = 0; k < H; ++k) acc += x[i][k] * w(k, j);
                    out[i][j] = acc;
                }
            }
            return out;
        };
        DMat q = project(lay.wq, lay.bq), k = project(lay.wk, lay.bk), v = project(lay.wv, lay.bv);

        DMat concat(static_cast<std::size_t>(r), DVec(static_cast<std::size_t>(H), 0.0));
        for (int head = 0; head < A; ++head) {
            const int off = head * d;
            for (int i = 0; i < r; ++i) {
                DVec scores(static_cast<std::size_t>(r));
                double max_score = -1e300;
                for (int j = 0; j < r; ++j) {
                    if (repr.attention_mask[j] == 0) continue;
                    double acc = 0;
                    for (int c = 0; c < d; ++c) acc += q[i][off + c] * k[j][off + c];
                    scores[j] = acc / std::sqrt(static_cast<double>(d));
                    max_score = std::max(max_score, scores[j]);
                }
                double z = 0;
                DVec probs(static_cast<std::size_t>(r), 0.0);
                for (int j = 0; j < r; ++j) {
                    if (repr.attention_mask[j] == 0) continue;
                    probs[j] = std::exp(scores[j] - max_score);
                    z += probs[j];
                }
                for (int j = 0; j < r; ++j) {
                    if (probs[j] == 0.0) continue;
                    const double w = probs[j] / z;
                    for (int c = 0; c < d; ++c) concat[i][off + c] += w * v[j][off + c];
                }
            }
        }

        DMat attn_out(static_cast<std::size_t>(r), DVec(static_cast<std::size_t>(H)));
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < H; ++j) {
                double acc = lay.bo(j);
                for (int c = 0; c < H; ++c) acc += concat[i][c] * lay.wo(c, j);
                attn_out[i][j] = acc + x[i][j];  // residual
            }
        }
        DMat mid = ref_layer_norm(attn_out, lay.ln1_gain, lay.ln1_bias);

        DMat resid2(static_cast<std::size_t>(r), DVec(static_cast<std::size_t>(H)));
        for (int i = 0; i < r; ++i) {
            DVec act(static_cast<std::size_t>(F));
            for (int f = 0; f < F; ++f) {
                double acc = lay.ffn_b_in(f);
                for (int c = 0; c < H; ++c) acc += mid[i][c] * lay.ffn_w_in(c, f);
                act[f] = ref_gelu(acc);
            }
            for (int j = 0; j < H; ++j) {
                double acc = lay.ffn_b_out(j);
                for (int f = 0; f < F; ++f) acc += act[f] * lay.ffn_w_out(f, j);
                resid2[i][j] = acc + mid[i][j];
            }
        }
        x = ref_layer_norm(resid2, lay.ln2_gain, lay.ln2_bias);
    }

    RefEncoderOut out;
    out.hidden = embedded;
    for (int i = 0; i < r; ++i) out.hidden[i] = x[i];
    out.cls.resize(static_cast<std::size_t>(H));
    if (config.bypass_pooler) {
        out.cls = out.hidden[0];
    } else {
        for (int j = 0; j < H; ++j) {
            double acc = p.pooler_b(j);
            for (int kk = 0; kk < H; ++kk) acc += p.pooler_w(kk, j) * out.hidden[0][kk];
            out.cls[j] = std::tanh(acc);
        }
    }
    return out;
}

// ---- finite differences ------------------------------------------------

struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst_param;
};

// Central differences over every encoder parameter. `loss` must read `params`
// on each call; `analytic` holds the gradients under test.
inline GradCheckResult grad_check(absa::EncoderParamsT<double>& params,
                                  const absa::EncoderParamsT<double>& analytic,
                                  const std::function<double()>& loss, double h = 1e-5) {
    std::vector<std::pair<std::string, absa::Mat<double>*>> mats;
    std::vector<std::pair<std::string, absa::Vec<double>*>> vecs;
    absa::for_each_param(params, [&](const std::string& name, auto& tensor) {
        using T = std::decay_t<decltype(tensor)>;
        if constexpr (std::is_same_v<T, absa::Mat<double>>) mats.emplace_back(name, &tensor);
        else vecs.emplace_back(name, &tensor);
    });
    std::vector<std::pair<std::string, const absa::Mat<double>*>> amats;
    std::vector<std::pair<std::string, const absa::Vec<double>*>> avecs;
    absa::for_each_param(analytic, [&](const std::string& name, const auto& tensor) {
        using T = std::decay_t<decltype(tensor)>;
        if constexpr (std::is_same_v<T, absa::Mat<double>>) amats.emplace_back(name, &tensor);
        else avecs.emplace_back(name, &tensor);
    });

    GradCheckResult result;
    auto probe = [&](const std::string& name, double* value, double analytic_grad) {
        const double saved = *value;
        *value = saved + h;
        const double up = loss();
        *value = saved - h;
        const double down = loss();
        *value = saved;
        const double numeric = (up - down) / (2.0 * h);
        // the 1e-4 floor keeps finite-difference noise on near-zero gradients
        // from registering as relative error
        const double denom = std::max({std::abs(numeric), std::abs(analytic_grad), 1e-4});
        const double rel = std::abs(numeric - analytic_grad) / denom;
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_param = name;
        }
    };
    for (std::size_t m = 0; m < mats.size(); ++m) {
        auto* t = mats[m].second;
        const auto* a = amats[m].second;
        for (Eigen::Index i = 0; i < t->size(); ++i) {
            probe(mats[m].first, t->data() + i, a->data()[i]);
        }
    }
    for (std::size_t m = 0; m < vecs.size(); ++m) {
        auto* t = vecs[m].second;
        const auto* a = avecs[m].second;
        for (Eigen::Index i = 0; i < t->size(); ++i) {
            probe(vecs[m].first, t->data() + i, a->data()[i]);
        }
    }
    return result;
}

// Representation with random payload tokens; prefix positions all attend.
inline absa::InputRepresentation random_repr(absa::Rng& rng, int max_seq_len, int real_length,
                                             int vocab_size, int pad_id = 0) {
    absa::InputRepresentation repr;
    repr.token_ids.assign(static_cast<std::size_t>(max_seq_len), pad_id);
    repr.segment_ids.assign(static_cast<std::size_t>(max_seq_len), 0);
    repr.position_ids.resize(static_cast<std::size_t>(max_seq_len));
    repr.attention_mask.assign(static_cast<std::size_t>(max_seq_len), 0);
    for (int i = 0; i < max_seq_len; ++i) repr.position_ids[i] = i;
    for (int i = 0; i < real_length; ++i) {
        repr.token_ids[i] = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(vocab_size)));
        repr.segment_ids[i] = i > real_length / 2 ? 1 : 0;
        repr.attention_mask[i] = 1;
    }
    repr.real_length = real_length;
    return repr;
}

}  // namespace testutil
