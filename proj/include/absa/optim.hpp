// Adam with bias correction, applied to a flat list of tensor spans so the
// encoder body and any task head share one optimizer step.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "absa/error.hpp"

namespace absa {

template <class S>
struct TensorSpan {
    S* param = nullptr;
    const S* grad = nullptr;
    std::size_t size = 0;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Zips two identically shaped parameter structures (values and gradients)
// into optimizer spans, relying on for_each_param's fixed visit order.
template <class S, class Params>
std::vector<TensorSpan<S>> collect_spans(Params& params, const Params& grads) {
    std::vector<TensorSpan<S>> spans;
    for_each_param(params, [&](const std::string&, auto& tensor) {
        spans.push_back({tensor.data(), nullptr, static_cast<std::size_t>(tensor.size())});
    });
    std::size_t i = 0;
    for_each_param(grads, [&](const std::string&, const auto& tensor) {
        require(i < spans.size() && spans[i].size == static_cast<std::size_t>(tensor.size()),
                "collect_spans: gradient structure does not match parameters");
        spans[i].grad = tensor.data();
        ++i;
    });
    require(i == spans.size(), "collect_spans: traversal mismatch");
    return spans;
}

template <class S>
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    long step_count() const { return step_; }

    void step(const std::vector<TensorSpan<S>>& spans) {
        std::size_t total = 0;
        for (const auto& s : spans) total += s.size;
        if (m_.empty()) {
            m_.assign(total, S(0));
            v_.assign(total, S(0));
        }
        require(m_.size() == total, "adam: parameter count changed from ", m_.size(), " to ",
                total);
        ++step_;
        const S lr = static_cast<S>(config_.learning_rate);
        const S b1 = static_cast<S>(config_.beta1);
        const S b2 = static_cast<S>(config_.beta2);
        const S eps = static_cast<S>(config_.epsilon);
        const S corr1 = S(1) - static_cast<S>(std::pow(config_.beta1, step_));
        const S corr2 = S(1) - static_cast<S>(std::pow(config_.beta2, step_));
        std::size_t off = 0;
        for (const auto& s : spans) {
            for (std::size_t i = 0; i < s.size; ++i) {
                const S g = s.grad[i];
                S& m = m_[off + i];
                S& v = v_[off + i];
                m = b1 * m + (S(1) - b1) * g;
                v = b2 * v + (S(1) - b2) * g * g;
                const S mhat = m / corr1;
                const S vhat = v / corr2;
                s.param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
            off += s.size;
        }
    }

private:
    AdamConfig config_;
    long step_ = 0;
    std::vector<S> m_, v_;
};

}  // namespace absa
