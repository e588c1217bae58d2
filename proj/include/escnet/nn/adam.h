#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "escnet/core/errors.h"
#include "escnet/nn/layers.h"

namespace escnet::nn {

// Adam with bias correction. Moment estimates live here, keyed by the
// position of each parameter in the list handed to the constructor.
template <typename T>
class Adam {
public:
    struct Slot {
        std::vector<T> m, v;
    };

    explicit Adam(std::vector<ParamRef<T>> params,
                  T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        slots_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            slots_[i].m.assign(params_[i].tensor.size(), T(0));
            slots_[i].v.assign(params_[i].tensor.size(), T(0));
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    void step(T lr) {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(step_count_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& value = params_[i].tensor.data();
            const auto& grad = params_[i].tensor.grad();
            auto& slot = slots_[i];
            for (size_t j = 0; j < value.size(); ++j) {
                const T g = grad[j];
                if (!std::isfinite(static_cast<double>(g))) {
                    throw TrainingError("non-finite gradient in parameter " + params_[i].name);
                }
                slot.m[j] = beta1_ * slot.m[j] + (T(1) - beta1_) * g;
                slot.v[j] = beta2_ * slot.v[j] + (T(1) - beta2_) * g * g;
                const double m_hat = static_cast<double>(slot.m[j]) / bc1;
                const double v_hat = static_cast<double>(slot.v[j]) / bc2;
                value[j] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + static_cast<double>(eps_)));
            }
        }
    }

    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t n) { step_count_ = n; }
    const std::vector<ParamRef<T>>& params() const { return params_; }
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<Slot> slots_;
    T beta1_, beta2_, eps_;
    int64_t step_count_ = 0;
};

} // namespace escnet::nn
