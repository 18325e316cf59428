#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amc/nn/tensor.hpp"

namespace amc::nn {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// ADAM with bias correction. Moment buffers are created on the first step
/// and must keep matching the parameter shapes afterwards.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig config = {});

    /// Throws TrainingDivergence if any gradient is non-finite; parameters
    /// are left untouched in that case.
    void step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads);

    const AdamConfig& config() const { return config_; }
    std::uint64_t steps() const { return t_; }
    const std::vector<Tensor<T>>& first_moments() const { return m_; }
    const std::vector<Tensor<T>>& second_moments() const { return v_; }

private:
    AdamConfig config_;
    std::uint64_t t_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace amc::nn
