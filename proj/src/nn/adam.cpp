#include "amc/nn/adam.hpp"

#include <cmath>
#include <string>

namespace amc::nn {

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidArgument("ADAM betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw InvalidArgument("ADAM epsilon must be positive");
}

template <typename T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
    config_.validate();
}

template <typename T>
void Adam<T>::step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads) {
    if (params.size() != grads.size())
        throw ShapeError("adam: " + std::to_string(params.size()) + " parameter tensors but " +
                         std::to_string(grads.size()) + " gradients");
    if (m_.empty()) {
        for (const auto* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != m_[i].shape())
            throw ShapeError("adam: tensor " + std::to_string(i) + " has parameter shape " +
                             params[i]->shape_string() + ", gradient shape " + grads[i]->shape_string());
        for (T g : grads[i]->values())
            if (!std::isfinite(g)) throw TrainingDivergence("non-finite gradient in tensor " + std::to_string(i));
    }

    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate, eps = config_.epsilon;
    for (std::size_t i = 0; i < params.size(); ++i) {
        T* p = params[i]->data();
        const T* g = grads[i]->data();
        T* m = m_[i].data();
        T* v = v_[i].data();
        for (std::size_t j = 0; j < params[i]->size(); ++j) {
            const double gj = g[j];
            const double mj = b1 * m[j] + (1.0 - b1) * gj;
            const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / c1;
            const double vhat = vj / c2;
            p[j] = static_cast<T>(p[j] - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace amc::nn
