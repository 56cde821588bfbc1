#include "onn/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace onn {

std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::VarianceAdam: return "vadam";
    }
    return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "vadam") return OptimizerKind::VarianceAdam;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected sgd, adam or vadam)");
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

AdamState AdamState::create(std::size_t size, const OptimizerConfig& config) {
    if (size == 0) throw std::invalid_argument("optimizer state needs at least one parameter");
    AdamState s;
    s.config = config;
    s.m.assign(size, 0.0);
    s.v.assign(size, 0.0);
    if (config.kind == OptimizerKind::VarianceAdam) s.mean.assign(size, 0.0);
    return s;
}

namespace {

void check(const AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (!state.initialized()) throw std::logic_error("optimizer state is not initialized");
    if (params.size() != state.m.size() || grads.size() != state.m.size())
        throw std::invalid_argument("optimizer: parameter/gradient size does not match state");
}

}  // namespace

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
    check(s, params, grads);
    const auto& c = s.config;
    ++s.t;
    const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
        s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = s.m[i] / c1;
        const double v_hat = s.v[i] / c2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

void variance_adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
    check(s, params, grads);
    if (s.mean.size() != s.m.size()) throw std::logic_error("variance ADAM state has no running mean");
    const auto& c = s.config;
    ++s.t;
    const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
        s.mean[i] = c.beta2 * s.mean[i] + (1.0 - c.beta2) * g;
        const double centered = g - s.mean[i];
        s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * centered * centered;
        const double m_hat = s.m[i] / c1;
        const double v_hat = s.v[i] / c2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t size) {
    if (config.kind == OptimizerKind::Sgd) {
        state_.config = config;
        state_.m.assign(size, 0.0);  // marks the state as sized
    } else {
        state_ = AdamState::create(size, config);
    }
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
    switch (state_.config.kind) {
        case OptimizerKind::Sgd:
            if (params.size() != state_.m.size()) throw std::invalid_argument("optimizer: size mismatch");
            sgd_step(params, grads, state_.config.lr);
            ++state_.t;
            break;
        case OptimizerKind::Adam: adam_step(state_, params, grads); break;
        case OptimizerKind::VarianceAdam: variance_adam_step(state_, params, grads); break;
    }
}

}  // namespace onn
