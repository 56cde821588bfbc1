#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace onn {

enum class OptimizerKind { Sgd, Adam, VarianceAdam };

std::string_view to_string(OptimizerKind kind);  // "sgd" | "adam" | "vadam"
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

/// Moment buffers for ADAM and its centered-variance variant.
struct AdamState {
    OptimizerConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::vector<double> mean;  // variance variant only
    std::uint64_t t = 0;

    static AdamState create(std::size_t size, const OptimizerConfig& config);
    bool initialized() const { return !m.empty(); }
};

/// m_t = b1 m + (1-b1) g, v_t = b2 v + (1-b2) g^2, p -= lr mhat / (sqrt(vhat) + eps).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// As adam_step, but the second moment is centered on a running mean:
///   mu_t = b2 mu + (1-b2) g,  v_t = b2 v + (1-b2) (g - mu_t)^2,
/// both bias-corrected.
void variance_adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

class Optimizer {
public:
    explicit Optimizer(const OptimizerConfig& config, std::size_t size);
    void step(std::span<double> params, std::span<const double> grads);
    const OptimizerConfig& config() const { return state_.config; }
    std::uint64_t steps() const { return state_.t; }

private:
    AdamState state_;
};

}  // namespace onn
