#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "onn/tensor.hpp"

namespace onn {

enum class NodalKind { Mul, Cubic, Sin, Exp, Sinh, Sinc, Chirp, SignedLog, Custom };
enum class PoolKind { Sum, Median, Max };
enum class ActivationKind { Tanh, LinCut, Identity };

struct NodalPartials {
    double value;
    double d_dy;
    double d_dw;
};

/// A nodal function psi(y, w) together with its partial derivatives.
/// Builtin kinds are dispatched to inlined kernels; Custom goes through the pointers.
struct NodalOp {
    NodalKind kind = NodalKind::Mul;
    std::string_view name = "mul";
    double (*eval)(double y, double w) = nullptr;
    NodalPartials (*partials)(double y, double w) = nullptr;

    friend bool operator==(const NodalOp& a, const NodalOp& b) { return a.kind == b.kind && a.name == b.name; }
};

// Saturation bound applied to the exp/sinh argument.
inline constexpr double kExpClamp = 20.0;

const NodalOp& nodal_op(NodalKind kind);
std::span<const NodalOp> builtin_nodal_ops();

std::string_view to_string(PoolKind kind);
std::string_view to_string(ActivationKind kind);
std::optional<NodalOp> parse_nodal(std::string_view name);
std::optional<PoolKind> parse_pool(std::string_view name);
std::optional<ActivationKind> parse_activation(std::string_view name);

struct OperatorSet {
    NodalOp nodal = nodal_op(NodalKind::Mul);
    PoolKind pool = PoolKind::Sum;
    ActivationKind activation = ActivationKind::Tanh;

    std::string name() const;  // e.g. "sinh-sum-tanh"
    friend bool operator==(const OperatorSet&, const OperatorSet&) = default;
};

/// Lexicographic order over (nodal, pool, activation) id strings.
bool lexicographic_less(const OperatorSet& a, const OperatorSet& b);

OperatorSet parse_operator_set(std::string_view text);  // "nodal-pool-activation"

inline OperatorSet convolution_set(ActivationKind activation) {
    return {nodal_op(NodalKind::Mul), PoolKind::Sum, activation};
}

/// The operator set library searched by SPM: a list of distinct sets.
class OperatorLibrary {
public:
    OperatorLibrary() = default;
    explicit OperatorLibrary(std::vector<OperatorSet> sets);

    /// Cartesian product of the given nodal/pool/activation choices.
    static OperatorLibrary product(std::span<const NodalOp> nodals, std::span<const PoolKind> pools,
                                   std::span<const ActivationKind> activations);
    /// All 8 nodal x 3 pool x 3 activation builtin combinations.
    static OperatorLibrary default_library();

    std::span<const OperatorSet> sets() const { return sets_; }
    std::size_t size() const { return sets_.size(); }
    bool empty() const { return sets_.empty(); }
    bool contains(const OperatorSet& set) const;
    std::optional<std::size_t> index_of(const OperatorSet& set) const;
    const OperatorSet& operator[](std::size_t i) const { return sets_[i]; }

private:
    std::vector<OperatorSet> sets_;
};

// Scalar pointwise functions.
double activation_eval(ActivationKind kind, double x);
double activation_deriv(ActivationKind kind, double x);

// Matrix-level operations over patch matrices.
Tensor nodal_forward(const NodalOp& op, const Tensor& patches, const Tensor& weights);

struct NodalGrads {
    Tensor d_input;
    Tensor d_weight;
};
NodalGrads nodal_backward(const NodalOp& op, const Tensor& patches, const Tensor& weights, const Tensor& upstream);

/// Row-wise aggregation. For Median/Max the chosen column of every row is recorded.
struct PoolResult {
    std::vector<double> values;
    std::vector<std::size_t> selected;  // empty for Sum
};

PoolResult pool_forward(PoolKind kind, const Tensor& z);
Tensor pool_backward(PoolKind kind, const Tensor& z, const PoolResult& forward, std::span<const double> upstream);

/// Index of the pooled element in a row: lower-middle order statistic for Median,
/// first maximum for Max. Ties resolve to the lowest column.
std::size_t select_in_row(PoolKind kind, std::span<const double> row);

std::vector<double> activation_forward(ActivationKind kind, std::span<const double> x);
std::vector<double> activation_backward(ActivationKind kind, std::span<const double> x,
                                        std::span<const double> upstream);

}  // namespace onn
