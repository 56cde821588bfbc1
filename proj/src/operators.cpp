#include "onn/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "onn/nodal_functions.hpp"

namespace onn {

namespace {

template <class F>
NodalOp make_builtin(NodalKind kind, std::string_view name) {
    return NodalOp{kind, name, [](double y, double w) { return F::value(y, w); },
                   [](double y, double w) { return F::partials(y, w); }};
}

const std::array<NodalOp, 8>& builtin_table() {
    static const std::array<NodalOp, 8> table = {
        make_builtin<nodal::Mul>(NodalKind::Mul, "mul"),
        make_builtin<nodal::Cubic>(NodalKind::Cubic, "cubic"),
        make_builtin<nodal::Sin>(NodalKind::Sin, "sin"),
        make_builtin<nodal::Exp>(NodalKind::Exp, "exp"),
        make_builtin<nodal::Sinh>(NodalKind::Sinh, "sinh"),
        make_builtin<nodal::Sinc>(NodalKind::Sinc, "sinc"),
        make_builtin<nodal::Chirp>(NodalKind::Chirp, "chirp"),
        make_builtin<nodal::SignedLog>(NodalKind::SignedLog, "log"),
    };
    return table;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

const NodalOp& nodal_op(NodalKind kind) {
    if (kind == NodalKind::Custom) throw std::invalid_argument("custom nodal ops are not registered by kind");
    return builtin_table()[static_cast<std::size_t>(kind)];
}

std::span<const NodalOp> builtin_nodal_ops() { return builtin_table(); }

std::string_view to_string(PoolKind kind) {
    switch (kind) {
        case PoolKind::Sum: return "sum";
        case PoolKind::Median: return "median";
        case PoolKind::Max: return "max";
    }
    return "?";
}

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::LinCut: return "lincut";
        case ActivationKind::Identity: return "identity";
    }
    return "?";
}

std::optional<NodalOp> parse_nodal(std::string_view name) {
    for (const auto& op : builtin_table())
        if (op.name == name) return op;
    return std::nullopt;
}

std::optional<PoolKind> parse_pool(std::string_view name) {
    for (auto k : {PoolKind::Sum, PoolKind::Median, PoolKind::Max})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::optional<ActivationKind> parse_activation(std::string_view name) {
    for (auto k : {ActivationKind::Tanh, ActivationKind::LinCut, ActivationKind::Identity})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::string OperatorSet::name() const {
    std::string out(nodal.name);
    out += '-';
    out += to_string(pool);
    out += '-';
    out += to_string(activation);
    return out;
}

bool lexicographic_less(const OperatorSet& a, const OperatorSet& b) {
    return std::make_tuple(a.nodal.name, to_string(a.pool), to_string(a.activation)) <
           std::make_tuple(b.nodal.name, to_string(b.pool), to_string(b.activation));
}

OperatorSet parse_operator_set(std::string_view text) {
    const auto first = text.find('-');
    const auto second = first == std::string_view::npos ? first : text.find('-', first + 1);
    if (second == std::string_view::npos)
        throw std::invalid_argument("operator set must look like nodal-pool-activation: " + std::string(text));
    auto nodal = parse_nodal(text.substr(0, first));
    auto pool = parse_pool(text.substr(first + 1, second - first - 1));
    auto act = parse_activation(text.substr(second + 1));
    if (!nodal || !pool || !act) throw std::invalid_argument("unknown operator id in " + std::string(text));
    return {*nodal, *pool, *act};
}

OperatorLibrary::OperatorLibrary(std::vector<OperatorSet> sets) : sets_(std::move(sets)) {
    for (std::size_t i = 0; i < sets_.size(); ++i)
        for (std::size_t j = i + 1; j < sets_.size(); ++j)
            if (sets_[i] == sets_[j]) throw std::invalid_argument("duplicate operator set " + sets_[i].name());
}

OperatorLibrary OperatorLibrary::product(std::span<const NodalOp> nodals, std::span<const PoolKind> pools,
                                         std::span<const ActivationKind> activations) {
    std::vector<OperatorSet> sets;
    for (const auto& n : nodals)
        for (auto p : pools)
            for (auto a : activations) sets.push_back({n, p, a});
    return OperatorLibrary(std::move(sets));
}

OperatorLibrary OperatorLibrary::default_library() {
    static const std::array pools = {PoolKind::Sum, PoolKind::Median, PoolKind::Max};
    static const std::array acts = {ActivationKind::Tanh, ActivationKind::LinCut, ActivationKind::Identity};
    return product(builtin_nodal_ops(), pools, acts);
}

bool OperatorLibrary::contains(const OperatorSet& set) const { return index_of(set).has_value(); }

std::optional<std::size_t> OperatorLibrary::index_of(const OperatorSet& set) const {
    for (std::size_t i = 0; i < sets_.size(); ++i)
        if (sets_[i] == set) return i;
    return std::nullopt;
}

double activation_eval(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Tanh: return std::tanh(x);
        case ActivationKind::LinCut: return std::clamp(x, -1.0, 1.0);
        case ActivationKind::Identity: return x;
    }
    return x;
}

double activation_deriv(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActivationKind::LinCut: return (x > -1.0 && x < 1.0) ? 1.0 : 0.0;
        case ActivationKind::Identity: return 1.0;
    }
    return 1.0;
}

Tensor nodal_forward(const NodalOp& op, const Tensor& patches, const Tensor& weights) {
    require_same_shape(patches, weights, "nodal_forward");
    Tensor z(patches.shape());
    for (std::size_t e = 0; e < z.size(); ++e) z[e] = op.eval(patches[e], weights[e]);
    return z;
}

NodalGrads nodal_backward(const NodalOp& op, const Tensor& patches, const Tensor& weights, const Tensor& upstream) {
    require_same_shape(patches, weights, "nodal_backward");
    require_same_shape(patches, upstream, "nodal_backward");
    NodalGrads g{Tensor(patches.shape()), Tensor(patches.shape())};
    for (std::size_t e = 0; e < patches.size(); ++e) {
        const auto p = op.partials(patches[e], weights[e]);
        g.d_input[e] = upstream[e] * p.d_dy;
        g.d_weight[e] = upstream[e] * p.d_dw;
    }
    return g;
}

std::size_t select_in_row(PoolKind kind, std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("pool over an empty row");
    if (kind == PoolKind::Max) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[best]) best = j;
        return best;
    }
    if (kind == PoolKind::Median) {
        // Lower-middle order statistic, then the lowest column holding that value.
        std::vector<double> scratch(row.begin(), row.end());
        const auto k = static_cast<std::ptrdiff_t>((row.size() - 1) / 2);
        std::nth_element(scratch.begin(), scratch.begin() + k, scratch.end());
        const double v = scratch[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < row.size(); ++j)
            if (row[j] == v) return j;
    }
    throw std::invalid_argument("select_in_row: pool kind has no single selected element");
}

PoolResult pool_forward(PoolKind kind, const Tensor& z) {
    if (z.rank() != 2 || z.cols() == 0) throw std::invalid_argument("pool_forward: empty rows");
    PoolResult out;
    out.values.resize(z.rows());
    if (kind != PoolKind::Sum) out.selected.resize(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto row = z.row(i);
        if (kind == PoolKind::Sum) {
            double s = 0.0;
            for (double v : row) s += v;
            out.values[i] = s;
        } else {
            const auto j = select_in_row(kind, row);
            out.selected[i] = j;
            out.values[i] = row[j];
        }
    }
    return out;
}

Tensor pool_backward(PoolKind kind, const Tensor& z, const PoolResult& forward, std::span<const double> upstream) {
    if (upstream.size() != z.rows()) throw std::invalid_argument("pool_backward: upstream length mismatch");
    Tensor g(z.shape());
    if (kind == PoolKind::Sum) {
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) g(i, j) = upstream[i];
        return g;
    }
    if (forward.selected.size() != z.rows())
        throw std::logic_error("pool_backward: no forward selection record for " + std::string(to_string(kind)));
    for (std::size_t i = 0; i < z.rows(); ++i) g(i, forward.selected[i]) = upstream[i];
    return g;
}

std::vector<double> activation_forward(ActivationKind kind, std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = activation_eval(kind, x[i]);
    return out;
}

std::vector<double> activation_backward(ActivationKind kind, std::span<const double> x,
                                        std::span<const double> upstream) {
    if (x.size() != upstream.size()) throw std::invalid_argument("activation_backward: length mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = upstream[i] * activation_deriv(kind, x[i]);
    return out;
}

}  // namespace onn
