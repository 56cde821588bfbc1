#include "onn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "onn/errors.hpp"
#include "onn/noise.hpp"
#include "onn/reference.hpp"

namespace onn {

NetworkSpec gradcheck_network(const OperatorSet& set, std::size_t inputs, std::size_t hidden, std::size_t outputs,
                              std::size_t rows, std::size_t cols) {
    NetworkSpec spec;
    spec.input_rows = rows;
    spec.input_cols = cols;
    LayerSpec first;
    first.input_count = inputs;
    first.neurons.assign(hidden, NeuronSpec{set, KernelShape{3, 3}});
    LayerSpec second;
    second.input_count = hidden;
    second.neurons.assign(outputs, NeuronSpec{set, KernelShape{3, 3}});
    spec.layers = {first, second};
    spec.validate();
    return spec;
}

bool near_tie(const NetworkSpec& spec, const Parameters& params, std::span<const Tensor> inputs, double margin) {
    const auto fwd = reference::network_forward(inputs, spec, params);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        const auto& trace = fwd.layers[l];
        const std::size_t out = layer.neurons.size();
        for (std::size_t b = 0; b < out; ++b) {
            if (layer.neurons[b].operators.activation == ActivationKind::LinCut)
                for (double x : trace.pre_activation[b])
                    if (std::fabs(std::fabs(x) - 1.0) < margin) return true;
            const PoolKind pool = layer.neurons[b].operators.pool;
            if (pool == PoolKind::Sum) continue;
            for (std::size_t a = 0; a < layer.input_count; ++a) {
                const auto& z = trace.nodal[a * out + b];
                const auto& map = trace.patches[a * out + b].index_map;
                const auto& sel = trace.pooled[a * out + b].selected;
                for (std::size_t i = 0; i < z.rows(); ++i) {
                    const std::size_t s = sel[i];
                    const double v = z(i, s);
                    const bool s_pad = map[i * z.cols() + s] == kPadIndex;
                    for (std::size_t c = 0; c < z.cols(); ++c) {
                        if (c == s || std::fabs(z(i, c) - v) >= margin) continue;
                        if (s_pad && map[i * z.cols() + c] == kPadIndex) continue;
                        return true;
                    }
                }
            }
        }
    }
    return false;
}

namespace {

// Pool selections and LinCut linear-region flags of a forward pass.
std::vector<std::uint32_t> regime(const NetworkSpec& spec, const ForwardTrace& trace) {
    std::vector<std::uint32_t> out;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = trace.layers[l];
        for (const auto& c : layer.connections) out.insert(out.end(), c.selected.begin(), c.selected.end());
        for (std::size_t b = 0; b < spec.layers[l].neurons.size(); ++b)
            if (spec.layers[l].neurons[b].operators.activation == ActivationKind::LinCut)
                for (double x : layer.pre_activation[b]) out.push_back(x > -1.0 && x < 1.0 ? 1U : 0U);
    }
    return out;
}

double projected_loss(const NetworkSpec& spec, const Parameters& params, std::span<const Tensor> inputs,
                      std::span<const Tensor> projections, const std::vector<std::uint32_t>& base, bool& changed) {
    const auto out = network_forward(inputs, spec, params, Pass::Training);
    if (regime(spec, out.trace) != base) changed = true;
    double loss = 0.0;
    for (std::size_t k = 0; k < out.maps.size(); ++k) loss += dot(out.maps[k].values(), projections[k].values());
    return loss;
}

}  // namespace

void center_biases(const NetworkSpec& spec, Parameters& params, std::span<const Tensor> inputs) {
    std::vector<Tensor> current(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        for (std::size_t b = 0; b < spec.layers[l].neurons.size(); ++b) params.bias(l, b) = 0.0;
        auto out = layer_forward(current, spec.layers[l], params, l, Pass::Training);
        for (std::size_t b = 0; b < spec.layers[l].neurons.size(); ++b) {
            const auto& x = out.trace.pre_activation[b];
            double mean = 0.0;
            for (double v : x) mean += v;
            params.bias(l, b) = -mean / static_cast<double>(x.size());
        }
        current = layer_forward(current, spec.layers[l], params, l, Pass::Inference).maps;
    }
}

ParameterCheck check_parameters(const NetworkSpec& spec, const Parameters& params, std::span<const Tensor> inputs,
                                std::span<const Tensor> projections, const GradcheckConfig& config) {
    const auto fwd = network_forward(inputs, spec, params, Pass::Training);
    const auto base = regime(spec, fwd.trace);
    const auto grads = network_backward(fwd.trace, spec, params, projections);
    const auto analytic = grads.params.values();

    ParameterCheck result;
    Parameters probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double x = params.values()[i];
        auto at = [&](double offset) {
            probe.mutable_values()[i] = x + offset;
            return projected_loss(spec, probe, inputs, projections, base, result.regime_changed);
        };
        const double h = config.step;
        // Five-point stencil: truncation O(h^4).
        const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
        probe.mutable_values()[i] = x;
        if (result.regime_changed) break;
        const double scale = std::max({std::fabs(analytic[i]), std::fabs(numeric), config.scale_floor});
        const double rel = std::fabs(analytic[i] - numeric) / scale;
        if (!(rel <= result.max_rel_error)) {
            result.max_rel_error = std::isnan(rel) ? INFINITY : rel;
            result.worst_index = i;
            result.analytic = analytic[i];
            result.numeric = numeric;
        }
    }
    return result;
}

bool GradcheckReport::passed() const {
    if (sets.empty()) return false;
    return std::all_of(sets.begin(), sets.end(), [](const SetReport& s) { return s.passed(); });
}

std::string GradcheckReport::text() const {
    std::ostringstream os;
    std::size_t failed = 0;
    for (const auto& s : sets) {
        char line[256];
        std::snprintf(line, sizeof line, "%-4s %-22s checked %2zu excluded %3zu max_rel %.3e%s%s\n",
                      s.passed() ? "ok" : "FAIL", s.set.name().c_str(), s.checked, s.excluded, s.max_rel_error,
                      s.passed() ? "" : "  worst ", s.passed() ? "" : s.worst.c_str());
        os << line;
        if (!s.passed()) ++failed;
    }
    os << (failed == 0 ? "all " + std::to_string(sets.size()) + " operator sets passed\n"
                       : std::to_string(failed) + " of " + std::to_string(sets.size()) + " operator sets failed\n");
    return os.str();
}

GradcheckReport run_gradcheck(const OperatorLibrary& library, const GradcheckConfig& config) {
    if (library.empty()) throw ConfigError("gradcheck: operator library is empty");
    if (config.max_extent < 3) throw ConfigError("gradcheck: max_extent must be >= 3");
    if (config.configs_per_set < 1) throw ConfigError("gradcheck: configs_per_set must be >= 1");

    GradcheckReport report;
    report.sets.resize(library.size());
    const auto n_sets = static_cast<std::ptrdiff_t>(library.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t si = 0; si < n_sets; ++si) {
        const auto s = static_cast<std::size_t>(si);
        auto& rep = report.sets[s];
        rep.set = library[s];
        auto rng = make_rng(config.seed, {0x67726164ULL, s});
        std::uniform_int_distribution<std::size_t> extent(3, config.max_extent);
        std::uniform_int_distribution<std::size_t> width(1, 3);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        rep.target = config.configs_per_set;
        for (std::size_t draw = 0; draw < config.max_draws && rep.checked < config.configs_per_set; ++draw) {
            const std::size_t rows = extent(rng), cols = extent(rng);
            const auto spec = gradcheck_network(rep.set, width(rng) % 2 + 1, width(rng), width(rng) % 2 + 1, rows, cols);
            Parameters params(spec);
            for (double& v : params.mutable_values()) v = unit(rng);
            std::vector<Tensor> inputs(spec.input_count(), Tensor::matrix(rows, cols));
            for (auto& t : inputs)
                for (double& v : t.values()) v = unit(rng);
            center_biases(spec, params, inputs);
            std::vector<Tensor> proj(spec.output_count(), Tensor::matrix(rows, cols));
            for (auto& t : proj)
                for (double& v : t.values()) v = unit(rng);

            if (near_tie(spec, params, inputs, config.tie_margin)) {
                ++rep.excluded;
                continue;
            }
            const auto check = check_parameters(spec, params, inputs, proj, config);
            if (check.regime_changed) {
                ++rep.excluded;
                continue;
            }
            ++rep.checked;
            if (check.max_rel_error > config.tolerance) ++rep.failures;
            if (check.max_rel_error >= rep.max_rel_error) {
                rep.max_rel_error = check.max_rel_error;
                char buf[160];
                std::snprintf(buf, sizeof buf, "param %zu analytic %.9g numeric %.9g", check.worst_index,
                              check.analytic, check.numeric);
                rep.worst = buf;
            }
        }
    }
    return report;
}

}  // namespace onn
