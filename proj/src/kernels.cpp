#include "onn/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <type_traits>

#include "onn/nodal_functions.hpp"

namespace onn::kernels {

namespace {

// Custom nodal functions go through the function pointers, one element at a time.
struct CustomFn {
    const NodalOp* op;
};

template <class Fn>
void with_nodal(const NodalOp& op, Fn&& fn) {
    if (!nodal::dispatch(op.kind, fn)) {
        if (op.eval == nullptr || op.partials == nullptr)
            throw std::invalid_argument("nodal op '" + std::string(op.name) + "' has no implementation");
        fn(CustomFn{&op});
    }
}

bool uses_table(NodalKind kind) { return kind == NodalKind::Cubic || kind == NodalKind::SignedLog; }

void select_max(const double* z, std::size_t taps, std::size_t n, std::uint32_t* out) {
    std::vector<double> best(z, z + n);
    std::fill(out, out + n, 0u);
    for (std::size_t j = 1; j < taps; ++j) {
        const double* zj = z + j * n;
        const auto tag = static_cast<std::uint32_t>(j);
        double* bp = best.data();
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) {
            const bool up = zj[i] > bp[i];
            bp[i] = up ? zj[i] : bp[i];
            out[i] = up ? tag : out[i];
        }
    }
}

// Lower-middle order statistic by rank counting: tap j holds it when
// less_j <= k < less_j + equal_j. The lowest such tap wins.
void select_median(const double* z, std::size_t taps, std::size_t n, std::uint32_t* out) {
    const auto k = static_cast<std::uint32_t>((taps - 1) / 2);
    std::vector<std::uint32_t> less(n);
    std::vector<std::uint32_t> equal(n);
    std::vector<std::uint8_t> found(n, 0);
    std::fill(out, out + n, 0u);
    for (std::size_t j = 0; j < taps; ++j) {
        const double* zj = z + j * n;
        std::fill(less.begin(), less.end(), 0u);
        std::fill(equal.begin(), equal.end(), 0u);
        std::uint32_t* lp = less.data();
        std::uint32_t* ep = equal.data();
        for (std::size_t q = 0; q < taps; ++q) {
            const double* zq = z + q * n;
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) {
                lp[i] += zq[i] < zj[i] ? 1u : 0u;
                ep[i] += zq[i] == zj[i] ? 1u : 0u;
            }
        }
        const auto tag = static_cast<std::uint32_t>(j);
        std::uint8_t* fp = found.data();
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) {
            const bool hit = fp[i] == 0 && lp[i] <= k && k < lp[i] + ep[i];
            out[i] = hit ? tag : out[i];
            fp[i] = hit ? 1 : fp[i];
        }
    }
}

template <class F>
void fill_nodal_values(const F&, const double* y, const double* h, std::span<const double> w, std::size_t n,
                       double* z) {
    std::vector<double> sbuf(F::separable ? 0 : n);
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double wj = w[j];
        const double* yj = y + j * n;
        double* zj = z + j * n;
        if constexpr (F::separable) {
            const double* hj = (h != nullptr ? h : y) + j * n;
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) zj[i] = wj * hj[i];
        } else {
            double* sp = sbuf.data();
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) sp[i] = wj * F::arg(yj[i]);
            F::g_block(sp, zj, n);
        }
    }
}

void fill_nodal_values(const CustomFn& f, const double* y, const double*, std::span<const double> w, std::size_t n,
                       double* z) {
    for (std::size_t j = 0; j < w.size(); ++j)
        for (std::size_t i = 0; i < n; ++i) z[j * n + i] = f.op->eval(y[j * n + i], w[j]);
}

void pool_selected(PoolKind kind, const double* z, std::size_t taps, std::size_t n, std::span<double> x,
                   Pass pass, ConnectionTrace& trace) {
    std::vector<std::uint32_t> local;
    std::uint32_t* sel;
    if (pass == Pass::Training) {
        trace.selected.resize(n);
        sel = trace.selected.data();
    } else {
        local.resize(n);
        sel = local.data();
    }
    select_taps(kind, z, taps, n, sel);
    for (std::size_t i = 0; i < n; ++i) x[i] += z[sel[i] * n + i];
}

template <class F>
void forward_impl(const F& f, PoolKind pool, const Tensor& pm, std::span<const double> w, const double* table,
                  Pass pass, std::span<double> x, ConnectionTrace& trace) {
    const std::size_t taps = pm.rows();
    const std::size_t n = pm.cols();
    const double* y = pm.data();

    if (pool != PoolKind::Sum) {
        std::vector<double> z(taps * n);
        fill_nodal_values(f, y, table, w, n, z.data());
        pool_selected(pool, z.data(), taps, n, x, pass, trace);
        return;
    }

    // Per-connection sum in tap order, then added to the neuron's accumulator.
    std::vector<double> xc(n, 0.0);
    double* xp = xc.data();
    if constexpr (std::is_same_v<F, CustomFn>) {
        const bool train = pass == Pass::Training;
        if (train) {
            trace.d_dy.resize(taps * n);
            trace.d_dw.resize(taps * n);
        }
        for (std::size_t j = 0; j < taps; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t e = j * n + i;
                if (train) {
                    const auto p = f.op->partials(y[e], w[j]);
                    xp[i] += p.value;
                    trace.d_dy[e] = p.d_dy;
                    trace.d_dw[e] = p.d_dw;
                } else {
                    xp[i] += f.op->eval(y[e], w[j]);
                }
            }
    } else if constexpr (F::separable) {
        const double* h = table != nullptr ? table : y;
        for (std::size_t j = 0; j < taps; ++j) {
            const double wj = w[j];
            const double* hj = h + j * n;
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) xp[i] += wj * hj[i];
        }
    } else {
        const bool train = pass == Pass::Training;
        if (train) trace.dg.resize(taps * n);
        std::vector<double> sbuf(n);
        std::vector<double> vbuf(n);
        double* sp = sbuf.data();
        double* vp = vbuf.data();
        for (std::size_t j = 0; j < taps; ++j) {
            const double wj = w[j];
            const double* yj = y + j * n;
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) sp[i] = wj * F::arg(yj[i]);
            F::g_block(sp, vp, n);
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) xp[i] += vp[i];
            if (train) F::dg_block(sp, vp, trace.dg.data() + j * n, n);
        }
    }
    for (std::size_t i = 0; i < n; ++i) x[i] += xp[i];
}

// Partials at the pooled tap of every pixel: pw = d psi / dw, py = d psi / dy.
template <class F>
void selected_partials(const F& f, const double* y, std::span<const double> w, const std::uint32_t* sel,
                       std::size_t n, double* pw, double* py) {
    std::vector<double> ys(n);
    std::vector<double> ws(n);
    for (std::size_t i = 0; i < n; ++i) {
        ys[i] = y[sel[i] * n + i];
        ws[i] = w[sel[i]];
    }
    const double* yp = ys.data();
    const double* wp = ws.data();
    if constexpr (std::is_same_v<F, CustomFn>) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = f.op->partials(yp[i], wp[i]);
            pw[i] = p.d_dw;
            py[i] = p.d_dy;
        }
    } else if constexpr (F::separable) {
        F::h_block(yp, pw, n);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) py[i] = wp[i] * F::dh(yp[i]);
    } else {
        std::vector<double> sbuf(n);
        std::vector<double> vbuf(n);
        double* sp = sbuf.data();
        double* vp = vbuf.data();
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) sp[i] = wp[i] * F::arg(yp[i]);
        F::g_block(sp, vp, n);
        F::dg_block(sp, vp, pw, n);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pw[i];
            pw[i] = F::arg(yp[i]) * d;
            py[i] = wp[i] * F::darg(yp[i]) * d;
        }
    }
}

template <class F>
void backward_impl(const F& f, PoolKind pool, const Tensor& pm, std::span<const double> w, const double* table,
                   const ConnectionTrace& trace, std::span<const double> up, std::span<double> patch_grad,
                   std::span<double> dw) {
    const std::size_t taps = pm.rows();
    const std::size_t n = pm.cols();
    const double* y = pm.data();
    const double* u = up.data();
    const bool want_input = !patch_grad.empty();

    if (pool != PoolKind::Sum) {
        if (trace.selected.size() != n) throw std::logic_error("pool backward without a forward selection record");
        std::vector<double> pw(n);
        std::vector<double> py(n);
        selected_partials(f, y, w, trace.selected.data(), n, pw.data(), py.data());
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = trace.selected[i];
            dw[j] += u[i] * pw[i];
            if (want_input) patch_grad[j * n + i] += u[i] * py[i];
        }
        return;
    }

    for (std::size_t j = 0; j < taps; ++j) {
        const double wj = w[j];
        const double* yj = y + j * n;
        double* gj = want_input ? patch_grad.data() + j * n : nullptr;
        double acc = 0.0;
        if constexpr (std::is_same_v<F, CustomFn>) {
            if (trace.d_dy.size() != taps * n) throw std::logic_error("connection trace has no cached partials");
            for (std::size_t i = 0; i < n; ++i) {
                acc += u[i] * trace.d_dw[j * n + i];
                if (want_input) gj[i] += u[i] * trace.d_dy[j * n + i];
            }
        } else if constexpr (F::separable) {
            const double* hj = (table != nullptr ? table : y) + j * n;
#pragma omp simd reduction(+ : acc)
            for (std::size_t i = 0; i < n; ++i) acc += u[i] * hj[i];
            if (want_input) {
#pragma omp simd
                for (std::size_t i = 0; i < n; ++i) gj[i] += u[i] * wj * F::dh(yj[i]);
            }
        } else {
            if (trace.dg.size() != taps * n) throw std::logic_error("connection trace has no cached partials");
            const double* dgj = trace.dg.data() + j * n;
#pragma omp simd reduction(+ : acc)
            for (std::size_t i = 0; i < n; ++i) acc += u[i] * F::arg(yj[i]) * dgj[i];
            if (want_input) {
#pragma omp simd
                for (std::size_t i = 0; i < n; ++i) gj[i] += u[i] * wj * F::darg(yj[i]) * dgj[i];
            }
        }
        dw[j] += acc;
    }
}

std::size_t table_index(std::size_t slot, std::size_t input, std::size_t inputs, NodalKind kind) {
    return (slot * inputs + input) * kTableKinds + static_cast<std::size_t>(kind);
}

const double* table_for(const LayerTrace& trace, std::size_t slot, std::size_t input, std::size_t inputs,
                        NodalKind kind) {
    if (!uses_table(kind)) return nullptr;
    const auto& t = trace.separable[table_index(slot, input, inputs, kind)];
    return t.empty() ? nullptr : t.data();
}

bool has_training_record(const OperatorSet& ops, const ConnectionTrace& ct, std::size_t entries,
                         std::size_t pixels) {
    if (ops.pool != PoolKind::Sum) return ct.selected.size() == pixels;
    switch (ops.nodal.kind) {
        case NodalKind::Mul:
        case NodalKind::Cubic:
        case NodalKind::SignedLog: return true;
        case NodalKind::Custom: return ct.d_dy.size() == entries && ct.d_dw.size() == entries;
        default: return ct.dg.size() == entries;
    }
}

void apply_activation(ActivationKind kind, const double* x, double* y, std::size_t n) {
    switch (kind) {
        case ActivationKind::Tanh:
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) y[i] = tanh(x[i]);
            break;
        case ActivationKind::LinCut:
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] < -1.0 ? -1.0 : (x[i] > 1.0 ? 1.0 : x[i]);
            break;
        case ActivationKind::Identity: std::copy(x, x + n, y); break;
    }
}

}  // namespace

void select_taps(PoolKind kind, const double* z, std::size_t taps, std::size_t pixels, std::uint32_t* out) {
    if (taps == 0) throw std::invalid_argument("select_taps: no taps");
    if (kind == PoolKind::Max)
        select_max(z, taps, pixels, out);
    else if (kind == PoolKind::Median)
        select_median(z, taps, pixels, out);
    else
        throw std::invalid_argument("select_taps: pool kind has no single selected element");
}

void separable_table(NodalKind kind, std::span<const double> patches, std::span<double> out) {
    if (patches.size() != out.size()) throw std::invalid_argument("separable_table: size mismatch");
    const double* y = patches.data();
    double* h = out.data();
    const std::size_t n = patches.size();
    switch (kind) {
        case NodalKind::Mul: std::copy(y, y + n, h); break;
        case NodalKind::Cubic: nodal::Cubic::h_block(y, h, n); break;
        case NodalKind::SignedLog: nodal::SignedLog::h_block(y, h, n); break;
        default: throw std::invalid_argument("separable_table: nodal kind is not separable");
    }
}

void forward_connection(const OperatorSet& ops, const Tensor& patches, std::span<const double> kernel,
                        const double* h_table, Pass pass, std::span<double> x, ConnectionTrace& trace) {
    if (patches.rank() != 2 || kernel.size() != patches.rows() || x.size() != patches.cols())
        throw std::invalid_argument("forward_connection: shape mismatch");
    with_nodal(ops.nodal, [&](const auto& f) { forward_impl(f, ops.pool, patches, kernel, h_table, pass, x, trace); });
}

void backward_connection(const OperatorSet& ops, const Tensor& patches, std::span<const double> kernel,
                         const double* h_table, const ConnectionTrace& trace, std::span<const double> upstream,
                         std::span<double> patch_grad, std::span<double> dw) {
    if (patches.rank() != 2 || kernel.size() != patches.rows() || upstream.size() != patches.cols() ||
        dw.size() != kernel.size() || (!patch_grad.empty() && patch_grad.size() != patches.size()))
        throw std::invalid_argument("backward_connection: shape mismatch");
    with_nodal(ops.nodal, [&](const auto& f) {
        backward_impl(f, ops.pool, patches, kernel, h_table, trace, upstream, patch_grad, dw);
    });
}

LayerOutput layer_forward(std::span<const Tensor> inputs, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, Pass pass) {
    if (inputs.size() != layer.input_count)
        throw std::invalid_argument("layer_forward: expected " + std::to_string(layer.input_count) + " inputs, got " +
                                    std::to_string(inputs.size()));
    if (inputs.empty() || inputs[0].rank() != 2) throw std::invalid_argument("layer_forward: inputs must be 2-D maps");
    for (const auto& in : inputs)
        if (!in.same_shape(inputs[0])) throw std::invalid_argument("layer_forward: input maps differ in shape");
    if (layer_index >= params.layer_count() || params.inputs(layer_index) != layer.input_count ||
        params.outputs(layer_index) != layer.neurons.size())
        throw std::invalid_argument("layer_forward: parameters do not match layer spec");

    for (const auto& neuron : layer.neurons) {
        if (neuron.operators.nodal.kind == NodalKind::Custom &&
            (neuron.operators.nodal.eval == nullptr || neuron.operators.nodal.partials == nullptr))
            throw std::invalid_argument("nodal op '" + std::string(neuron.operators.nodal.name) +
                                        "' has no implementation");
        if (neuron.kernel.rows % 2 == 0 || neuron.kernel.cols % 2 == 0)
            throw std::invalid_argument("layer_forward: kernels must have odd extents");
    }

    const std::size_t n_in = inputs.size();
    const std::size_t n_out = layer.neurons.size();
    LayerOutput out;
    LayerTrace& tr = out.trace;
    tr.rows = inputs[0].rows();
    tr.cols = inputs[0].cols();
    const std::size_t pixels = tr.rows * tr.cols;

    tr.kernel_slot.resize(n_out);
    for (std::size_t b = 0; b < n_out; ++b) {
        const auto k = layer.neurons[b].kernel;
        auto it = std::find(tr.kernels.begin(), tr.kernels.end(), k);
        if (it == tr.kernels.end()) {
            tr.kernels.push_back(k);
            it = tr.kernels.end() - 1;
        }
        tr.kernel_slot[b] = static_cast<std::size_t>(it - tr.kernels.begin());
    }
    const std::size_t slots = tr.kernels.size();

    tr.patches.resize(slots * n_in);
    const auto n_patch = static_cast<std::ptrdiff_t>(slots * n_in);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n_patch; ++p) {
        const auto s = static_cast<std::size_t>(p) / n_in;
        const auto a = static_cast<std::size_t>(p) % n_in;
        tr.patches[static_cast<std::size_t>(p)] = im2col_tap_major(inputs[a], tr.kernels[s]);
    }

    tr.separable.resize(slots * n_in * kTableKinds);
    std::vector<std::size_t> needed;
    for (std::size_t b = 0; b < n_out; ++b) {
        const auto kind = layer.neurons[b].operators.nodal.kind;
        if (!uses_table(kind)) continue;
        for (std::size_t a = 0; a < n_in; ++a) {
            const auto idx = table_index(tr.kernel_slot[b], a, n_in, kind);
            if (std::find(needed.begin(), needed.end(), idx) == needed.end()) needed.push_back(idx);
        }
    }
    const auto n_needed = static_cast<std::ptrdiff_t>(needed.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n_needed; ++t) {
        const auto idx = needed[static_cast<std::size_t>(t)];
        const auto kind = static_cast<NodalKind>(idx % kTableKinds);
        const auto& pm = tr.patches[idx / kTableKinds];
        tr.separable[idx].resize(pm.size());
        separable_table(kind, pm.values(), tr.separable[idx]);
    }

    tr.connections.resize(n_in * n_out);
    tr.pre_activation.resize(n_out);
    out.maps.resize(n_out);
    const auto n_neurons = static_cast<std::ptrdiff_t>(n_out);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t bi = 0; bi < n_neurons; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const auto& neuron = layer.neurons[b];
        std::vector<double> x(pixels, 0.0);
        const auto slot = tr.kernel_slot[b];
        for (std::size_t a = 0; a < n_in; ++a)
            forward_connection(neuron.operators, tr.patches[slot * n_in + a], params.weight(layer_index, a, b),
                               table_for(tr, slot, a, n_in, neuron.operators.nodal.kind), pass, x,
                               tr.connections[a * n_out + b]);
        const double bias = params.bias(layer_index, b);
        for (std::size_t i = 0; i < pixels; ++i) x[i] += bias;
        Tensor y = Tensor::matrix(tr.rows, tr.cols);
        apply_activation(neuron.operators.activation, x.data(), y.data(), pixels);
        out.maps[b] = std::move(y);
        if (pass == Pass::Training) tr.pre_activation[b] = std::move(x);
    }
    return out;
}

LayerGrads layer_backward(const LayerTrace& tr, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, std::span<const Tensor> upstream, Parameters& grads,
                          bool need_input_grads) {
    const std::size_t n_in = layer.input_count;
    const std::size_t n_out = layer.neurons.size();
    if (upstream.size() != n_out) throw std::invalid_argument("layer_backward: upstream count mismatch");
    if (tr.pre_activation.size() != n_out || tr.connections.size() != n_in * n_out ||
        tr.patches.size() != tr.kernels.size() * n_in)
        throw std::logic_error("layer_backward: trace does not belong to this layer");
    const std::size_t pixels = tr.rows * tr.cols;
    for (std::size_t b = 0; b < n_out; ++b)
        if (upstream[b].size() != pixels || tr.pre_activation[b].size() != pixels)
            throw std::invalid_argument("layer_backward: upstream shape mismatch or inference-only trace");
    for (std::size_t a = 0; a < n_in; ++a)
        for (std::size_t b = 0; b < n_out; ++b)
            if (!has_training_record(layer.neurons[b].operators, tr.connections[a * n_out + b],
                                     pixels * layer.neurons[b].kernel.size(), pixels))
                throw std::logic_error("layer_backward: trace lacks training records");
    if (!grads.same_layout(params)) throw std::invalid_argument("layer_backward: gradient buffer layout mismatch");
    const std::span<double> gv = grads.mutable_values();

    // dE/dx per neuron, through the activation.
    std::vector<std::vector<double>> dx(n_out, std::vector<double>(pixels));
    const auto n_neurons = static_cast<std::ptrdiff_t>(n_out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < n_neurons; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const auto act = layer.neurons[b].operators.activation;
        const double* x = tr.pre_activation[b].data();
        const double* u = upstream[b].data();
        double* d = dx[b].data();
        switch (act) {
            case ActivationKind::Tanh:
#pragma omp simd
                for (std::size_t i = 0; i < pixels; ++i) {
                    const double t = tanh(x[i]);
                    d[i] = u[i] * (1.0 - t * t);
                }
                break;
            case ActivationKind::LinCut:
#pragma omp simd
                for (std::size_t i = 0; i < pixels; ++i) d[i] = (x[i] > -1.0 && x[i] < 1.0) ? u[i] : 0.0;
                break;
            case ActivationKind::Identity: std::copy(u, u + pixels, d); break;
        }
        double bias_grad = 0.0;
        for (std::size_t i = 0; i < pixels; ++i) bias_grad += d[i];
        gv[grads.bias_offset(layer_index, b)] += bias_grad;
    }

    LayerGrads out;
    if (need_input_grads) out.input_grads.resize(n_in);
    const std::size_t slots = tr.kernels.size();
    const auto n_inputs = static_cast<std::ptrdiff_t>(n_in);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ai = 0; ai < n_inputs; ++ai) {
        const auto a = static_cast<std::size_t>(ai);
        std::vector<std::vector<double>> patch_grad(slots);
        if (need_input_grads)
            for (std::size_t s = 0; s < slots; ++s) patch_grad[s].assign(pixels * tr.kernels[s].size(), 0.0);
        for (std::size_t b = 0; b < n_out; ++b) {
            const auto& neuron = layer.neurons[b];
            const auto slot = tr.kernel_slot[b];
            backward_connection(neuron.operators, tr.patches[slot * n_in + a], params.weight(layer_index, a, b),
                                table_for(tr, slot, a, n_in, neuron.operators.nodal.kind),
                                tr.connections[a * n_out + b], dx[b], patch_grad[slot],
                                gv.subspan(grads.weight_offset(layer_index, a, b), neuron.kernel.size()));
        }
        if (need_input_grads) {
            Tensor g = Tensor::matrix(tr.rows, tr.cols);
            for (std::size_t s = 0; s < slots; ++s) {
                const Tensor pg({tr.kernels[s].size(), pixels}, std::move(patch_grad[s]));
                const Tensor part = col2im_tap_major(pg, tr.kernels[s], tr.rows, tr.cols);
                for (std::size_t i = 0; i < pixels; ++i) g[i] += part[i];
            }
            out.input_grads[a] = std::move(g);
        }
    }
    return out;
}

}  // namespace onn::kernels
