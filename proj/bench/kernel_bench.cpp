// Serial reference vs parallel kernels: one training step (forward + backward)
// and one inference pass of the 2x12 denoiser on a 60x60 image, per operator set.
// Usage: onn_bench [repeats] [threads...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include <omp.h>

#include "onn/network.hpp"
#include "onn/noise.hpp"
#include "onn/reference.hpp"
#include "onn/runtime.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    onn::tune_allocator();
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
    std::vector<int> threads;
    for (int i = 2; i < argc; ++i) threads.push_back(std::atoi(argv[i]));
    if (threads.empty()) {
        threads.push_back(1);
        if (omp_get_max_threads() > 1) threads.push_back(omp_get_max_threads());
    }

    const onn::OperatorSet sets[] = {
        onn::parse_operator_set("mul-sum-tanh"),    onn::parse_operator_set("sin-sum-tanh"),
        onn::parse_operator_set("sinh-sum-tanh"),   onn::parse_operator_set("sin-median-tanh"),
        onn::parse_operator_set("log-median-tanh"), onn::parse_operator_set("chirp-max-lincut"),
    };
    onn::Architecture arch;
    auto rng = onn::make_rng(7);
    onn::Tensor image = onn::Tensor::matrix(arch.rows, arch.cols);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double& v : image.values()) v = unit(rng);
    onn::Tensor out_grad = onn::Tensor::matrix(arch.rows, arch.cols);
    for (double& v : out_grad.values()) v = unit(rng);

    std::printf("%-18s %8s %12s %12s %12s %12s %10s\n", "operator set", "threads", "ref step ms", "par step ms",
                "par infer ms", "speedup", "max diff");
    for (const auto& set : sets) {
        onn::Assignment a(arch.hidden.size());
        for (std::size_t l = 0; l < arch.hidden.size(); ++l) a[l].assign(arch.hidden[l], set);
        const auto spec = onn::make_network(arch, a);
        const auto params = onn::initialize_parameters(spec, rng);

        omp_set_num_threads(1);
        double ref_ms = 0.0;
        onn::Parameters ref_grads;
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = Clock::now();
            const auto fwd = onn::reference::network_forward(std::span<const onn::Tensor>(&image, 1), spec, params);
            ref_grads = onn::reference::network_backward(fwd, spec, params, std::span<const onn::Tensor>(&out_grad, 1));
            ref_ms += ms_since(t0);
        }
        ref_ms /= repeats;

        for (int t : threads) {
            omp_set_num_threads(t);
            double step_ms = 0.0, infer_ms = 0.0, diff = 0.0;
            for (int r = 0; r < repeats; ++r) {
                auto t0 = Clock::now();
                const auto fwd = onn::network_forward(image, spec, params, onn::Pass::Training);
                const auto g = onn::network_backward(fwd.trace, spec, params, std::span<const onn::Tensor>(&out_grad, 1));
                step_ms += ms_since(t0);
                diff = max_abs_diff(g.params.values(), ref_grads.values());
                t0 = Clock::now();
                const auto inf = onn::network_forward(image, spec, params, onn::Pass::Inference);
                infer_ms += ms_since(t0);
            }
            step_ms /= repeats;
            infer_ms /= repeats;
            std::printf("%-18s %8d %12.2f %12.2f %12.2f %11.1fx %10.2e\n", set.name().c_str(), t, ref_ms, step_ms,
                        infer_ms, ref_ms / step_ms, diff);
        }
    }
    return 0;
}
