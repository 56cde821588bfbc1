#include "onn/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace onn {

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (auto t : tags) {
        words.push_back(static_cast<std::uint32_t>(t));
        words.push_back(static_cast<std::uint32_t>(t >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

std::string_view to_string(NoiseKind kind) { return kind == NoiseKind::Impulse ? "impulse" : "speckle"; }

NoiseKind parse_noise(std::string_view name) {
    if (name == "impulse") return NoiseKind::Impulse;
    if (name == "speckle") return NoiseKind::Speckle;
    throw std::invalid_argument("unknown noise kind '" + std::string(name) + "' (expected impulse or speckle)");
}

void NoiseModel::validate() const {
    if (kind == NoiseKind::Impulse && !(p > 0.0 && p < 1.0))
        throw std::invalid_argument("impulse probability must lie in (0, 1)");
    if (kind == NoiseKind::Speckle && shape < 1) throw std::invalid_argument("speckle shape M must be >= 1");
}

Tensor corrupt_impulse(const Tensor& image, double p, Rng& rng, std::size_t* replaced) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("impulse probability must lie in [0, 1]");
    Tensor out = image;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double hit = uniform(rng);
        const double side = uniform(rng);
        if (hit < p) {
            out[i] = side < 0.5 ? 0.0 : 1.0;
            if (replaced != nullptr) ++*replaced;
        }
    }
    return out;
}

Tensor corrupt_speckle(const Tensor& image, int shape, Rng& rng, bool clamp) {
    if (shape < 1) throw std::invalid_argument("speckle shape M must be >= 1");
    const double m = static_cast<double>(shape);
    std::gamma_distribution<double> gamma(m, 1.0 / m);
    Tensor out = image;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= gamma(rng);
        if (clamp) out[i] = std::clamp(out[i], 0.0, 1.0);
    }
    return out;
}

Tensor corrupt(const Tensor& image, const NoiseModel& model, std::uint64_t image_index, std::size_t* replaced) {
    auto rng = make_rng(model.seed, {0x6e6f697365ULL, image_index});
    if (model.kind == NoiseKind::Impulse) return corrupt_impulse(image, model.p, rng, replaced);
    return corrupt_speckle(image, model.shape, rng, false);
}

double psnr(const Tensor& prediction, const Tensor& target, double max_value) {
    if (!prediction.same_shape(target)) throw std::invalid_argument("psnr: shape mismatch");
    if (prediction.empty()) throw std::invalid_argument("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(prediction.size());
    if (mse == 0.0) return kPsnrInfinity;
    return 10.0 * std::log10(max_value * max_value / mse);
}

}  // namespace onn
