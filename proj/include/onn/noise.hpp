#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

#include "onn/tensor.hpp"

namespace onn {

using Rng = std::mt19937_64;

/// Independent stream for (seed, tags...) via std::seed_seq.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {});

enum class NoiseKind { Impulse, Speckle };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise(std::string_view name);

struct NoiseModel {
    NoiseKind kind = NoiseKind::Impulse;
    double p = 0.4;   // impulse probability
    int shape = 1;    // speckle Gamma shape M
    std::uint64_t seed = 0;

    void validate() const;
};

/// Each pixel independently, with probability p, becomes 0 or 1 (equal odds).
/// The number of replaced pixels is added to *replaced when given.
Tensor corrupt_impulse(const Tensor& image, double p, Rng& rng, std::size_t* replaced = nullptr);

/// Multiplies each pixel by n ~ Gamma(shape = M, scale = 1/M) (unit mean, variance 1/M).
/// With clamp the product is limited to [0, 1].
Tensor corrupt_speckle(const Tensor& image, int shape, Rng& rng, bool clamp = true);

/// Applies the model to one image using the stream (model.seed, image_index).
/// Speckle is returned unclamped; clamp at the storage/metric boundary.
Tensor corrupt(const Tensor& image, const NoiseModel& model, std::uint64_t image_index,
               std::size_t* replaced = nullptr);

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

/// 10 log10(max^2 / MSE) in dB; +inf when the images are identical.
double psnr(const Tensor& prediction, const Tensor& target, double max_value = 1.0);

}  // namespace onn
