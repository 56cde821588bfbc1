#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "onn/noise.hpp"
#include "onn/tensor.hpp"

namespace onn {

struct LoadOptions {
    std::size_t count = 1000;
    std::size_t rows = 60;
    std::size_t cols = 60;
};

/// Reads images from dir in file-name order: grayscale, bilinear resize, [0, 1] scaling.
/// Unreadable files are skipped and reported in warnings; fewer than count images is a DataError.
std::vector<Tensor> load_dataset(const std::filesystem::path& dir, const LoadOptions& options,
                                 std::vector<std::string>* warnings = nullptr);

/// Procedural grayscale scenes: piecewise-smooth regions with hard edges, shading and texture.
std::vector<Tensor> synthetic_corpus(std::size_t count, std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Writes img_0000.pgm, img_0001.pgm, ...
void write_images(const std::filesystem::path& dir, const std::vector<Tensor>& images, const std::string& prefix = "img");

// Networks work on [-1, 1]; images and metrics on [0, 1].
Tensor to_network_range(const Tensor& image);
Tensor to_image_range(const Tensor& network_output);  // clamped to [0, 1]

/// Clean/noisy pair ready for training, both in network range.
struct Sample {
    Tensor input;
    Tensor target;
    Tensor clean;  // [0, 1], for PSNR
};

std::vector<Sample> make_samples(const std::vector<Tensor>& clean, const std::vector<std::size_t>& indices,
                                 const NoiseModel& noise);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Disjoint partition of a shuffled index range into folds; each fold trains on its own
/// chunk and tests on every other image.
struct FoldPlan {
    std::vector<std::size_t> fold_of;  // per image
    std::vector<Fold> folds;

    static FoldPlan create(std::size_t images, std::size_t folds, std::uint64_t seed);
};

}  // namespace onn
