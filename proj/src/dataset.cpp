#include "onn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "onn/errors.hpp"
#include "onn/image_io.hpp"

namespace onn {

std::vector<Tensor> load_dataset(const std::filesystem::path& dir, const LoadOptions& options,
                                 std::vector<std::string>* warnings) {
    if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<Tensor> images;
    for (const auto& file : files) {
        if (images.size() == options.count) break;
        try {
            images.push_back(resize_bilinear(to_grayscale(read_raster(file)), options.rows, options.cols));
        } catch (const std::exception& e) {
            if (warnings != nullptr) warnings->push_back(std::string("skipping ") + e.what());
        }
    }
    if (images.size() < options.count)
        throw DataError("dataset " + dir.string() + " has " + std::to_string(images.size()) +
                        " readable images, " + std::to_string(options.count) + " required");
    return images;
}

namespace {

struct Canvas {
    std::size_t rows;
    std::size_t cols;
    std::vector<double> px;
    double& at(std::size_t r, std::size_t c) { return px[r * cols + c]; }
};

void paint_scene(Canvas& cv, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double h = static_cast<double>(cv.rows);
    const double w = static_cast<double>(cv.cols);

    // Background: shaded plane plus a slow undulation.
    const double base = 0.15 + 0.7 * u(rng);
    const double gx = (u(rng) - 0.5) * 0.6;
    const double gy = (u(rng) - 0.5) * 0.6;
    const double wave_amp = 0.1 * u(rng);
    const double wave_f = 1.0 + 2.0 * u(rng);
    const double wave_phase = 2.0 * std::numbers::pi * u(rng);
    for (std::size_t r = 0; r < cv.rows; ++r)
        for (std::size_t c = 0; c < cv.cols; ++c) {
            const double y = r / h;
            const double x = c / w;
            cv.at(r, c) = base + gx * (x - 0.5) + gy * (y - 0.5) +
                          wave_amp * std::sin(2.0 * std::numbers::pi * wave_f * (x + y) + wave_phase);
        }

    const int shapes = 3 + static_cast<int>(u(rng) * 6.0);
    for (int s = 0; s < shapes; ++s) {
        const int type = static_cast<int>(u(rng) * 3.0);
        const double cx = u(rng);
        const double cy = u(rng);
        const double rx = 0.06 + 0.3 * u(rng);
        const double ry = 0.06 + 0.3 * u(rng);
        const double angle = std::numbers::pi * u(rng);
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);
        const double level = u(rng);
        const double shade = (u(rng) - 0.5) * 0.5;
        const double tex_amp = u(rng) < 0.4 ? 0.12 * u(rng) : 0.0;
        const double tex_f = 6.0 + 10.0 * u(rng);
        const double tex_dir = std::numbers::pi * u(rng);
        // triangle vertices in the shape frame
        const double t1 = 2.0 * std::numbers::pi * u(rng);
        const double t2 = t1 + 2.0 + 1.5 * u(rng);
        const double t3 = t2 + 2.0 + 1.0 * u(rng);
        const double vx[3] = {std::cos(t1), std::cos(t2), std::cos(t3)};
        const double vy[3] = {std::sin(t1), std::sin(t2), std::sin(t3)};

        for (std::size_t r = 0; r < cv.rows; ++r) {
            for (std::size_t c = 0; c < cv.cols; ++c) {
                const double dx = c / w - cx;
                const double dy = r / h - cy;
                const double lx = (ca * dx + sa * dy) / rx;
                const double ly = (-sa * dx + ca * dy) / ry;
                bool inside = false;
                if (type == 0) {
                    inside = lx * lx + ly * ly <= 1.0;
                } else if (type == 1) {
                    inside = std::fabs(lx) <= 1.0 && std::fabs(ly) <= 1.0;
                } else {
                    inside = true;
                    for (int k = 0; k < 3; ++k) {
                        const int n = (k + 1) % 3;
                        const double cross = (vx[n] - vx[k]) * (ly - vy[k]) - (vy[n] - vy[k]) * (lx - vx[k]);
                        if (cross < 0.0) inside = false;
                    }
                }
                if (!inside) continue;
                double v = level + shade * lx * 0.5;
                if (tex_amp > 0.0)
                    v += tex_amp * std::sin(tex_f * (std::cos(tex_dir) * c / w + std::sin(tex_dir) * r / h) *
                                            2.0 * std::numbers::pi);
                cv.at(r, c) = v;
            }
        }
    }
}

}  // namespace

std::vector<Tensor> synthetic_corpus(std::size_t count, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    constexpr std::size_t kSuper = 3;
    std::vector<Tensor> images;
    images.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        auto rng = make_rng(seed, {0x636f72707573ULL, n});
        Canvas cv{rows * kSuper, cols * kSuper, std::vector<double>(rows * cols * kSuper * kSuper)};
        paint_scene(cv, rng);
        Tensor img = Tensor::matrix(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                double s = 0.0;
                for (std::size_t a = 0; a < kSuper; ++a)
                    for (std::size_t b = 0; b < kSuper; ++b) s += cv.at(r * kSuper + a, c * kSuper + b);
                img(r, c) = std::clamp(s / (kSuper * kSuper), 0.0, 1.0);
            }
        images.push_back(std::move(img));
    }
    return images;
}

void write_images(const std::filesystem::path& dir, const std::vector<Tensor>& images, const std::string& prefix) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < images.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_%04zu.pgm", prefix.c_str(), i);
        write_pgm(dir / name, to_raster(images[i]));
    }
}

Tensor to_network_range(const Tensor& image) {
    Tensor out = image;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * out[i] - 1.0;
    return out;
}

Tensor to_image_range(const Tensor& network_output) {
    Tensor out = network_output;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(0.5 * (out[i] + 1.0), 0.0, 1.0);
    return out;
}

std::vector<Sample> make_samples(const std::vector<Tensor>& clean, const std::vector<std::size_t>& indices,
                                 const NoiseModel& noise) {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (auto idx : indices) {
        if (idx >= clean.size()) throw DataError("sample index out of range");
        const Tensor noisy = corrupt(clean[idx], noise, idx);
        out.push_back({to_network_range(noisy), to_network_range(clean[idx]), clean[idx]});
    }
    return out;
}

FoldPlan FoldPlan::create(std::size_t images, std::size_t folds, std::uint64_t seed) {
    if (folds == 0 || images < folds) throw ConfigError("fold plan needs at least one image per fold");
    std::vector<std::size_t> order(images);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, {0x666f6c64ULL});
    std::shuffle(order.begin(), order.end(), rng);

    FoldPlan plan;
    plan.fold_of.assign(images, 0);
    plan.folds.resize(folds);
    for (std::size_t k = 0; k < images; ++k) {
        const std::size_t f = k * folds / images;
        plan.fold_of[order[k]] = f;
    }
    for (std::size_t i = 0; i < images; ++i)
        for (std::size_t f = 0; f < folds; ++f)
            (plan.fold_of[i] == f ? plan.folds[f].train : plan.folds[f].test).push_back(i);
    return plan;
}

}  // namespace onn
