#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace onn {

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of doubles with an explicit shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; rank must be 2.
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> row(std::size_t r) { return {data_.data() + r * shape_[1], shape_[1]}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * shape_[1], shape_[1]}; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);

/// Marks a zero-pad position in PatchMatrix::index_map.
inline constexpr std::int64_t kPadIndex = -1;

struct KernelShape {
    std::size_t rows = 3;
    std::size_t cols = 3;

    std::size_t size() const { return rows * cols; }
    friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

/// im2col result: one row per output pixel, one column per kernel tap.
struct PatchMatrix {
    Tensor values;                       // (M*N) x (m*n)
    std::vector<std::int64_t> index_map; // source pixel per entry, or kPadIndex
    std::size_t source_rows = 0;
    std::size_t source_cols = 0;

    std::size_t rows() const { return values.rows(); }
    std::size_t cols() const { return values.cols(); }
};

PatchMatrix im2col(const Tensor& image, KernelShape kernel);

/// Adjoint of im2col: scatter-add each entry into its source pixel, dropping pads.
Tensor col2im_accumulate(const Tensor& grad, std::span<const std::int64_t> index_map,
                         std::size_t rows, std::size_t cols);

/// Tap-major im2col: the transpose of im2col(image).values, shape (m*n) x (M*N).
/// Column i of tap j holds the zero-padded image shifted by tap j's offset.
Tensor im2col_tap_major(const Tensor& image, KernelShape kernel);

/// Adjoint of im2col_tap_major.
Tensor col2im_tap_major(const Tensor& grad, KernelShape kernel, std::size_t rows, std::size_t cols);

Tensor broadcast_weights(const Tensor& kernel, std::size_t rows);

Tensor vec(const Tensor& t);
Tensor vec_inverse(const Tensor& v, const Shape& shape);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace onn
