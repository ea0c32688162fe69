#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faq/error.hpp"

namespace faq {

// Dense row-major float tensor. All runtime and quantizer math lives on this
// type; operations are pure functions with a fixed accumulation order so the
// same input bits always produce the same output bits.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> s, std::vector<float> d);

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, float value);

    int64_t numel() const;
    int64_t rank() const { return static_cast<int64_t>(shape.size()); }

    // 2-D accessors; shape checks are the caller's job on hot paths.
    int64_t rows() const { return shape.at(0); }
    int64_t cols() const { return shape.at(1); }
    float& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    float at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }
    const float* row_ptr(int64_t r) const { return data.data() + r * cols(); }
    float* row_ptr(int64_t r) { return data.data() + r * cols(); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;

    bool all_finite() const;
};

// out[p x r] = a[p x q] * b[q x r]; f32 accumulation, k ascending.
Tensor matmul(const Tensor& a, const Tensor& b);

// out[p x r] = a[p x q] * b^T where b is [r x q]. This is the layout the
// runtime uses for activations times a weight matrix [m x n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Per-channel mean of absolute values over the row (token) dimension:
// out[1 x n], out[k] = (1/T) sum_t |a[t,k]|.
Tensor row_mean_abs(const Tensor& a);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& a);

// Per-row layer normalization followed by the affine (gain, bias), both [1 x n].
Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);

// tanh-approximation GELU, applied elementwise.
Tensor gelu(const Tensor& a);
float gelu_scalar(float x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);

} // namespace faq
