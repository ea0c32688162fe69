#pragma once

#include <cstdint>
#include <vector>

#include "faq/tensor.hpp"

namespace faq {

// Group-wise integer quantization artifact for a weight matrix [m x n].
// Codes are stored one byte each regardless of bit width; symmetric codes are
// signed (two's complement in the byte), asymmetric codes are unsigned.
// Groups run along the input dimension: group_size == -1 means one group per
// row, otherwise group_size must divide n.
struct QuantizedTensor {
    int64_t m = 0;
    int64_t n = 0;
    int bits = 0;
    int group_size = -1;
    bool symmetric = true;
    std::vector<uint8_t> codes;  // m*n entries
    std::vector<float> scales;   // m*groups_per_row entries
    std::vector<uint8_t> zero_points; // same layout as scales; all zero when symmetric

    int64_t groups_per_row() const { return group_size == -1 ? 1 : n / group_size; }
    int64_t group_width() const { return group_size == -1 ? n : group_size; }

    int code_at(int64_t r, int64_t c) const {
        const uint8_t raw = codes[static_cast<size_t>(r * n + c)];
        return symmetric ? static_cast<int>(static_cast<int8_t>(raw)) : static_cast<int>(raw);
    }
    float scale_at(int64_t r, int64_t g) const { return scales[static_cast<size_t>(r * groups_per_row() + g)]; }
    int zero_at(int64_t r, int64_t g) const { return zero_points[static_cast<size_t>(r * groups_per_row() + g)]; }
};

// Symmetric quantizer: per group, delta = max|w| / (2^(b-1) - 1), codes
// round-half-away-from-zero then clip to [-2^(b-1), 2^(b-1)-1]. All-zero
// groups get delta = 1 and zero codes.
QuantizedTensor quantize_symmetric(const Tensor& w, int bits, int group_size);

// Asymmetric quantizer: per group, delta = (max - min) / (2^b - 1) (1 when
// the group is constant), z = clip(round(-min/delta), 0, 2^b - 1),
// codes = clip(round(w/delta) + z, 0, 2^b - 1).
QuantizedTensor quantize_asymmetric(const Tensor& w, int bits, int group_size);

QuantizedTensor quantize(const Tensor& w, int bits, int group_size, bool symmetric);

// Reconstruct the float matrix: code*delta (symmetric) or (code-z)*delta.
Tensor dequantize(const QuantizedTensor& q);

} // namespace faq
