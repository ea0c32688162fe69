#include "faq/quantizer.hpp"

#include <cmath>

namespace faq {

namespace {

void check_quant_args(const Tensor& w, int bits, int group_size) {
    if (w.rank() != 2) fail(ErrCode::shape_mismatch, "quantize: expected rank-2 weight, got " + w.shape_str());
    if (bits < 2 || bits > 8) fail(ErrCode::invalid_argument, "quantize: bits must be in [2,8], got " + std::to_string(bits));
    if (group_size != -1) {
        if (group_size < 1 || w.cols() % group_size != 0)
            fail(ErrCode::invalid_argument, "quantize: group size " + std::to_string(group_size) +
                                                " does not divide input dim " + std::to_string(w.cols()));
    }
    if (!w.all_finite()) fail(ErrCode::invalid_argument, "quantize: non-finite weight values");
}

QuantizedTensor make_shell(const Tensor& w, int bits, int group_size, bool symmetric) {
    QuantizedTensor q;
    q.m = w.rows();
    q.n = w.cols();
    q.bits = bits;
    q.group_size = group_size;
    q.symmetric = symmetric;
    q.codes.assign(static_cast<size_t>(q.m * q.n), 0);
    q.scales.assign(static_cast<size_t>(q.m * q.groups_per_row()), 1.0f);
    q.zero_points.assign(static_cast<size_t>(q.m * q.groups_per_row()), 0);
    return q;
}

inline float round_half_away(float x) { return std::round(x); } // std::round is half-away-from-zero

} // namespace

QuantizedTensor quantize_symmetric(const Tensor& w, int bits, int group_size) {
    check_quant_args(w, bits, group_size);
    QuantizedTensor q = make_shell(w, bits, group_size, true);
    const int qmax = (1 << (bits - 1)) - 1; // divisor so max|w| stays representable
    const int lo = -(1 << (bits - 1));      // clip range [-Q, Q-1]
    const int hi = qmax;
    const int64_t gw = q.group_width();
    for (int64_t r = 0; r < q.m; ++r) {
        const float* wrow = w.row_ptr(r);
        for (int64_t g = 0; g < q.groups_per_row(); ++g) {
            const int64_t c0 = g * gw;
            float amax = 0.0f;
            for (int64_t c = c0; c < c0 + gw; ++c) amax = std::max(amax, std::fabs(wrow[c]));
            float delta = 1.0f;
            if (amax > 0.0f) {
                delta = amax / static_cast<float>(qmax);
                for (int64_t c = c0; c < c0 + gw; ++c) {
                    int code = static_cast<int>(round_half_away(wrow[c] / delta));
                    code = std::min(hi, std::max(lo, code));
                    q.codes[static_cast<size_t>(r * q.n + c)] = static_cast<uint8_t>(static_cast<int8_t>(code));
                }
            }
            q.scales[static_cast<size_t>(r * q.groups_per_row() + g)] = delta;
        }
    }
    return q;
}

QuantizedTensor quantize_asymmetric(const Tensor& w, int bits, int group_size) {
    check_quant_args(w, bits, group_size);
    QuantizedTensor q = make_shell(w, bits, group_size, false);
    const int levels = (1 << bits) - 1;
    const int64_t gw = q.group_width();
    for (int64_t r = 0; r < q.m; ++r) {
        const float* wrow = w.row_ptr(r);
        for (int64_t g = 0; g < q.groups_per_row(); ++g) {
            const int64_t c0 = g * gw;
            float mn = wrow[c0], mx = wrow[c0];
            for (int64_t c = c0 + 1; c < c0 + gw; ++c) {
                mn = std::min(mn, wrow[c]);
                mx = std::max(mx, wrow[c]);
            }
            const float delta = (mx == mn) ? 1.0f : (mx - mn) / static_cast<float>(levels);
            int z = static_cast<int>(std::round(-mn / delta));
            z = std::min(levels, std::max(0, z));
            for (int64_t c = c0; c < c0 + gw; ++c) {
                int code = static_cast<int>(std::round(wrow[c] / delta)) + z;
                code = std::min(levels, std::max(0, code));
                q.codes[static_cast<size_t>(r * q.n + c)] = static_cast<uint8_t>(code);
            }
            const size_t gi = static_cast<size_t>(r * q.groups_per_row() + g);
            q.scales[gi] = delta;
            q.zero_points[gi] = static_cast<uint8_t>(z);
        }
    }
    return q;
}

QuantizedTensor quantize(const Tensor& w, int bits, int group_size, bool symmetric) {
    return symmetric ? quantize_symmetric(w, bits, group_size) : quantize_asymmetric(w, bits, group_size);
}

Tensor dequantize(const QuantizedTensor& q) {
    Tensor out = Tensor::zeros({q.m, q.n});
    const int64_t gw = q.group_width();
    for (int64_t r = 0; r < q.m; ++r) {
        float* orow = out.row_ptr(r);
        for (int64_t g = 0; g < q.groups_per_row(); ++g) {
            const float delta = q.scale_at(r, g);
            const int z = q.zero_at(r, g);
            const int64_t c0 = g * gw;
            for (int64_t c = c0; c < c0 + gw; ++c)
                orow[c] = static_cast<float>(q.code_at(r, c) - z) * delta;
        }
    }
    return out;
}

} // namespace faq
