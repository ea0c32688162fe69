#include "faq/tensor.hpp"

#include <cmath>
#include <sstream>

namespace faq {

namespace {

int64_t product(const std::vector<int64_t>& shape) {
    int64_t p = 1;
    for (int64_t d : shape) p *= d;
    return p;
}

void check_2d(const Tensor& t, const char* who) {
    if (t.rank() != 2) fail(ErrCode::shape_mismatch, std::string(who) + ": expected rank-2 tensor, got " + t.shape_str());
}

} // namespace

Tensor::Tensor(std::vector<int64_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (product(shape) != static_cast<int64_t>(data.size()))
        fail(ErrCode::shape_mismatch, "tensor data length " + std::to_string(data.size()) +
                                          " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    Tensor t;
    int64_t n = product(shape);
    if (n < 0) fail(ErrCode::invalid_argument, "negative dimension in shape");
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0f);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t = zeros(std::move(shape));
    for (float& v : t.data) v = value;
    return t;
}

int64_t Tensor::numel() const { return product(shape); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    if (a.cols() != b.rows())
        fail(ErrCode::shape_mismatch, "matmul: inner dimensions disagree, " + a.shape_str() + " x " + b.shape_str());
    const int64_t p = a.rows(), q = a.cols(), r = b.cols();
    Tensor out = Tensor::zeros({p, r});
    for (int64_t i = 0; i < p; ++i) {
        float* orow = out.row_ptr(i);
        const float* arow = a.row_ptr(i);
        for (int64_t k = 0; k < q; ++k) {
            const float av = arow[k];
            const float* brow = b.row_ptr(k);
            for (int64_t j = 0; j < r; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    if (a.cols() != b.cols())
        fail(ErrCode::shape_mismatch, "matmul_nt: inner dimensions disagree, " + a.shape_str() + " x " + b.shape_str() + "^T");
    const int64_t p = a.rows(), q = a.cols(), r = b.rows();
    Tensor out = Tensor::zeros({p, r});
    for (int64_t i = 0; i < p; ++i) {
        const float* arow = a.row_ptr(i);
        float* orow = out.row_ptr(i);
        for (int64_t j = 0; j < r; ++j) {
            const float* brow = b.row_ptr(j);
            float acc = 0.0f;
            for (int64_t k = 0; k < q; ++k) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    }
    return out;
}

Tensor row_mean_abs(const Tensor& a) {
    check_2d(a, "row_mean_abs");
    const int64_t t = a.rows(), n = a.cols();
    if (t < 1 || n < 1) fail(ErrCode::invalid_argument, "row_mean_abs: empty tensor " + a.shape_str());
    Tensor out = Tensor::zeros({1, n});
    for (int64_t i = 0; i < t; ++i) {
        const float* row = a.row_ptr(i);
        for (int64_t k = 0; k < n; ++k) out.data[static_cast<size_t>(k)] += std::fabs(row[k]);
    }
    const float inv = 1.0f / static_cast<float>(t);
    for (float& v : out.data) v *= inv;
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    check_2d(a, "softmax_rows");
    Tensor out = Tensor::zeros(a.shape);
    const int64_t rows = a.rows(), n = a.cols();
    for (int64_t i = 0; i < rows; ++i) {
        const float* row = a.row_ptr(i);
        float* orow = out.row_ptr(i);
        float mx = row[0];
        for (int64_t k = 1; k < n; ++k) mx = std::max(mx, row[k]);
        float sum = 0.0f;
        for (int64_t k = 0; k < n; ++k) {
            orow[k] = std::exp(row[k] - mx);
            sum += orow[k];
        }
        const float inv = 1.0f / sum;
        for (int64_t k = 0; k < n; ++k) orow[k] *= inv;
    }
    return out;
}

Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias, float eps) {
    check_2d(a, "layernorm");
    const int64_t rows = a.rows(), n = a.cols();
    if (gain.numel() != n || bias.numel() != n)
        fail(ErrCode::shape_mismatch, "layernorm: affine params " + gain.shape_str() + "/" + bias.shape_str() +
                                          " do not match width " + std::to_string(n));
    Tensor out = Tensor::zeros(a.shape);
    for (int64_t i = 0; i < rows; ++i) {
        const float* row = a.row_ptr(i);
        float* orow = out.row_ptr(i);
        float mean = 0.0f;
        for (int64_t k = 0; k < n; ++k) mean += row[k];
        mean /= static_cast<float>(n);
        float var = 0.0f;
        for (int64_t k = 0; k < n; ++k) {
            const float d = row[k] - mean;
            var += d * d;
        }
        var /= static_cast<float>(n);
        const float inv_std = 1.0f / std::sqrt(var + eps);
        for (int64_t k = 0; k < n; ++k)
            orow[k] = (row[k] - mean) * inv_std * gain.data[static_cast<size_t>(k)] + bias.data[static_cast<size_t>(k)];
    }
    return out;
}

float gelu_scalar(float x) {
    const float k = 0.7978845608028654f; // sqrt(2/pi)
    const float inner = k * (x + 0.044715f * x * x * x);
    return 0.5f * x * (1.0f + std::tanh(inner));
}

Tensor gelu(const Tensor& a) {
    Tensor out = a;
    for (float& v : out.data) v = gelu_scalar(v);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) fail(ErrCode::shape_mismatch, "add: " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) fail(ErrCode::shape_mismatch, "mul: " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Tensor scale(const Tensor& a, float factor) {
    Tensor out = a;
    for (float& v : out.data) v *= factor;
    return out;
}

} // namespace faq
