#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faq/quantizer.hpp"
#include "faq/tensor.hpp"

namespace faq {

// The four quantizable linears of one decoder block, in forward order.
// The (block, kind) pair with block-major, kind-minor ordering is the total
// order that defines which sites are "future" relative to another.
enum class SiteKind : int { qkv_proj = 0, o_proj = 1, mlp_up = 2, mlp_down = 3 };

const char* site_kind_name(SiteKind kind);

struct ModelDims {
    int64_t vocab_size = 256;
    int64_t hidden_dim = 64;
    int64_t num_blocks = 8;
    int64_t num_heads = 4;
    int64_t mlp_dim = 256;
    int64_t max_seq_len = 64;

    void validate() const;
    int64_t head_dim() const { return hidden_dim / num_heads; }
};

struct LinearSite {
    int block_index = 0;
    SiteKind kind = SiteKind::qkv_proj;

    int64_t linear_index() const { return 4 * block_index + static_cast<int>(kind); }
    std::string name() const; // e.g. "blocks.3.mlp_up"
    int64_t input_dim(const ModelDims& d) const;
    int64_t output_dim(const ModelDims& d) const;

    bool operator==(const LinearSite&) const = default;
};

std::vector<LinearSite> all_sites(const ModelDims& dims);
LinearSite site_by_index(int64_t linear_index);

// A quantized linear as the runtime consumes it: integer codes of
// W*diag(s), the per-channel scale vector s, and a cached dequantized
// matrix so the forward pass does not re-decode per call.
struct QuantizedLinear {
    QuantizedTensor qweight;
    Tensor scale_vec; // [1 x n], elementwise > 0

    QuantizedLinear() = default;
    QuantizedLinear(QuantizedTensor q, Tensor s);

    const Tensor& dequantized() const { return dequant_cache_; }

private:
    Tensor dequant_cache_;
};

// Either a full-precision weight matrix or a quantized one.
struct LinearWeight {
    std::optional<Tensor> full;
    std::optional<QuantizedLinear> quant;

    bool is_quantized() const { return quant.has_value(); }
    int64_t out_dim() const { return full ? full->rows() : quant->qweight.m; }
    int64_t in_dim() const { return full ? full->cols() : quant->qweight.n; }
};

struct Block {
    Tensor ln1_gain, ln1_bias;
    Tensor ln2_gain, ln2_bias;
    LinearWeight qkv, o, mlp_up, mlp_down;
};

// Pre-norm decoder-only transformer with causal MHA, GELU MLP and a tied
// embedding/output head. Norms and embeddings always stay in full precision.
struct ToyModel {
    ModelDims dims;
    Tensor tok_emb; // [vocab x n], also the output head
    Tensor pos_emb; // [T x n]
    Tensor lnf_gain, lnf_bias;
    std::vector<Block> blocks;

    LinearWeight& site_weight(const LinearSite& site);
    const LinearWeight& site_weight(const LinearSite& site) const;
};

struct ToyModelOptions {
    double outlier_fraction = 0.0625; // fraction of input channels boosted per linear
    double outlier_boost = 8.0;
};

// Seeded random model; weights ~ N(0, 1/fan_in), with a fraction of input
// channels per linear boosted in magnitude to create outlier channels.
ToyModel generate_toy_model(uint64_t seed, const ModelDims& dims, const ToyModelOptions& opts = {});

struct CalibrationSet {
    uint64_t seed = 0;
    int64_t seq_len = 0;
    float bias_knob = 0.0f;
    int64_t vocab_size = 0;
    std::vector<std::vector<uint32_t>> sequences;

    int64_t size() const { return static_cast<int64_t>(sequences.size()); }
    int64_t total_tokens() const;
};

// Seeded token sequences. bias_knob in [0,1] routes that fraction of draws
// into a narrow seed-dependent slice of the vocabulary (0 = uniform).
CalibrationSet generate_calibration(uint64_t seed, int64_t n, int64_t seq_len, int64_t vocab_size,
                                    float bias_knob, int64_t max_seq_len);

} // namespace faq
