#include "faq/model.hpp"

#include <algorithm>
#include <cmath>

#include "faq/rng.hpp"

namespace faq {

const char* site_kind_name(SiteKind kind) {
    switch (kind) {
        case SiteKind::qkv_proj: return "qkv";
        case SiteKind::o_proj: return "o";
        case SiteKind::mlp_up: return "mlp_up";
        case SiteKind::mlp_down: return "mlp_down";
    }
    return "?";
}

void ModelDims::validate() const {
    if (vocab_size < 2) fail(ErrCode::invalid_argument, "vocab_size must be >= 2");
    if (hidden_dim < 1 || num_blocks < 1 || num_heads < 1 || mlp_dim < 1 || max_seq_len < 1)
        fail(ErrCode::invalid_argument, "model dims must be positive");
    if (hidden_dim % num_heads != 0)
        fail(ErrCode::invalid_argument, "hidden_dim " + std::to_string(hidden_dim) +
                                            " not divisible by num_heads " + std::to_string(num_heads));
}

std::string LinearSite::name() const {
    return "blocks." + std::to_string(block_index) + "." + site_kind_name(kind);
}

int64_t LinearSite::input_dim(const ModelDims& d) const {
    return kind == SiteKind::mlp_down ? d.mlp_dim : d.hidden_dim;
}

int64_t LinearSite::output_dim(const ModelDims& d) const {
    switch (kind) {
        case SiteKind::qkv_proj: return 3 * d.hidden_dim;
        case SiteKind::o_proj: return d.hidden_dim;
        case SiteKind::mlp_up: return d.mlp_dim;
        case SiteKind::mlp_down: return d.hidden_dim;
    }
    return 0;
}

std::vector<LinearSite> all_sites(const ModelDims& dims) {
    std::vector<LinearSite> sites;
    sites.reserve(static_cast<size_t>(4 * dims.num_blocks));
    for (int64_t b = 0; b < dims.num_blocks; ++b)
        for (int k = 0; k < 4; ++k)
            sites.push_back(LinearSite{static_cast<int>(b), static_cast<SiteKind>(k)});
    return sites;
}

LinearSite site_by_index(int64_t linear_index) {
    return LinearSite{static_cast<int>(linear_index / 4), static_cast<SiteKind>(linear_index % 4)};
}

QuantizedLinear::QuantizedLinear(QuantizedTensor q, Tensor s) : qweight(std::move(q)), scale_vec(std::move(s)) {
    if (scale_vec.numel() != qweight.n)
        fail(ErrCode::shape_mismatch, "scale vector length " + std::to_string(scale_vec.numel()) +
                                          " does not match input dim " + std::to_string(qweight.n));
    for (float v : scale_vec.data)
        if (!(v > 0.0f)) fail(ErrCode::invalid_argument, "scale vector must be elementwise positive");
    dequant_cache_ = dequantize(qweight);
}

LinearWeight& ToyModel::site_weight(const LinearSite& site) {
    Block& b = blocks.at(static_cast<size_t>(site.block_index));
    switch (site.kind) {
        case SiteKind::qkv_proj: return b.qkv;
        case SiteKind::o_proj: return b.o;
        case SiteKind::mlp_up: return b.mlp_up;
        case SiteKind::mlp_down: return b.mlp_down;
    }
    fail(ErrCode::invalid_argument, "bad site kind");
}

const LinearWeight& ToyModel::site_weight(const LinearSite& site) const {
    return const_cast<ToyModel*>(this)->site_weight(site);
}

namespace {

Tensor random_matrix(Rng& rng, int64_t rows, int64_t cols, double std_dev) {
    Tensor t = Tensor::zeros({rows, cols});
    for (float& v : t.data) v = static_cast<float>(rng.normal() * std_dev);
    return t;
}

// Boost a seeded subset of input channels (columns) so their magnitudes
// dominate the rest, the way outlier channels do in trained networks.
void boost_columns(Rng& rng, Tensor& w, double fraction, double boost) {
    const int64_t n = w.cols();
    int64_t count = static_cast<int64_t>(std::floor(fraction * static_cast<double>(n)));
    if (count <= 0) return;
    count = std::min(count, n);
    std::vector<int64_t> channels(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) channels[static_cast<size_t>(i)] = i;
    // partial Fisher-Yates: first `count` entries become the boosted set
    for (int64_t i = 0; i < count; ++i) {
        const int64_t j = i + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n - i)));
        std::swap(channels[static_cast<size_t>(i)], channels[static_cast<size_t>(j)]);
    }
    for (int64_t i = 0; i < count; ++i) {
        const int64_t c = channels[static_cast<size_t>(i)];
        for (int64_t r = 0; r < w.rows(); ++r) w.at(r, c) *= static_cast<float>(boost);
    }
}

Tensor linear_weight(Rng& rng, int64_t out_dim, int64_t in_dim, const ToyModelOptions& opts) {
    Tensor w = random_matrix(rng, out_dim, in_dim, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    boost_columns(rng, w, opts.outlier_fraction, opts.outlier_boost);
    return w;
}

} // namespace

ToyModel generate_toy_model(uint64_t seed, const ModelDims& dims, const ToyModelOptions& opts) {
    dims.validate();
    if (opts.outlier_fraction < 0.0 || opts.outlier_fraction > 1.0)
        fail(ErrCode::invalid_argument, "outlier_fraction must be in [0,1]");
    ToyModel m;
    m.dims = dims;
    Rng rng(seed);
    const double emb_std = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
    m.tok_emb = random_matrix(rng, dims.vocab_size, dims.hidden_dim, emb_std);
    m.pos_emb = random_matrix(rng, dims.max_seq_len, dims.hidden_dim, emb_std);
    m.lnf_gain = Tensor::full({1, dims.hidden_dim}, 1.0f);
    m.lnf_bias = Tensor::zeros({1, dims.hidden_dim});
    m.blocks.resize(static_cast<size_t>(dims.num_blocks));
    for (Block& b : m.blocks) {
        b.ln1_gain = Tensor::full({1, dims.hidden_dim}, 1.0f);
        b.ln1_bias = Tensor::zeros({1, dims.hidden_dim});
        b.ln2_gain = Tensor::full({1, dims.hidden_dim}, 1.0f);
        b.ln2_bias = Tensor::zeros({1, dims.hidden_dim});
        b.qkv.full = linear_weight(rng, 3 * dims.hidden_dim, dims.hidden_dim, opts);
        b.o.full = linear_weight(rng, dims.hidden_dim, dims.hidden_dim, opts);
        b.mlp_up.full = linear_weight(rng, dims.mlp_dim, dims.hidden_dim, opts);
        b.mlp_down.full = linear_weight(rng, dims.hidden_dim, dims.mlp_dim, opts);
    }
    return m;
}

int64_t CalibrationSet::total_tokens() const {
    int64_t total = 0;
    for (const auto& s : sequences) total += static_cast<int64_t>(s.size());
    return total;
}

CalibrationSet generate_calibration(uint64_t seed, int64_t n, int64_t seq_len, int64_t vocab_size,
                                    float bias_knob, int64_t max_seq_len) {
    if (n < 1) fail(ErrCode::invalid_argument, "calibration set needs N >= 1");
    if (seq_len < 1) fail(ErrCode::invalid_argument, "seq_len must be >= 1");
    if (seq_len > max_seq_len)
        fail(ErrCode::invalid_argument, "seq_len " + std::to_string(seq_len) + " exceeds max sequence length " +
                                            std::to_string(max_seq_len));
    if (vocab_size < 1) fail(ErrCode::invalid_argument, "vocab_size must be >= 1");
    if (bias_knob < 0.0f || bias_knob > 1.0f) fail(ErrCode::invalid_argument, "bias_knob must be in [0,1]");

    CalibrationSet set;
    set.seed = seed;
    set.seq_len = seq_len;
    set.bias_knob = bias_knob;
    set.vocab_size = vocab_size;
    Rng rng(seed);
    // biased draws hit a narrow slice of the vocabulary whose position is
    // itself seed-dependent, so different seeds bias toward different tokens
    const int64_t slice_width = std::max<int64_t>(1, vocab_size / 16);
    const int64_t slice_start = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(vocab_size - slice_width + 1)));
    set.sequences.resize(static_cast<size_t>(n));
    for (auto& seq : set.sequences) {
        seq.resize(static_cast<size_t>(seq_len));
        for (auto& tok : seq) {
            const bool biased = bias_knob > 0.0f && rng.next_double() < static_cast<double>(bias_knob);
            if (biased)
                tok = static_cast<uint32_t>(slice_start + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(slice_width))));
            else
                tok = static_cast<uint32_t>(rng.next_below(static_cast<uint64_t>(vocab_size)));
        }
    }
    return set;
}

} // namespace faq
