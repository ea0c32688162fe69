#include "faq/runtime.hpp"

#include <cmath>

namespace faq {

namespace {

Tensor embed(const ToyModel& model, std::span<const uint32_t> tokens) {
    const ModelDims& d = model.dims;
    const int64_t t_len = static_cast<int64_t>(tokens.size());
    if (t_len < 1) fail(ErrCode::invalid_argument, "empty token sequence");
    if (t_len > d.max_seq_len)
        fail(ErrCode::invalid_argument, "sequence length " + std::to_string(t_len) + " exceeds max " +
                                            std::to_string(d.max_seq_len));
    Tensor x = Tensor::zeros({t_len, d.hidden_dim});
    for (int64_t t = 0; t < t_len; ++t) {
        const uint32_t tok = tokens[static_cast<size_t>(t)];
        if (tok >= static_cast<uint32_t>(d.vocab_size))
            fail(ErrCode::token_range, "token id " + std::to_string(tok) + " out of range for vocab " +
                                           std::to_string(d.vocab_size));
        const float* erow = model.tok_emb.row_ptr(tok);
        const float* prow = model.pos_emb.row_ptr(t);
        float* xrow = x.row_ptr(t);
        for (int64_t k = 0; k < d.hidden_dim; ++k) xrow[k] = erow[k] + prow[k];
    }
    return x;
}

// Causal multi-head attention over a fused qkv activation [T x 3n].
// Position t only ever reads rows <= t, which is what makes the prefix
// invariance of forward() bitwise.
Tensor causal_mha(const Tensor& qkv, int64_t num_heads) {
    const int64_t t_len = qkv.rows();
    const int64_t n = qkv.cols() / 3;
    const int64_t d = n / num_heads;
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
    Tensor ctx = Tensor::zeros({t_len, n});
    std::vector<float> scores;
    for (int64_t h = 0; h < num_heads; ++h) {
        const int64_t q0 = h * d, k0 = n + h * d, v0 = 2 * n + h * d;
        for (int64_t t = 0; t < t_len; ++t) {
            scores.assign(static_cast<size_t>(t + 1), 0.0f);
            const float* qrow = qkv.row_ptr(t) + q0;
            float mx = -std::numeric_limits<float>::infinity();
            for (int64_t j = 0; j <= t; ++j) {
                const float* krow = qkv.row_ptr(j) + k0;
                float s = 0.0f;
                for (int64_t e = 0; e < d; ++e) s += qrow[e] * krow[e];
                s *= inv_sqrt_d;
                scores[static_cast<size_t>(j)] = s;
                mx = std::max(mx, s);
            }
            float sum = 0.0f;
            for (int64_t j = 0; j <= t; ++j) {
                const float e = std::exp(scores[static_cast<size_t>(j)] - mx);
                scores[static_cast<size_t>(j)] = e;
                sum += e;
            }
            const float inv = 1.0f / sum;
            float* crow = ctx.row_ptr(t) + h * d;
            for (int64_t j = 0; j <= t; ++j) {
                const float p = scores[static_cast<size_t>(j)] * inv;
                const float* vrow = qkv.row_ptr(j) + v0;
                for (int64_t e = 0; e < d; ++e) crow[e] += p * vrow[e];
            }
        }
    }
    return ctx;
}

// The four within-block stages, shared by forward() and PipelineCursor so
// captures and taps agree bitwise.
Tensor stage_qkv_input(const ToyModel& m, int64_t block, const Tensor& x) {
    const Block& b = m.blocks[static_cast<size_t>(block)];
    return layernorm(x, b.ln1_gain, b.ln1_bias);
}

Tensor stage_o_input(const ToyModel& m, int64_t block, const Tensor& h1) {
    const Block& b = m.blocks[static_cast<size_t>(block)];
    return causal_mha(apply_linear(b.qkv, h1), m.dims.num_heads);
}

Tensor stage_post_attn(const ToyModel& m, int64_t block, const Tensor& x, const Tensor& ctx) {
    const Block& b = m.blocks[static_cast<size_t>(block)];
    return add(x, apply_linear(b.o, ctx));
}

Tensor stage_up_input(const ToyModel& m, int64_t block, const Tensor& post_attn) {
    const Block& b = m.blocks[static_cast<size_t>(block)];
    return layernorm(post_attn, b.ln2_gain, b.ln2_bias);
}

Tensor stage_down_input(const ToyModel& m, int64_t block, const Tensor& h2) {
    const Block& b = m.blocks[static_cast<size_t>(block)];
    return gelu(apply_linear(b.mlp_up, h2));
}

Tensor stage_block_exit(const ToyModel& m, int64_t block, const Tensor& post_attn, const Tensor& u) {
    const Block& b = m.blocks[static_cast<size_t>(block)];
    return add(post_attn, apply_linear(b.mlp_down, u));
}

} // namespace

Tensor apply_linear(const LinearWeight& w, const Tensor& x) {
    if (!w.is_quantized()) return matmul_nt(x, *w.full);
    const QuantizedLinear& q = *w.quant;
    Tensor xs = x;
    const int64_t n = xs.cols();
    for (int64_t t = 0; t < xs.rows(); ++t) {
        float* row = xs.row_ptr(t);
        const float* s = q.scale_vec.data.data();
        for (int64_t k = 0; k < n; ++k) row[k] /= s[k];
    }
    return matmul_nt(xs, q.dequantized());
}

Tensor forward(const ToyModel& model, std::span<const uint32_t> tokens, const TapFn* tap) {
    Tensor x = embed(model, tokens);
    for (int64_t blk = 0; blk < model.dims.num_blocks; ++blk) {
        const Tensor h1 = stage_qkv_input(model, blk, x);
        if (tap) (*tap)(LinearSite{static_cast<int>(blk), SiteKind::qkv_proj}, h1);
        const Tensor ctx = stage_o_input(model, blk, h1);
        if (tap) (*tap)(LinearSite{static_cast<int>(blk), SiteKind::o_proj}, ctx);
        const Tensor post_attn = stage_post_attn(model, blk, x, ctx);
        const Tensor h2 = stage_up_input(model, blk, post_attn);
        if (tap) (*tap)(LinearSite{static_cast<int>(blk), SiteKind::mlp_up}, h2);
        const Tensor u = stage_down_input(model, blk, h2);
        if (tap) (*tap)(LinearSite{static_cast<int>(blk), SiteKind::mlp_down}, u);
        x = stage_block_exit(model, blk, post_attn, u);
    }
    x = layernorm(x, model.lnf_gain, model.lnf_bias);
    return matmul_nt(x, model.tok_emb); // tied output head
}

ActivationStat ActivationStat::merge(const ActivationStat& a, const ActivationStat& b) {
    if (!(a.site == b.site)) fail(ErrCode::invalid_argument, "merging stats from different sites");
    if (!a.mean_abs.same_shape(b.mean_abs)) fail(ErrCode::shape_mismatch, "merging stats of different widths");
    ActivationStat out = a;
    out.token_count = a.token_count + b.token_count;
    const double wa = static_cast<double>(a.token_count);
    const double wb = static_cast<double>(b.token_count);
    for (size_t k = 0; k < out.mean_abs.data.size(); ++k)
        out.mean_abs.data[k] = static_cast<float>(
            (static_cast<double>(a.mean_abs.data[k]) * wa + static_cast<double>(b.mean_abs.data[k]) * wb) / (wa + wb));
    return out;
}

std::vector<ActivationStat> collect_stats(const ToyModel& model, const CalibrationSet& calib) {
    if (calib.sequences.empty()) fail(ErrCode::invalid_argument, "empty calibration set");
    const auto sites = all_sites(model.dims);
    std::vector<std::vector<double>> sums(sites.size());
    std::vector<int64_t> counts(sites.size(), 0);
    for (size_t i = 0; i < sites.size(); ++i)
        sums[i].assign(static_cast<size_t>(sites[i].input_dim(model.dims)), 0.0);

    TapFn tap = [&](const LinearSite& site, const Tensor& a) {
        auto& sum = sums[static_cast<size_t>(site.linear_index())];
        for (int64_t t = 0; t < a.rows(); ++t) {
            const float* row = a.row_ptr(t);
            for (int64_t k = 0; k < a.cols(); ++k) sum[static_cast<size_t>(k)] += std::fabs(row[k]);
        }
        counts[static_cast<size_t>(site.linear_index())] += a.rows();
    };
    for (const auto& seq : calib.sequences) forward(model, seq, &tap);

    std::vector<ActivationStat> stats(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) {
        stats[i].site = sites[i];
        stats[i].token_count = counts[i];
        stats[i].mean_abs = Tensor::zeros({1, static_cast<int64_t>(sums[i].size())});
        const double inv = 1.0 / static_cast<double>(counts[i]);
        for (size_t k = 0; k < sums[i].size(); ++k)
            stats[i].mean_abs.data[k] = static_cast<float>(sums[i][k] * inv);
    }
    return stats;
}

LayerCapture capture_layer_io(const ToyModel& model, const CalibrationSet& calib, const LinearSite& site) {
    const LinearWeight& w = model.site_weight(site);
    if (w.is_quantized())
        fail(ErrCode::invalid_argument, "site " + site.name() + " is already quantized; reference outputs need its full-precision weight");
    const int64_t n_in = site.input_dim(model.dims);
    LayerCapture cap;
    cap.inputs = Tensor::zeros({calib.total_tokens(), n_in});
    int64_t row = 0;
    TapFn tap = [&](const LinearSite& s, const Tensor& a) {
        if (!(s == site)) return;
        for (int64_t t = 0; t < a.rows(); ++t) {
            std::memcpy(cap.inputs.row_ptr(row), a.row_ptr(t), static_cast<size_t>(n_in) * sizeof(float));
            ++row;
        }
    };
    for (const auto& seq : calib.sequences) forward(model, seq, &tap);
    cap.ref_outputs = matmul_nt(cap.inputs, *w.full);
    return cap;
}

PipelineCursor::PipelineCursor(const ToyModel& model, const CalibrationSet& calib)
    : model_(model), calib_(calib) {
    if (calib.sequences.empty()) fail(ErrCode::invalid_argument, "empty calibration set");
    residual_.resize(calib.sequences.size());
    post_attn_.resize(calib.sequences.size());
    staged_.resize(calib.sequences.size());
}

Tensor PipelineCursor::capture_next() {
    if (done()) fail(ErrCode::invalid_argument, "pipeline cursor exhausted");
    const LinearSite site = next_site();
    const int64_t blk = site.block_index;
    const int64_t n_in = site.input_dim(model_.dims);
    Tensor stacked = Tensor::zeros({calib_.total_tokens(), n_in});
    int64_t row = 0;
    for (size_t s = 0; s < calib_.sequences.size(); ++s) {
        switch (site.kind) {
            case SiteKind::qkv_proj:
                if (blk == 0)
                    residual_[s] = embed(model_, calib_.sequences[s]);
                else
                    residual_[s] = stage_block_exit(model_, blk - 1, post_attn_[s], staged_[s]);
                staged_[s] = stage_qkv_input(model_, blk, residual_[s]);
                break;
            case SiteKind::o_proj:
                staged_[s] = stage_o_input(model_, blk, staged_[s]);
                break;
            case SiteKind::mlp_up:
                post_attn_[s] = stage_post_attn(model_, blk, residual_[s], staged_[s]);
                staged_[s] = stage_up_input(model_, blk, post_attn_[s]);
                break;
            case SiteKind::mlp_down:
                staged_[s] = stage_down_input(model_, blk, staged_[s]);
                break;
        }
        for (int64_t t = 0; t < staged_[s].rows(); ++t) {
            std::memcpy(stacked.row_ptr(row), staged_[s].row_ptr(t), static_cast<size_t>(n_in) * sizeof(float));
            ++row;
        }
    }
    ++next_index_;
    return stacked;
}

} // namespace faq
