#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faq/model.hpp"
#include "faq/runtime.hpp"

namespace faq {

enum class Method { rtn, awq, faq };
const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

enum class PreviewMode { layer, window };

struct QuantConfig {
    Method method = Method::faq;
    int bits = 3;
    int group_size = 64;
    bool symmetric = false; // asymmetric is the experiment default
    PreviewMode preview_mode = PreviewMode::window;
    int window = 3;       // preview window length (window mode) or layer offset (layer mode)
    float gamma = 0.85f;  // fusion factor, current-layer weight
    std::vector<float> alpha_grid; // exponent grid, in [0,1]
    std::vector<float> c_grid;     // multiplicative factor grid, > 0
    bool search_jgamma = false;    // jointly search (j, gamma) instead of using the fixed pair
    std::vector<float> gamma_grid; // used when search_jgamma
    std::vector<int> window_grid;  // used when search_jgamma
    bool fp_prefix = false;        // capture losses against the full-precision prefix
    int workers = 1;

    static QuantConfig defaults();
    void validate() const;
    std::string describe() const;
    uint64_t config_hash() const;
};

// Outcome of the per-layer scale search.
struct ScalePlan {
    LinearSite site;
    Tensor fused_stat;  // [1 x n]
    float alpha = 0.0f;
    float c = 1.0f;
    int window = 0;     // effective preview span; 0 = no preview used
    float gamma = 1.0f;
    Tensor scale_vec;   // s*, elementwise > 0
    double search_loss = 0.0;
    QuantizedTensor qweight; // quantized W*diag(s*)
};

struct LayerReport {
    LinearSite site;
    Method method = Method::rtn;
    float alpha = 0.0f;
    float c = 1.0f;
    int window = 0;
    float gamma = 1.0f;
    double loss = 0.0;
    double wall_time_ms = 0.0;
};

// One line-delimited JSON record per report. Timing is volatile, so it is
// only written when include_timings is set; default files are reproducible.
std::string layer_report_json(const LayerReport& r, bool include_timings);
void write_layer_reports(const std::string& path, std::span<const LayerReport> reports, bool include_timings);

// Preview statistic over the future same-kind sites of one layer, ordered by
// distance. Layer mode picks the stat at offset j; window mode averages the
// first j. j is clamped to what exists; no future site at all -> nullopt,
// which callers treat as "fall back to gamma = 1".
std::optional<Tensor> preview_activation(std::span<const ActivationStat> future_stats, PreviewMode mode, int j);

// Fused statistic: gamma*current + (1-gamma)*preview, elementwise.
Tensor fuse(const Tensor& current, const Tensor& preview, float gamma);

// Per-channel scale from a fused statistic: s[k] = c * max(stat[k], 1e-8)^alpha.
Tensor scale_from_stat(const Tensor& stat, float alpha, float c = 1.0f);

// Reconstruction loss context for one layer: holds the Gram matrix of the
// captured inputs so grid points cost O(m*n^2) instead of O(tokens*m*n).
class LayerLossContext {
public:
    LayerLossContext(const Tensor& a_inputs);
    int64_t tokens() const { return tokens_; }
    int64_t width() const { return n_; }
    // Mean squared error of (a*diag(s)^-1)*dequant(q)^T against a*W^T.
    double loss(const Tensor& w, const Tensor& scale_vec, const QuantizedTensor& q) const;

private:
    int64_t tokens_ = 0;
    int64_t n_ = 0;
    std::vector<double> gram_; // n x n, a^T a
};

struct ScaledQuantResult {
    QuantizedTensor qweight;
    Tensor scale_vec;
    double loss = 0.0;
};

// Quantize W*diag(s) and report the reconstruction loss on the given inputs.
ScaledQuantResult quantize_layer_scaled(const Tensor& w, const Tensor& scale_vec, const Tensor& a_inputs,
                                        int bits, int group_size, bool symmetric);

// Grid search over the scale candidates of one layer. future_stats are the
// same-kind stats of strictly later blocks, nearest first. Ties break toward
// the smallest alpha, then smallest c, then smallest window, then largest
// gamma, so the result does not depend on enumeration order.
ScalePlan search_layer(const LinearSite& site, const Tensor& w, const Tensor& a_inputs,
                       const Tensor& current_stat, std::span<const ActivationStat> future_stats,
                       const QuantConfig& cfg);

struct QuantizeModelResult {
    ToyModel model;
    std::vector<LayerReport> reports;
};

// Quantize every linear site in forward order. Default conditioning feeds
// each layer the activations produced by the already-quantized prefix;
// cfg.fp_prefix captures against the untouched model instead (which makes
// per-layer losses directly comparable across configs).
QuantizeModelResult quantize_model(const ToyModel& model, const CalibrationSet& calib, const QuantConfig& cfg);

// Plain round-to-nearest over every site, no activation scaling (s* = 1).
// Bitwise identical to quantize_model with method = rtn, minus the reports.
ToyModel rtn_quantize_model(const ToyModel& model, int bits, int group_size, bool symmetric);

} // namespace faq
