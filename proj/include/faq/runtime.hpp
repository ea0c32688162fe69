#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "faq/model.hpp"

namespace faq {

// Per-channel mean absolute activation at one linear site.
struct ActivationStat {
    LinearSite site;
    Tensor mean_abs; // [1 x n_in], elementwise >= 0
    int64_t token_count = 0;

    // Token-weighted merge of two partial stats for the same site.
    static ActivationStat merge(const ActivationStat& a, const ActivationStat& b);
};

// Tap callback: receives the exact pre-matmul input of a linear site,
// shape [T x n_in], once per site per forward pass.
using TapFn = std::function<void(const LinearSite&, const Tensor&)>;

// Apply a (possibly quantized) linear to activations x [T x n]: full
// precision is x*W^T; quantized is (x*diag(s)^-1)*dequant^T.
Tensor apply_linear(const LinearWeight& w, const Tensor& x);

// Full forward pass over one token sequence; returns logits [T x vocab].
Tensor forward(const ToyModel& model, std::span<const uint32_t> tokens, const TapFn* tap = nullptr);

// One pass over the calibration set accumulating mean-abs stats for every
// site, indexed by LinearSite::linear_index(). Streamed in sequence order.
std::vector<ActivationStat> collect_stats(const ToyModel& model, const CalibrationSet& calib);

struct LayerCapture {
    Tensor inputs;      // [total_tokens x n_in], from the current model state
    Tensor ref_outputs; // inputs x W_fp^T, W_fp = the site's full-precision weight
};

// Stacked inputs and full-precision reference outputs for one site. The site
// itself must still hold a full-precision weight; earlier layers may already
// be quantized (their error then shows up in the captured inputs).
LayerCapture capture_layer_io(const ToyModel& model, const CalibrationSet& calib, const LinearSite& site);

// Walks the quantizable sites in forward order over the calibration set,
// reusing per-sequence state so the whole walk costs about one forward pass.
// Weights are read from the model at call time, so installing a quantized
// weight for the current site before the next capture makes every later
// capture see the quantized prefix. Captures are bitwise identical to
// capture_layer_io on the same model state.
class PipelineCursor {
public:
    PipelineCursor(const ToyModel& model, const CalibrationSet& calib);

    bool done() const { return next_index_ >= 4 * model_.dims.num_blocks; }
    LinearSite next_site() const { return site_by_index(next_index_); }

    // Input activations [total_tokens x n_in] of next_site(); advances.
    Tensor capture_next();

private:
    const ToyModel& model_;
    const CalibrationSet& calib_;
    int64_t next_index_ = 0;
    std::vector<Tensor> residual_; // per sequence: block input x
    std::vector<Tensor> post_attn_; // per sequence: x + attn out
    std::vector<Tensor> staged_;   // per sequence: input of the site just captured
};

} // namespace faq
