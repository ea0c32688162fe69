#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "faq/model.hpp"

namespace faq {

// Checkpoint file layout ("FAQCKPT1"):
//
//   bytes 0..7    magic "FAQCKPT1"
//   bytes 8..15   u64 LE manifest byte length
//   manifest      UTF-8 key=value lines (documented below)
//   payloads      raw little-endian tensor data, in manifest order; every
//                 payload is immediately followed by its u64 LE FNV-1a hash
//
// Manifest keys:
//   format_version=1
//   vocab_size=..., hidden_dim=..., num_blocks=..., num_heads=...,
//   mlp_dim=..., max_seq_len=...
//   tensor_count=K
//   tensor.<i>=<name> <dtype> <d0>x<d1> <offset> <byte_length>
//       dtype is f32 (4 bytes/elem) or qint (1 byte/elem); offsets are
//       relative to the start of the payload region
//   quant.<site>=<bits> <group_size> <symmetric 0|1>
//       present once per quantized linear; its tensors are stored as
//       <site>.weight.codes / .scales / .zeros / .scale_vec

struct TensorIndexEntry {
    std::string name;
    std::string dtype; // "f32" or "qint"
    std::vector<int64_t> shape;
    uint64_t offset = 0;
    uint64_t byte_length = 0;
};

struct ModelManifest {
    ModelDims dims;
    std::vector<TensorIndexEntry> tensor_index;
};

struct QuantMeta {
    int bits = 0;
    int group_size = -1;
    bool symmetric = false;
};

// Raw parsed checkpoint: manifest plus payload bytes keyed by tensor name.
struct Checkpoint {
    ModelManifest manifest;
    std::map<std::string, Tensor> f32_tensors;
    std::map<std::string, std::vector<uint8_t>> byte_tensors; // qint payloads
    std::map<std::string, QuantMeta> quant_meta;              // keyed by site name
};

uint64_t fnv1a64(const uint8_t* data, size_t len);

void save_checkpoint(const std::string& path, const ToyModel& model);
Checkpoint load_checkpoint(const std::string& path);
ToyModel model_from_checkpoint(const Checkpoint& ckpt);
ToyModel load_model(const std::string& path);

// Calibration file layout ("FAQCALB1"): magic, u64 seed, u32 N, u32 seq_len,
// f32 bias_knob, u32 vocab_size, then N*seq_len u32 LE token ids.
void save_calibration(const std::string& path, const CalibrationSet& set);
CalibrationSet load_calibration(const std::string& path);

} // namespace faq
