#include "faq/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace faq {

namespace {

constexpr char kCkptMagic[8] = {'F', 'A', 'Q', 'C', 'K', 'P', 'T', '1'};
constexpr char kCalibMagic[8] = {'F', 'A', 'Q', 'C', 'A', 'L', 'B', '1'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

std::vector<uint8_t> f32_payload(const Tensor& t) {
    std::vector<uint8_t> bytes(t.data.size() * 4);
    if (!bytes.empty()) std::memcpy(bytes.data(), t.data.data(), bytes.size());
    return bytes;
}

struct PendingTensor {
    std::string name;
    std::string dtype;
    std::vector<int64_t> shape;
    std::vector<uint8_t> payload;
};

void append_f32(std::vector<PendingTensor>& out, const std::string& name, const Tensor& t) {
    out.push_back({name, "f32", t.shape, f32_payload(t)});
}

void append_linear(std::vector<PendingTensor>& out, std::map<std::string, QuantMeta>& meta,
                   const std::string& site_name, const LinearWeight& w) {
    if (!w.is_quantized()) {
        if (!w.full) fail(ErrCode::invalid_argument, "linear " + site_name + " has no weight");
        append_f32(out, site_name + ".weight", *w.full);
        return;
    }
    const QuantizedTensor& q = w.quant->qweight;
    meta[site_name] = QuantMeta{q.bits, q.group_size, q.symmetric};
    out.push_back({site_name + ".weight.codes", "qint", {q.m, q.n}, q.codes});
    Tensor scales({q.m, q.groups_per_row()}, q.scales);
    append_f32(out, site_name + ".weight.scales", scales);
    out.push_back({site_name + ".weight.zeros", "qint", {q.m, q.groups_per_row()}, q.zero_points});
    append_f32(out, site_name + ".weight.scale_vec", w.quant->scale_vec);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> parts;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) parts.push_back(tok);
    return parts;
}

int64_t parse_int(const std::string& s, const char* what) {
    try {
        size_t pos = 0;
        const int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrCode::format, std::string("manifest: bad integer for ") + what + ": '" + s + "'");
    }
}

std::vector<int64_t> parse_shape(const std::string& s) {
    std::vector<int64_t> shape;
    std::string cur;
    for (char ch : s + "x") {
        if (ch == 'x') {
            if (cur.empty()) fail(ErrCode::format, "manifest: bad shape '" + s + "'");
            shape.push_back(parse_int(cur, "shape"));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    return shape;
}

int64_t dtype_elem_size(const std::string& dtype, const std::string& tensor_name) {
    if (dtype == "f32") return 4;
    if (dtype == "qint") return 1;
    fail(ErrCode::unknown_dtype, "tensor " + tensor_name + " has unknown dtype '" + dtype + "'");
}

} // namespace

uint64_t fnv1a64(const uint8_t* data, size_t len) {
    uint64_t h = 14695981039346656037ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

void save_checkpoint(const std::string& path, const ToyModel& model) {
    model.dims.validate();
    std::vector<PendingTensor> tensors;
    std::map<std::string, QuantMeta> quant_meta;
    append_f32(tensors, "tok_emb.weight", model.tok_emb);
    append_f32(tensors, "pos_emb.weight", model.pos_emb);
    for (int64_t b = 0; b < model.dims.num_blocks; ++b) {
        const Block& blk = model.blocks[static_cast<size_t>(b)];
        const std::string prefix = "blocks." + std::to_string(b) + ".";
        append_f32(tensors, prefix + "ln1.gain", blk.ln1_gain);
        append_f32(tensors, prefix + "ln1.bias", blk.ln1_bias);
        append_linear(tensors, quant_meta, prefix + "qkv", blk.qkv);
        append_linear(tensors, quant_meta, prefix + "o", blk.o);
        append_f32(tensors, prefix + "ln2.gain", blk.ln2_gain);
        append_f32(tensors, prefix + "ln2.bias", blk.ln2_bias);
        append_linear(tensors, quant_meta, prefix + "mlp_up", blk.mlp_up);
        append_linear(tensors, quant_meta, prefix + "mlp_down", blk.mlp_down);
    }
    append_f32(tensors, "ln_f.gain", model.lnf_gain);
    append_f32(tensors, "ln_f.bias", model.lnf_bias);

    std::ostringstream manifest;
    manifest << "format_version=1\n";
    manifest << "vocab_size=" << model.dims.vocab_size << "\n";
    manifest << "hidden_dim=" << model.dims.hidden_dim << "\n";
    manifest << "num_blocks=" << model.dims.num_blocks << "\n";
    manifest << "num_heads=" << model.dims.num_heads << "\n";
    manifest << "mlp_dim=" << model.dims.mlp_dim << "\n";
    manifest << "max_seq_len=" << model.dims.max_seq_len << "\n";
    manifest << "tensor_count=" << tensors.size() << "\n";
    uint64_t offset = 0;
    for (size_t i = 0; i < tensors.size(); ++i) {
        const PendingTensor& t = tensors[i];
        manifest << "tensor." << i << "=" << t.name << " " << t.dtype << " ";
        for (size_t d = 0; d < t.shape.size(); ++d) manifest << (d ? "x" : "") << t.shape[d];
        manifest << " " << offset << " " << t.payload.size() << "\n";
        offset += t.payload.size() + 8; // payload plus checksum trailer
    }
    for (const auto& [site, meta] : quant_meta)
        manifest << "quant." << site << "=" << meta.bits << " " << meta.group_size << " "
                 << (meta.symmetric ? 1 : 0) << "\n";

    const std::string manifest_str = manifest.str();
    std::string header;
    header.append(kCkptMagic, 8);
    put_u64(header, manifest_str.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrCode::io, "cannot open '" + path + "' for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    for (const PendingTensor& t : tensors) {
        out.write(reinterpret_cast<const char*>(t.payload.data()), static_cast<std::streamsize>(t.payload.size()));
        std::string trailer;
        put_u64(trailer, fnv1a64(t.payload.data(), t.payload.size()));
        out.write(trailer.data(), 8);
    }
    if (!out) fail(ErrCode::io, "write failed for '" + path + "'");
}

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrCode::io, "cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace

Checkpoint load_checkpoint(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    if (bytes.size() < 16) fail(ErrCode::truncated, "file shorter than fixed header");
    if (std::memcmp(bytes.data(), kCkptMagic, 8) != 0) fail(ErrCode::bad_magic, "not a checkpoint file (magic mismatch)");
    const uint64_t manifest_len = get_u64(bytes.data() + 8);
    if (16 + manifest_len > bytes.size()) fail(ErrCode::truncated, "manifest extends past end of file");
    const std::string manifest_str(reinterpret_cast<const char*>(bytes.data()) + 16, manifest_len);
    const uint8_t* payload_base = bytes.data() + 16 + manifest_len;
    const uint64_t payload_size = bytes.size() - 16 - manifest_len;

    Checkpoint ckpt;
    std::map<std::string, std::string> scalars;
    std::map<int64_t, std::string> tensor_lines;
    std::istringstream mis(manifest_str);
    std::string line;
    while (std::getline(mis, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) fail(ErrCode::format, "manifest line without '=': '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key.rfind("tensor.", 0) == 0 && key != "tensor_count") {
            tensor_lines[parse_int(key.substr(7), "tensor index")] = value;
        } else if (key.rfind("quant.", 0) == 0) {
            const auto parts = split_ws(value);
            if (parts.size() != 3) fail(ErrCode::format, "bad quant entry '" + line + "'");
            QuantMeta meta;
            meta.bits = static_cast<int>(parse_int(parts[0], "quant bits"));
            meta.group_size = static_cast<int>(parse_int(parts[1], "quant group"));
            meta.symmetric = parse_int(parts[2], "quant symmetric") != 0;
            ckpt.quant_meta[key.substr(6)] = meta;
        } else {
            scalars[key] = value;
        }
    }

    auto require = [&](const char* key) -> const std::string& {
        auto it = scalars.find(key);
        if (it == scalars.end()) fail(ErrCode::format, std::string("manifest missing key '") + key + "'");
        return it->second;
    };
    if (parse_int(require("format_version"), "format_version") != 1)
        fail(ErrCode::format, "unsupported format_version");
    ModelDims& dims = ckpt.manifest.dims;
    dims.vocab_size = parse_int(require("vocab_size"), "vocab_size");
    dims.hidden_dim = parse_int(require("hidden_dim"), "hidden_dim");
    dims.num_blocks = parse_int(require("num_blocks"), "num_blocks");
    dims.num_heads = parse_int(require("num_heads"), "num_heads");
    dims.mlp_dim = parse_int(require("mlp_dim"), "mlp_dim");
    dims.max_seq_len = parse_int(require("max_seq_len"), "max_seq_len");
    dims.validate();

    const int64_t tensor_count = parse_int(require("tensor_count"), "tensor_count");
    if (tensor_count <= 0 || tensor_lines.empty()) fail(ErrCode::format, "empty tensor index");
    if (tensor_count != static_cast<int64_t>(tensor_lines.size()))
        fail(ErrCode::format, "tensor_count disagrees with number of tensor entries");

    struct Range {
        uint64_t begin, end;
        std::string name;
    };
    std::vector<Range> ranges;
    for (const auto& [idx, value] : tensor_lines) {
        if (idx < 0 || idx >= tensor_count) fail(ErrCode::format, "tensor index out of range");
        const auto parts = split_ws(value);
        if (parts.size() != 5) fail(ErrCode::format, "bad tensor entry '" + value + "'");
        TensorIndexEntry entry;
        entry.name = parts[0];
        entry.dtype = parts[1];
        entry.shape = parse_shape(parts[2]);
        entry.offset = static_cast<uint64_t>(parse_int(parts[3], "offset"));
        entry.byte_length = static_cast<uint64_t>(parse_int(parts[4], "byte_length"));

        int64_t numel = 1;
        for (int64_t d : entry.shape) {
            if (d <= 0) fail(ErrCode::format, "tensor " + entry.name + " has non-positive dimension");
            numel *= d;
        }
        const int64_t elem = dtype_elem_size(entry.dtype, entry.name);
        if (static_cast<uint64_t>(numel * elem) != entry.byte_length)
            fail(ErrCode::format, "tensor " + entry.name + " shape disagrees with byte length");
        if (entry.offset + entry.byte_length + 8 > payload_size)
            fail(ErrCode::truncated, "tensor " + entry.name + " extends past end of file");
        ranges.push_back({entry.offset, entry.offset + entry.byte_length + 8, entry.name});

        const uint8_t* p = payload_base + entry.offset;
        const uint64_t stored = get_u64(p + entry.byte_length);
        const uint64_t actual = fnv1a64(p, entry.byte_length);
        if (stored != actual)
            fail(ErrCode::checksum_mismatch, "checksum mismatch in tensor " + entry.name);

        if (ckpt.f32_tensors.count(entry.name) || ckpt.byte_tensors.count(entry.name))
            fail(ErrCode::format, "duplicate tensor " + entry.name);
        if (entry.dtype == "f32") {
            Tensor t = Tensor::zeros(entry.shape);
            std::memcpy(t.data.data(), p, entry.byte_length);
            ckpt.f32_tensors.emplace(entry.name, std::move(t));
        } else {
            ckpt.byte_tensors.emplace(entry.name, std::vector<uint8_t>(p, p + entry.byte_length));
        }
        ckpt.manifest.tensor_index.push_back(std::move(entry));
    }

    std::sort(ranges.begin(), ranges.end(), [](const Range& a, const Range& b) { return a.begin < b.begin; });
    for (size_t i = 1; i < ranges.size(); ++i)
        if (ranges[i].begin < ranges[i - 1].end)
            fail(ErrCode::format, "overlapping payloads: " + ranges[i - 1].name + " and " + ranges[i].name);

    return ckpt;
}

namespace {

const Tensor& want_f32(const Checkpoint& ckpt, const std::string& name, int64_t rows, int64_t cols) {
    auto it = ckpt.f32_tensors.find(name);
    if (it == ckpt.f32_tensors.end()) fail(ErrCode::format, "checkpoint missing tensor " + name);
    if (it->second.rank() != 2 || it->second.rows() != rows || it->second.cols() != cols)
        fail(ErrCode::format, "tensor " + name + " has shape " + it->second.shape_str() + ", expected [" +
                                  std::to_string(rows) + "x" + std::to_string(cols) + "]");
    return it->second;
}

LinearWeight load_linear(const Checkpoint& ckpt, const std::string& site_name, int64_t out_dim, int64_t in_dim) {
    LinearWeight w;
    auto meta_it = ckpt.quant_meta.find(site_name);
    if (meta_it == ckpt.quant_meta.end()) {
        w.full = want_f32(ckpt, site_name + ".weight", out_dim, in_dim);
        return w;
    }
    const QuantMeta& meta = meta_it->second;
    QuantizedTensor q;
    q.m = out_dim;
    q.n = in_dim;
    q.bits = meta.bits;
    q.group_size = meta.group_size;
    q.symmetric = meta.symmetric;
    if (q.bits < 2 || q.bits > 8) fail(ErrCode::format, "quant meta for " + site_name + " has bad bit width");
    if (q.group_size != -1 && (q.group_size < 1 || in_dim % q.group_size != 0))
        fail(ErrCode::format, "quant meta for " + site_name + " has bad group size");

    auto codes_it = ckpt.byte_tensors.find(site_name + ".weight.codes");
    if (codes_it == ckpt.byte_tensors.end()) fail(ErrCode::format, "checkpoint missing tensor " + site_name + ".weight.codes");
    if (static_cast<int64_t>(codes_it->second.size()) != out_dim * in_dim)
        fail(ErrCode::format, "codes for " + site_name + " have wrong size");
    q.codes = codes_it->second;

    const int64_t groups = q.groups_per_row();
    q.scales = want_f32(ckpt, site_name + ".weight.scales", out_dim, groups).data;
    auto zeros_it = ckpt.byte_tensors.find(site_name + ".weight.zeros");
    if (zeros_it == ckpt.byte_tensors.end()) fail(ErrCode::format, "checkpoint missing tensor " + site_name + ".weight.zeros");
    if (static_cast<int64_t>(zeros_it->second.size()) != out_dim * groups)
        fail(ErrCode::format, "zeros for " + site_name + " have wrong size");
    q.zero_points = zeros_it->second;

    Tensor scale_vec = want_f32(ckpt, site_name + ".weight.scale_vec", 1, in_dim);
    w.quant = QuantizedLinear(std::move(q), std::move(scale_vec));
    return w;
}

} // namespace

ToyModel model_from_checkpoint(const Checkpoint& ckpt) {
    const ModelDims& d = ckpt.manifest.dims;
    ToyModel m;
    m.dims = d;
    m.tok_emb = want_f32(ckpt, "tok_emb.weight", d.vocab_size, d.hidden_dim);
    m.pos_emb = want_f32(ckpt, "pos_emb.weight", d.max_seq_len, d.hidden_dim);
    m.lnf_gain = want_f32(ckpt, "ln_f.gain", 1, d.hidden_dim);
    m.lnf_bias = want_f32(ckpt, "ln_f.bias", 1, d.hidden_dim);
    m.blocks.resize(static_cast<size_t>(d.num_blocks));
    size_t expected_tensors = 6; // embeddings, final norm
    for (int64_t b = 0; b < d.num_blocks; ++b) {
        Block& blk = m.blocks[static_cast<size_t>(b)];
        const std::string prefix = "blocks." + std::to_string(b) + ".";
        blk.ln1_gain = want_f32(ckpt, prefix + "ln1.gain", 1, d.hidden_dim);
        blk.ln1_bias = want_f32(ckpt, prefix + "ln1.bias", 1, d.hidden_dim);
        blk.ln2_gain = want_f32(ckpt, prefix + "ln2.gain", 1, d.hidden_dim);
        blk.ln2_bias = want_f32(ckpt, prefix + "ln2.bias", 1, d.hidden_dim);
        blk.qkv = load_linear(ckpt, prefix + "qkv", 3 * d.hidden_dim, d.hidden_dim);
        blk.o = load_linear(ckpt, prefix + "o", d.hidden_dim, d.hidden_dim);
        blk.mlp_up = load_linear(ckpt, prefix + "mlp_up", d.mlp_dim, d.hidden_dim);
        blk.mlp_down = load_linear(ckpt, prefix + "mlp_down", d.hidden_dim, d.mlp_dim);
        expected_tensors += 4; // norms
        for (const LinearWeight* w : {&blk.qkv, &blk.o, &blk.mlp_up, &blk.mlp_down})
            expected_tensors += w->is_quantized() ? 4 : 1;
    }
    if (ckpt.manifest.tensor_index.size() != expected_tensors)
        fail(ErrCode::format, "checkpoint carries tensors outside the fixed layout");
    return m;
}

ToyModel load_model(const std::string& path) { return model_from_checkpoint(load_checkpoint(path)); }

void save_calibration(const std::string& path, const CalibrationSet& set) {
    if (set.sequences.empty()) fail(ErrCode::invalid_argument, "refusing to save empty calibration set");
    std::string out;
    out.append(kCalibMagic, 8);
    put_u64(out, set.seed);
    put_u32(out, static_cast<uint32_t>(set.sequences.size()));
    put_u32(out, static_cast<uint32_t>(set.seq_len));
    uint32_t knob_bits = 0;
    static_assert(sizeof(float) == 4);
    std::memcpy(&knob_bits, &set.bias_knob, 4);
    put_u32(out, knob_bits);
    put_u32(out, static_cast<uint32_t>(set.vocab_size));
    for (const auto& seq : set.sequences) {
        if (static_cast<int64_t>(seq.size()) != set.seq_len)
            fail(ErrCode::invalid_argument, "calibration sequences must all have length seq_len");
        for (uint32_t tok : seq) put_u32(out, tok);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrCode::io, "cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail(ErrCode::io, "write failed for '" + path + "'");
}

CalibrationSet load_calibration(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    constexpr size_t header = 8 + 8 + 4 + 4 + 4 + 4;
    if (bytes.size() < header) fail(ErrCode::truncated, "calibration file shorter than header");
    if (std::memcmp(bytes.data(), kCalibMagic, 8) != 0) fail(ErrCode::bad_magic, "not a calibration file (magic mismatch)");
    CalibrationSet set;
    set.seed = get_u64(bytes.data() + 8);
    const uint32_t n = get_u32(bytes.data() + 16);
    set.seq_len = get_u32(bytes.data() + 20);
    const uint32_t knob_bits = get_u32(bytes.data() + 24);
    std::memcpy(&set.bias_knob, &knob_bits, 4);
    set.vocab_size = get_u32(bytes.data() + 28);
    if (n == 0 || set.seq_len == 0) fail(ErrCode::format, "calibration header declares empty set");
    const uint64_t want = header + static_cast<uint64_t>(n) * static_cast<uint64_t>(set.seq_len) * 4;
    if (bytes.size() < want) fail(ErrCode::truncated, "calibration file shorter than declared token payload");
    if (bytes.size() > want) fail(ErrCode::format, "calibration file has trailing bytes");
    set.sequences.resize(n);
    const uint8_t* p = bytes.data() + header;
    for (auto& seq : set.sequences) {
        seq.resize(static_cast<size_t>(set.seq_len));
        for (auto& tok : seq) {
            tok = get_u32(p);
            p += 4;
        }
    }
    return set;
}

} // namespace faq
