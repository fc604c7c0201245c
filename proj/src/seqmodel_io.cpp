#include <cstring>
#include <fstream>

#include "linefix/seqmodel.hpp"
#include "linefix/textutil.hpp"

namespace linefix::seqmodel {

namespace {

constexpr char kMagic[4] = {'R', 'H', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const std::string& data) : data_(data) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) throw CorruptCheckpoint("checkpoint file truncated");
    }

    const std::string& data_;
    std::size_t pos_ = 0;
};

void write_tensors(std::string& out, const ModelParams& p) {
    for (const auto* tensor : collect_tensors(p)) {
        put_u64(out, tensor->size());
        for (double x : *tensor) put_f64(out, x);
    }
}

void read_tensors(Reader& r, ModelParams& p) {
    for (auto* tensor : collect_tensors(p)) {
        std::uint64_t count = r.u64();
        if (count != tensor->size()) {
            throw CorruptCheckpoint("tensor size does not match the dimension header");
        }
        for (auto& x : *tensor) x = r.f64();
    }
}

ModelParams shaped_like(int v, int e, int h) {
    // init_model allocates; reuse it for the shape and overwrite the values.
    Checkpoint tmp = init_model(v, e, h, 0);
    return std::move(tmp.params);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.vocab_size));
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.embed_dim));
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.hidden_dim));
    put_u32(out, static_cast<std::uint32_t>(ckpt.vocab_version));
    put_u64(out, static_cast<std::uint64_t>(ckpt.pairs_seen));
    put_u64(out, static_cast<std::uint64_t>(ckpt.created_at));
    put_u64(out, static_cast<std::uint64_t>(ckpt.checkpoint_id));
    put_u64(out, static_cast<std::uint64_t>(ckpt.opt.step));
    write_tensors(out, ckpt.params);
    write_tensors(out, ckpt.opt.m);
    write_tensors(out, ckpt.opt.v);
    put_u32(out, crc32(out.data(), out.size()));

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write checkpoint: " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("short write on checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw CorruptCheckpoint("cannot open checkpoint: " + path.string());
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    if (data.size() < sizeof(kMagic) + 8) throw CorruptCheckpoint("checkpoint file too small");
    if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CorruptCheckpoint("bad checkpoint magic");
    }
    const std::uint32_t stored_crc = [&] {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(
                     static_cast<unsigned char>(data[data.size() - 4 + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        return v;
    }();
    if (crc32(data.data(), data.size() - 4) != stored_crc) {
        throw CorruptCheckpoint("checkpoint checksum mismatch");
    }

    Reader r(data);
    r.u32();  // magic, already checked
    if (r.u32() != kFormatVersion) throw CorruptCheckpoint("unsupported checkpoint version");
    const int v = static_cast<int>(r.u32());
    const int e = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32());
    if (v < 1 || e < 1 || h < 1 || v > (1 << 24) || e > (1 << 16) || h > (1 << 16)) {
        throw CorruptCheckpoint("implausible checkpoint dimensions");
    }
    Checkpoint ckpt;
    ckpt.vocab_version = static_cast<int>(r.u32());
    ckpt.pairs_seen = static_cast<std::int64_t>(r.u64());
    ckpt.created_at = static_cast<std::int64_t>(r.u64());
    ckpt.checkpoint_id = static_cast<std::int64_t>(r.u64());
    ckpt.opt.step = static_cast<std::int64_t>(r.u64());
    ckpt.params = shaped_like(v, e, h);
    ckpt.opt.m = shaped_like(v, e, h);
    ckpt.opt.v = shaped_like(v, e, h);
    read_tensors(r, ckpt.params);
    read_tensors(r, ckpt.opt.m);
    read_tensors(r, ckpt.opt.v);
    if (r.pos() != data.size() - 4) {
        throw CorruptCheckpoint("trailing bytes after checkpoint payload");
    }
    return ckpt;
}

}  // namespace linefix::seqmodel
