#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "tsctm/model.hpp"

namespace tsctm {

namespace {

constexpr unsigned char kMagic[] = {'T', 'S', 'C', 'T', 'M', 0x01};
constexpr std::size_t kHeaderWords = 4;
// Last header word: encoder layer count in the low byte, flag bits above.
constexpr std::uint64_t kBatchNormFlag = 1ULL << 8;

// Stored tensors in file order: trained tensors, then normalization statistics.
std::vector<std::span<double>> stored(ModelParams& p) {
    auto out = p.tensors();
    if (p.batch_norm) {
        out.push_back(p.norm_mean);
        out.push_back(p.norm_var);
    }
    return out;
}

std::vector<std::span<double>> stored(const ModelParams& p) {
    return stored(const_cast<ModelParams&>(p));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const unsigned char> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
    return v;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<unsigned char> serialize_checkpoint(const ModelParams& params) {
    const ModelShape s = params.shape();
    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    put_u64(out, s.vocab_size);
    put_u64(out, s.num_topics);
    put_u64(out, s.hidden);
    put_u64(out, s.encoder_layers | (s.batch_norm ? kBatchNormFlag : 0));
    for (auto t : stored(params)) {
        for (double x : t) put_u64(out, std::bit_cast<std::uint64_t>(x));
    }
    const std::span<const unsigned char> payload(out.data() + sizeof kMagic,
                                                 out.size() - sizeof kMagic);
    put_u64(out, fnv1a64(payload));
    return out;
}

ModelParams deserialize_checkpoint(std::span<const unsigned char> bytes) {
    const std::size_t header_end = sizeof kMagic + 8 * kHeaderWords;
    if (bytes.size() < header_end + 8 ||
        std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("checkpoint: bad magic or truncated header");
    }
    ModelShape s;
    s.vocab_size = get_u64(bytes, sizeof kMagic);
    s.num_topics = get_u64(bytes, sizeof kMagic + 8);
    s.hidden = get_u64(bytes, sizeof kMagic + 16);
    const std::uint64_t flags = get_u64(bytes, sizeof kMagic + 24);
    s.encoder_layers = flags & 0xff;
    s.batch_norm = (flags & kBatchNormFlag) != 0;
    if ((flags & ~(0xffULL | kBatchNormFlag)) != 0 || s.vocab_size == 0 || s.num_topics == 0 ||
        s.hidden == 0 || s.encoder_layers < 1 || s.encoder_layers > 2 || s.vocab_size > (1ULL << 32) || s.hidden > (1ULL << 24) ||
        s.num_topics > (1ULL << 24)) {
        throw std::runtime_error("checkpoint: implausible header");
    }
    ModelParams p = ModelParams::zeros(s);
    std::size_t expected = header_end + 8;
    for (auto t : stored(p)) expected += 8 * t.size();
    if (bytes.size() != expected) {
        throw std::runtime_error("checkpoint: size " + std::to_string(bytes.size()) +
                                 " does not match header (expected " +
                                 std::to_string(expected) + ")");
    }
    const std::size_t payload_end = bytes.size() - 8;
    const auto payload = bytes.subspan(sizeof kMagic, payload_end - sizeof kMagic);
    if (fnv1a64(payload) != get_u64(bytes, payload_end)) {
        throw std::runtime_error("checkpoint: checksum mismatch");
    }
    std::size_t at = header_end;
    for (auto t : stored(p)) {
        for (double& x : t) {
            x = std::bit_cast<double>(get_u64(bytes, at));
            at += 8;
        }
    }
    return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(params);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    try {
        return deserialize_checkpoint(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace tsctm
