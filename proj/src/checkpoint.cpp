#include "forgetd/checkpoint.hpp"

#include "forgetd/bytes.hpp"

#include <cstring>
#include <fstream>

namespace forgetd {

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_binary_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

std::vector<std::uint8_t> arch_descriptor(const Architecture& arch) {
    std::vector<std::uint8_t> d;
    put_u32(d, static_cast<std::uint32_t>(arch.in_channels));
    put_u32(d, static_cast<std::uint32_t>(arch.in_h));
    put_u32(d, static_cast<std::uint32_t>(arch.in_w));
    put_u32(d, static_cast<std::uint32_t>(arch.layers.size()));
    for (const LayerSpec& l : arch.layers) {
        put_u32(d, static_cast<std::uint32_t>(l.kind));
        switch (l.kind) {
            case LayerKind::dense:
                put_u32(d, static_cast<std::uint32_t>(l.in));
                put_u32(d, static_cast<std::uint32_t>(l.out));
                break;
            case LayerKind::conv2d:
                put_u32(d, static_cast<std::uint32_t>(l.in_channels));
                put_u32(d, static_cast<std::uint32_t>(l.out_channels));
                put_u32(d, static_cast<std::uint32_t>(l.kernel));
                put_u32(d, static_cast<std::uint32_t>(l.stride));
                break;
            case LayerKind::maxpool2d:
                put_u32(d, static_cast<std::uint32_t>(l.window));
                break;
            case LayerKind::relu:
            case LayerKind::flatten:
                break;
        }
    }
    return d;
}

Architecture parse_arch_descriptor(ByteReader& r) {
    Architecture arch;
    arch.in_channels = r.u32();
    arch.in_h = r.u32();
    arch.in_w = r.u32();
    const std::uint32_t n_layers = r.u32();
    if (n_layers > 1024) throw IntegrityError("implausible layer count in " + r.what());
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::uint32_t kind = r.u32();
        switch (kind) {
            case static_cast<std::uint32_t>(LayerKind::dense): {
                const std::uint32_t in = r.u32(), out = r.u32();
                arch.layers.push_back(LayerSpec::dense(in, out));
                break;
            }
            case static_cast<std::uint32_t>(LayerKind::conv2d): {
                const std::uint32_t ic = r.u32(), oc = r.u32(), k = r.u32(), s = r.u32();
                arch.layers.push_back(LayerSpec::conv2d(ic, oc, k, s));
                break;
            }
            case static_cast<std::uint32_t>(LayerKind::maxpool2d):
                arch.layers.push_back(LayerSpec::maxpool2d(r.u32()));
                break;
            case static_cast<std::uint32_t>(LayerKind::relu):
                arch.layers.push_back(LayerSpec::relu());
                break;
            case static_cast<std::uint32_t>(LayerKind::flatten):
                arch.layers.push_back(LayerSpec::flatten());
                break;
            default:
                throw IntegrityError("unknown layer kind " + std::to_string(kind) + " in " +
                                     r.what());
        }
    }
    return arch;
}

Fingerprint arch_fingerprint(const Architecture& arch) {
    // Not cryptographic: the fingerprint only guards against applying a ledger
    // to a model with a different architecture.
    const std::vector<std::uint8_t> desc = arch_descriptor(arch);
    const std::uint64_t h = fnv1a64(desc.data(), desc.size());
    Fingerprint fp{};
    std::uint64_t state = h;
    for (int lane = 0; lane < 4; ++lane) {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z ^= z >> 31;
        for (int i = 0; i < 8; ++i)
            fp[static_cast<std::size_t>(lane * 8 + i)] = static_cast<std::uint8_t>(z >> (8 * i));
    }
    return fp;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'F', 'G', 'T', 'D'});
    put_u16(out, kCheckpointVersion);
    const std::vector<std::uint8_t> desc = arch_descriptor(params.arch);
    out.insert(out.end(), desc.begin(), desc.end());
    for (const LayerParams& l : params.layers)
        for (Eigen::Index i = 0; i < l.values.size(); ++i) put_f64(out, l.values[i]);
    return out;
}

ModelParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "checkpoint");
    const std::uint8_t* magic = r.take(4);
    if (std::memcmp(magic, "FGTD", 4) != 0) throw IntegrityError("bad checkpoint magic");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw IntegrityError("unsupported checkpoint version " + std::to_string(version));

    ModelParams m;
    m.arch = parse_arch_descriptor(r);
    try {
        m.arch.output_shapes();  // validates the parsed architecture
    } catch (const ConfigError& e) {
        throw IntegrityError(std::string("invalid checkpoint architecture: ") + e.what());
    }
    for (const LayerSpec& l : m.arch.layers) {
        if (!l.parameterized()) continue;
        LayerParams p;
        p.weight_count = l.weight_count();
        p.bias_count = l.bias_count();
        if (p.weight_count + p.bias_count > r.remaining() / 8)
            throw IntegrityError("implausible parameter count in checkpoint");
        p.values = Vector::Zero(static_cast<Eigen::Index>(p.weight_count + p.bias_count));
        for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] = r.f64();
        m.layers.push_back(std::move(p));
    }
    if (!r.exhausted()) throw IntegrityError("trailing bytes after checkpoint payload");
    return m;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    write_binary_file(path, serialize_checkpoint(params));
}

ModelParams load_checkpoint(const std::string& path) {
    return deserialize_checkpoint(read_binary_file(path));
}

}  // namespace forgetd
