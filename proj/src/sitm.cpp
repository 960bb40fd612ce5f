#include "sit/sitm.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "sit/error.hpp"

namespace sit {
namespace {

void put_u32le(std::string& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<char>((v >> shift) & 0xff));
    }
}

void put_f64le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int shift = 0; shift < 64; shift += 8) {
        out.push_back(static_cast<char>((bits >> shift) & 0xff));
    }
}

struct Reader {
    const unsigned char* p;
    std::size_t left;
    const std::string& path;

    void need(std::size_t n) const {
        if (left < n) {
            throw TruncatedPayload("SITM truncated: " + path);
        }
    }
    std::uint8_t u8() {
        need(1);
        const std::uint8_t v = *p;
        ++p;
        --left;
        return v;
    }
    std::uint32_t u32le() {
        need(4);
        std::uint32_t v = 0;
        for (int shift = 0; shift < 32; shift += 8) {
            v |= static_cast<std::uint32_t>(*p++) << shift;
        }
        left -= 4;
        return v;
    }
    double f64le() {
        need(8);
        std::uint64_t bits = 0;
        for (int shift = 0; shift < 64; shift += 8) {
            bits |= static_cast<std::uint64_t>(*p++) << shift;
        }
        left -= 8;
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
};

std::uint8_t variant_tag(Variant v) {
    switch (v) {
        case Variant::kBaseline: return 0;
        case Variant::kNoTransformer: return 1;
        case Variant::kNoGmp: return 2;
        case Variant::kFull: return 3;
    }
    return 3;
}

Variant variant_from_tag(std::uint8_t tag, const std::string& path) {
    switch (tag) {
        case 0: return Variant::kBaseline;
        case 1: return Variant::kNoTransformer;
        case 2: return Variant::kNoGmp;
        case 3: return Variant::kFull;
        default:
            throw UnsupportedVersion("SITM variant tag " + std::to_string(tag) + " in " + path);
    }
}

// The architecture is recovered from tensor shapes alone.
ModelConfig infer_config(Variant variant, const std::map<std::string, Tensor>& tensors,
                         const std::string& path) {
    ModelConfig cfg;
    auto get = [&](const std::string& name) -> const Tensor& {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw MissingTensor("SITM missing tensor '" + name + "' in " + path);
        }
        return it->second;
    };
    switch (variant) {
        case Variant::kBaseline:
            cfg.backbone_channels = get("head.weight").extent(0);
            break;
        case Variant::kNoTransformer:
            cfg.backbone_channels = get("branch1.kernel").extent(2);
            break;
        case Variant::kNoGmp:
        case Variant::kFull: {
            cfg.backbone_channels = get("branch1.kernel").extent(2);
            const Tensor& proj = get("proj.weight");
            cfg.d_proj = proj.extent(1);
            cfg.ffn_dim = get("block0.ffn1.weight").extent(1);
            std::size_t blocks = 0, heads = 0;
            for (const auto& [name, t] : tensors) {
                (void)t;
                if (name.rfind("block", 0) == 0) {
                    const std::size_t b = std::stoul(name.substr(5));
                    blocks = std::max(blocks, b + 1);
                }
                if (name.rfind("block0.attn.h", 0) == 0 &&
                    name.find(".wq") != std::string::npos) {
                    ++heads;
                }
            }
            if (blocks == 0 || heads == 0) {
                throw MissingTensor("SITM lacks encoder tensors in " + path);
            }
            cfg.blocks = blocks;
            cfg.heads = heads;
            break;
        }
    }
    return cfg;
}

} // namespace

void save_model(SITModel& model, const std::string& path) {
    std::string buf;
    buf += "SITM";
    buf.push_back(1);  // version
    buf.push_back(static_cast<char>(variant_tag(model.variant())));
    const std::vector<ParamView> params = model.params();
    put_u32le(buf, static_cast<std::uint32_t>(params.size()));
    for (const ParamView& p : params) {
        put_u32le(buf, static_cast<std::uint32_t>(p.name.size()));
        buf += p.name;
        buf.push_back(static_cast<char>(p.value->rank()));
        for (std::size_t axis = 0; axis < p.value->rank(); ++axis) {
            put_u32le(buf, static_cast<std::uint32_t>(p.value->extent(axis)));
        }
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            put_f64le(buf, (*p.value)[i]);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoFailure("write failed: " + path);
}

SITModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open: " + path);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (raw.size() < 4 || std::memcmp(raw.data(), "SITM", 4) != 0) {
        throw BadMagic("not a SITM file: " + path);
    }
    Reader r{raw.data() + 4, raw.size() - 4, path};
    const std::uint8_t version = r.u8();
    if (version != 1) {
        throw UnsupportedVersion("SITM version " + std::to_string(version) + " unsupported");
    }
    const Variant variant = variant_from_tag(r.u8(), path);
    const std::uint32_t count = r.u32le();

    std::map<std::string, Tensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32le();
        const std::string name = r.bytes(name_len);
        const std::uint8_t ndim = r.u8();
        if (ndim == 0 || ndim > 4) {
            throw UnsupportedVersion("SITM tensor '" + name + "' has ndim " +
                                     std::to_string(ndim));
        }
        std::vector<std::size_t> shape(ndim);
        std::size_t total = 1;
        for (std::uint8_t a = 0; a < ndim; ++a) {
            shape[a] = r.u32le();
            total *= shape[a];
        }
        Tensor t(shape);
        for (std::size_t j = 0; j < total; ++j) t[j] = r.f64le();
        if (!tensors.emplace(name, std::move(t)).second) {
            throw UnknownTensorName("SITM duplicate tensor '" + name + "' in " + path);
        }
    }
    if (r.left != 0) {
        throw TruncatedPayload("SITM has " + std::to_string(r.left) + " trailing bytes: " + path);
    }

    const ModelConfig cfg = infer_config(variant, tensors, path);
    SITModel model(variant, cfg, /*seed=*/0);
    for (ParamView& p : model.params()) {
        auto it = tensors.find(p.name);
        if (it == tensors.end()) {
            throw MissingTensor("SITM missing tensor '" + p.name + "' in " + path);
        }
        if (!it->second.same_shape(*p.value)) {
            throw ShapeMismatch("SITM tensor '" + p.name + "' has shape " +
                                it->second.shape_str() + ", expected " + p.value->shape_str());
        }
        *p.value = it->second;
        tensors.erase(it);
    }
    if (!tensors.empty()) {
        throw UnknownTensorName("SITM tensor '" + tensors.begin()->first +
                                "' is not part of a " + variant_name(variant) + " model");
    }
    return model;
}

} // namespace sit
