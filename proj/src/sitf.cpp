#include "sit/sitf.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "sit/error.hpp"

namespace sit {
namespace {

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32le(out, bits);
}

float get_f32le(const unsigned char* p) {
    const std::uint32_t bits = get_u32le(p);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

} // namespace

void save_feature_map(const FeatureMap& fm, const std::string& path) {
    if (fm.data.rank() != 3) {
        throw ShapeMismatch("feature map must be rank 3, got " + fm.data.shape_str());
    }
    std::string buf;
    buf.reserve(10 + 12 + fm.data.size() * 4);
    buf += "SITF";
    buf.push_back(1);  // version
    buf.push_back(3);  // ndim
    for (std::size_t axis = 0; axis < 3; ++axis) {
        put_u32le(buf, static_cast<std::uint32_t>(fm.data.extent(axis)));
    }
    for (std::size_t i = 0; i < fm.data.size(); ++i) {
        put_f32le(buf, static_cast<float>(fm.data[i]));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoFailure("write failed: " + path);
}

FeatureMap load_feature_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 4 || std::memcmp(buf.data(), "SITF", 4) != 0) {
        throw BadMagic("not a SITF file: " + path);
    }
    if (buf.size() < 6) throw TruncatedPayload("SITF header truncated: " + path);
    if (buf[4] != 1) {
        throw UnsupportedVersion("SITF version " + std::to_string(buf[4]) + " unsupported");
    }
    if (buf[5] != 3) {
        throw UnsupportedVersion("SITF ndim " + std::to_string(buf[5]) + " unsupported");
    }
    if (buf.size() < 18) throw TruncatedPayload("SITF extents truncated: " + path);
    const std::size_t h = get_u32le(buf.data() + 6);
    const std::size_t w = get_u32le(buf.data() + 10);
    const std::size_t c = get_u32le(buf.data() + 14);
    if (h == 0 || w == 0 || c == 0) {
        throw ShapeMismatch("SITF declares zero extent in " + path);
    }
    const std::size_t count = h * w * c;
    if (buf.size() != 18 + count * 4) {
        throw TruncatedPayload("SITF payload is " + std::to_string(buf.size() - 18) +
                               " bytes, expected " + std::to_string(count * 4));
    }
    Tensor data({h, w, c});
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<double>(get_f32le(buf.data() + 18 + i * 4));
    }
    return FeatureMap{std::move(data), Provenance::kPrecomputed};
}

FeatureMap load_feature_map(const std::string& path, const FeatureShape& expected) {
    FeatureMap fm = load_feature_map(path);
    if (fm.data.extent(0) != expected.h || fm.data.extent(1) != expected.w ||
        fm.data.extent(2) != expected.c) {
        throw ShapeMismatch("SITF shape " + fm.data.shape_str() + " does not match configured " +
                            shape_to_string({expected.h, expected.w, expected.c}));
    }
    return fm;
}

} // namespace sit
