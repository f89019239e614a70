#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "singulate/encoder.hpp"
#include "singulate/network.hpp"

namespace singulate {

struct VersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChecksumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char model_magic[8] = {'S', 'I', 'N', 'G', 'M', 'D', 'L', '\0'};
inline constexpr std::uint32_t model_version = 1;

struct ModelFile {
    NetworkParams params;
    EncoderConventions conventions;
};

namespace detail {

template <typename T>
inline void put_raw(std::vector<unsigned char>& buf, const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(&value);
    buf.insert(buf.end(), p, p + sizeof(T));
}

inline void put_blob(std::vector<unsigned char>& buf, const std::vector<double>& v) {
    put_raw(buf, std::uint64_t(v.size()));
    const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
    buf.insert(buf.end(), p, p + v.size() * sizeof(double));
}

struct Cursor {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    template <typename T>
    T take() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (off + sizeof(T) > n) throw FormatError("model file ends mid-field");
        T value;
        std::memcpy(&value, p + off, sizeof(T));
        off += sizeof(T);
        return value;
    }

    std::vector<double> take_blob() {
        auto count = take<std::uint64_t>();
        if (off + count * sizeof(double) > n) throw FormatError("model file ends mid-blob");
        std::vector<double> v(count);
        std::memcpy(v.data(), p + off, count * sizeof(double));
        off += count * sizeof(double);
        return v;
    }
};

inline std::uint32_t buffer_crc(const unsigned char* p, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(0L, p, static_cast<uInt>(n)));
}

}  // namespace detail

/// Little-endian binary: magic, version, architecture table, encoder
/// conventions, Adam step, per-layer weight/bias/moment blobs, CRC32.
inline void save_model(const NetworkParams& params, const EncoderConventions& conventions,
                       const std::string& path) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), model_magic, model_magic + sizeof(model_magic));
    detail::put_raw(buf, model_version);

    detail::put_raw(buf, std::uint32_t(params.arch.size()));
    for (const LayerSpec& l : params.arch) {
        detail::put_raw(buf, std::int32_t(l.kind));
        detail::put_raw(buf, l.in_channels);
        detail::put_raw(buf, l.out_channels);
        detail::put_raw(buf, l.in_units);
        detail::put_raw(buf, l.out_units);
    }

    detail::put_raw(buf, conventions.crop_size);
    detail::put_raw(buf, conventions.anchor_x);
    detail::put_raw(buf, conventions.anchor_y);
    detail::put_raw(buf, conventions.interpolation);
    detail::put_raw(buf, conventions.gray_lo);
    detail::put_raw(buf, conventions.gray_hi);
    detail::put_raw(buf, conventions.working_scale);

    detail::put_raw(buf, params.adam_step);
    for (const LayerParams& l : params.layers) {
        detail::put_blob(buf, l.w);
        detail::put_blob(buf, l.b);
        detail::put_blob(buf, l.mw);
        detail::put_blob(buf, l.vw);
        detail::put_blob(buf, l.mb);
        detail::put_blob(buf, l.vb);
    }

    detail::put_raw(buf, detail::buffer_crc(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(model_magic) + sizeof(std::uint32_t) * 2)
        throw ChecksumError("model file too short");
    if (std::memcmp(buf.data(), model_magic, sizeof(model_magic)) != 0)
        throw VersionError("not a model file");

    std::size_t payload = buf.size() - sizeof(std::uint32_t);
    std::uint32_t stored;
    std::memcpy(&stored, buf.data() + payload, sizeof(stored));
    if (stored != detail::buffer_crc(buf.data(), payload))
        throw ChecksumError("model file checksum mismatch");

    detail::Cursor cur{buf.data(), payload, sizeof(model_magic)};
    auto version = cur.take<std::uint32_t>();
    if (version != model_version)
        throw VersionError("unsupported model version " + std::to_string(version));

    ModelFile model;
    auto n_layers = cur.take<std::uint32_t>();
    model.params.arch.resize(n_layers);
    for (LayerSpec& l : model.params.arch) {
        l.kind = static_cast<LayerKind>(cur.take<std::int32_t>());
        l.in_channels = cur.take<std::int32_t>();
        l.out_channels = cur.take<std::int32_t>();
        l.in_units = cur.take<std::int32_t>();
        l.out_units = cur.take<std::int32_t>();
    }

    model.conventions.crop_size = cur.take<std::int32_t>();
    model.conventions.anchor_x = cur.take<std::int32_t>();
    model.conventions.anchor_y = cur.take<std::int32_t>();
    model.conventions.interpolation = cur.take<std::int32_t>();
    model.conventions.gray_lo = cur.take<double>();
    model.conventions.gray_hi = cur.take<double>();
    model.conventions.working_scale = cur.take<double>();

    model.params.adam_step = cur.take<std::int64_t>();
    model.params.layers.resize(n_layers);
    for (LayerParams& l : model.params.layers) {
        l.w = cur.take_blob();
        l.b = cur.take_blob();
        l.mw = cur.take_blob();
        l.vw = cur.take_blob();
        l.mb = cur.take_blob();
        l.vb = cur.take_blob();
    }
    if (cur.off != payload) throw FormatError("model file has trailing bytes");

    try {
        validate_architecture(model.params.arch);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    for (std::size_t i = 0; i < n_layers; ++i) {
        const LayerParams& l = model.params.layers[i];
        std::size_t nw = detail::layer_weight_count(model.params.arch[i]);
        std::size_t nb = detail::layer_bias_count(model.params.arch[i]);
        if (l.w.size() != nw || l.b.size() != nb || l.mw.size() != nw || l.vw.size() != nw ||
            l.mb.size() != nb || l.vb.size() != nb)
            throw FormatError("model file blob shapes disagree with the architecture");
    }
    return model;
}

}  // namespace singulate
