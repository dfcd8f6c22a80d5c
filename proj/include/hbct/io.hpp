#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <type_traits>
#include <string>
#include <vector>

#include "hbct/encoder.hpp"
#include "hbct/errors.hpp"
#include "hbct/evaluation.hpp"
#include "hbct/losses.hpp"
#include "hbct/training.hpp"

// Binary containers. Layouts are documented in docs/FORMATS.md; every
// multi-byte field is little-endian.

namespace hbct::io {

inline constexpr std::array<char, 4> kMagic{'H', 'B', 'C', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kKindCheckpoint = 1;
inline constexpr std::uint32_t kKindEmbeddings = 2;

class Writer {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        std::array<unsigned char, sizeof(T)> b{};
        std::memcpy(b.data(), &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(b.begin(), b.end());
        }
        bytes_.insert(bytes_.end(), b.begin(), b.end());
    }

    void magic() { bytes_.insert(bytes_.end(), kMagic.begin(), kMagic.end()); }

    const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

class Reader {
public:
    explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

    template <class T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw IoError("truncated file");
        }
        std::array<unsigned char, sizeof(T)> b{};
        std::memcpy(b.data(), bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(b.begin(), b.end());
        }
        T v;
        std::memcpy(&v, b.data(), sizeof(T));
        return v;
    }

    void expect_header(std::uint32_t kind) {
        for (char c : kMagic) {
            if (get<char>() != c) {
                throw IoError("bad magic: not an HBCT file");
            }
        }
        const auto version = get<std::uint32_t>();
        if (version != kFormatVersion) {
            throw IoError("unsupported format version " + std::to_string(version));
        }
        const auto k = get<std::uint32_t>();
        if (k != kind) {
            throw IoError("unexpected file kind " + std::to_string(k));
        }
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    std::vector<unsigned char> bytes_;
    std::size_t pos_ = 0;
};

namespace detail {

inline void write_bytes(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace detail

/// A trained generation together with the geometry it was trained for.
struct Checkpoint {
    EncoderModel model;
    MlrHead<double> head;
    double curvature = 1.0;
    double zeta = 1.0;
};

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
    Writer w;
    w.magic();
    w.put(kFormatVersion);
    w.put(kKindCheckpoint);
    const auto& shape = ck.model.shape();
    w.put(static_cast<std::int32_t>(ck.model.generation()));
    w.put(static_cast<std::uint32_t>(shape.input_dim));
    w.put(static_cast<std::uint32_t>(shape.output_dim));
    w.put(static_cast<std::uint32_t>(shape.hidden.size()));
    for (std::size_t h : shape.hidden) {
        w.put(static_cast<std::uint32_t>(h));
    }
    w.put(static_cast<std::uint32_t>(ck.head.classes));
    w.put(ck.curvature);
    w.put(ck.zeta);
    for (double p : ck.model.params()) {
        w.put(p);
    }
    for (double p : ck.head.weights) {
        w.put(p);
    }
    return w.bytes();
}

inline Checkpoint decode_checkpoint(std::vector<unsigned char> bytes) {
    Reader r(std::move(bytes));
    r.expect_header(kKindCheckpoint);
    const auto generation = r.get<std::int32_t>();
    EncoderShape shape;
    shape.input_dim = r.get<std::uint32_t>();
    shape.output_dim = r.get<std::uint32_t>();
    const auto n_hidden = r.get<std::uint32_t>();
    if (n_hidden > 1024) {
        throw IoError("implausible hidden layer count");
    }
    for (std::uint32_t i = 0; i < n_hidden; ++i) {
        shape.hidden.push_back(r.get<std::uint32_t>());
    }
    const auto classes = r.get<std::uint32_t>();
    Checkpoint ck;
    ck.curvature = r.get<double>();
    ck.zeta = r.get<double>();
    ck.model = EncoderModel(shape, generation);
    for (double& p : ck.model.mutable_params()) {
        p = r.get<double>();
    }
    ck.head = MlrHead<double>{classes, shape.output_dim, std::vector<double>(classes * shape.output_dim)};
    for (double& p : ck.head.weights) {
        p = r.get<double>();
    }
    if (!r.at_end()) {
        throw IoError("trailing bytes after checkpoint payload");
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    detail::write_bytes(encode_checkpoint(ck), path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_bytes(path));
}

inline std::vector<unsigned char> encode_embeddings(const EmbeddingSet& set) {
    set.validate();
    Writer w;
    w.magic();
    w.put(kFormatVersion);
    w.put(kKindEmbeddings);
    w.put(static_cast<std::uint32_t>(set.geometry));
    w.put(static_cast<std::uint64_t>(set.size()));
    w.put(static_cast<std::uint32_t>(set.dim));
    w.put(set.curvature);
    w.put(static_cast<std::int32_t>(set.generation));
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (double c : set.row(i)) {
            w.put(c);
        }
        w.put(static_cast<std::int32_t>(set.labels[i]));
    }
    return w.bytes();
}

inline EmbeddingSet decode_embeddings(std::vector<unsigned char> bytes) {
    Reader r(std::move(bytes));
    r.expect_header(kKindEmbeddings);
    EmbeddingSet set;
    const auto geometry = r.get<std::uint32_t>();
    if (geometry > 1) {
        throw IoError("unknown geometry tag " + std::to_string(geometry));
    }
    set.geometry = static_cast<Geometry>(geometry);
    const auto count = r.get<std::uint64_t>();
    set.dim = r.get<std::uint32_t>();
    set.curvature = r.get<double>();
    set.generation = r.get<std::int32_t>();
    if (count > (std::uint64_t{1} << 32)) {
        throw IoError("implausible row count");
    }
    set.coords.reserve(count * set.stride());
    set.labels.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < set.stride(); ++k) {
            set.coords.push_back(r.get<double>());
        }
        set.labels.push_back(r.get<std::int32_t>());
    }
    if (!r.at_end()) {
        throw IoError("trailing bytes after embedding rows");
    }
    return set;
}


inline void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
    detail::write_bytes(encode_embeddings(set), path);
}

inline EmbeddingSet load_embeddings(const std::filesystem::path& path) {
    return decode_embeddings(detail::read_bytes(path));
}

} // namespace hbct::io
