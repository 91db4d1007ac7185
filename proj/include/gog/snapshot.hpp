#pragma once

// Binary model snapshot: a versioned header followed by named, dimensioned
// arrays of little-endian IEEE doubles.
//
//   magic "GOGSNAP1" | u32 version | u32 array count
//   per array: u32 name length | name | u64 rows | u64 cols | rows*cols f64

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gog/error.hpp"
#include "gog/learner.hpp"
#include "gog/numeric.hpp"

namespace gog {

inline constexpr char kSnapshotMagic[8] = {'G', 'O', 'G', 'S', 'N', 'A', 'P', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

struct NamedArray {
    std::string name;
    Matrix values;
};

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("snapshot: truncated file");
    return v;
}

}  // namespace detail

inline void write_arrays(std::ostream& os, const std::vector<NamedArray>& arrays) {
    os.write(kSnapshotMagic, sizeof kSnapshotMagic);
    detail::put<std::uint32_t>(os, kSnapshotVersion);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
        detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
        os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        detail::put<std::uint64_t>(os, a.values.rows());
        detail::put<std::uint64_t>(os, a.values.cols());
        os.write(reinterpret_cast<const char*>(a.values.data().data()),
                 static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    }
    if (!os) throw Error("snapshot: write failed");
}

inline std::vector<NamedArray> read_arrays(std::istream& is) {
    char magic[sizeof kSnapshotMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0)
        throw ParseError("snapshot: bad magic");
    const auto version = detail::get<std::uint32_t>(is);
    if (version != kSnapshotVersion)
        throw ParseError("snapshot: unsupported version " + std::to_string(version));
    const auto count = detail::get<std::uint32_t>(is);
    std::vector<NamedArray> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name.resize(detail::get<std::uint32_t>(is));
        if (!is.read(a.name.data(), static_cast<std::streamsize>(a.name.size())))
            throw ParseError("snapshot: truncated name");
        const auto rows = detail::get<std::uint64_t>(is);
        const auto cols = detail::get<std::uint64_t>(is);
        if (rows == 0 || cols == 0 || rows > (1u << 28) / cols) throw ParseError("snapshot: bad dimensions for " + a.name);
        a.values = Matrix(rows, cols);
        if (!is.read(reinterpret_cast<char*>(a.values.data().data()),
                     static_cast<std::streamsize>(a.values.size() * sizeof(double))))
            throw ParseError("snapshot: truncated array " + a.name);
        out.push_back(std::move(a));
    }
    return out;
}

/// Arrays: "dropout" (1x1), "hidden.<l>.weights", "hidden.<l>.bias", "last".
inline std::vector<NamedArray> to_arrays(const LearnerParams& theta) {
    std::vector<NamedArray> out;
    out.push_back({"dropout", Matrix{{theta.dropout}}});
    for (std::size_t l = 0; l < theta.hidden.size(); ++l) {
        out.push_back({"hidden." + std::to_string(l) + ".weights", theta.hidden[l].weights});
        out.push_back({"hidden." + std::to_string(l) + ".bias", theta.hidden[l].bias});
    }
    out.push_back({"last", theta.last});
    return out;
}

inline LearnerParams from_arrays(const std::vector<NamedArray>& arrays) {
    LearnerParams theta;
    std::size_t i = 0;
    auto expect = [&](const std::string& name) -> const Matrix& {
        if (i >= arrays.size() || arrays[i].name != name) throw ParseError("snapshot: expected array '" + name + "'");
        return arrays[i++].values;
    };
    theta.dropout = expect("dropout")(0, 0);
    while (i < arrays.size() && arrays[i].name != "last") {
        const std::string prefix = "hidden." + std::to_string(theta.hidden.size());
        DenseLayer layer;
        layer.weights = expect(prefix + ".weights");
        layer.bias = expect(prefix + ".bias");
        theta.hidden.push_back(std::move(layer));
    }
    theta.last = expect("last");
    if (i != arrays.size()) throw ParseError("snapshot: trailing arrays");
    theta.validate();
    return theta;
}

inline void save_snapshot(const std::string& path, const LearnerParams& theta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write '" + path + "'");
    write_arrays(os, to_arrays(theta));
}

inline LearnerParams load_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open '" + path + "'");
    return from_arrays(read_arrays(is));
}

}  // namespace gog
