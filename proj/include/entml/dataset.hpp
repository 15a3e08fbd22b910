#pragma once

// In-memory dataset of correlation vectors and its binary/CSV containers.

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "entml/error.hpp"
#include "entml/io.hpp"

namespace entml {

struct Dataset {
    std::size_t num_qubits = 0;
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    std::vector<double> features; // rows x dim, row-major
    std::vector<int> labels;

    std::size_t rows() const { return labels.size(); }
    const double* row(std::size_t i) const { return features.data() + i * dim; }
    double* row(std::size_t i) { return features.data() + i * dim; }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> n(num_classes, 0);
        for (int y : labels) ++n[static_cast<std::size_t>(y)];
        return n;
    }

    void check() const {
        require(dim > 0 && features.size() == rows() * dim, "Dataset: feature matrix shape mismatch");
        for (int y : labels) require(y >= 0 && static_cast<std::size_t>(y) < num_classes, "Dataset: label out of range");
    }
};

// Column restriction; the kept order defines the new feature order.
inline Dataset select_features(const Dataset& d, const std::vector<std::size_t>& keep) {
    require(!keep.empty(), "select_features: keep set must be nonempty");
    for (auto j : keep) require(j < d.dim, "select_features: index out of range");
    Dataset out{d.num_qubits, d.num_classes, keep.size(), {}, d.labels};
    out.features.resize(d.rows() * keep.size());
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t k = 0; k < keep.size(); ++k) out.features[i * keep.size() + k] = d.row(i)[keep[k]];
    return out;
}

inline Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& idx) {
    Dataset out{d.num_qubits, d.num_classes, d.dim, {}, {}};
    out.features.reserve(idx.size() * d.dim);
    for (auto i : idx) {
        require(i < d.rows(), "take_rows: index out of range");
        out.features.insert(out.features.end(), d.row(i), d.row(i) + d.dim);
        out.labels.push_back(d.labels[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr char kDatasetMagic[8] = {'E', 'M', 'L', 'D', 'S', 'E', 'T', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

// magic, u32 version, u32 N, u64 E, u32 C, u32 dim, f64[E*dim], i32[E]; little-endian.
inline std::string serialize_dataset(const Dataset& d) {
    d.check();
    ByteWriter w;
    w.put_raw(std::string_view(kDatasetMagic, 8));
    w.put(kDatasetVersion);
    w.put(static_cast<std::uint32_t>(d.num_qubits));
    w.put(static_cast<std::uint64_t>(d.rows()));
    w.put(static_cast<std::uint32_t>(d.num_classes));
    w.put(static_cast<std::uint32_t>(d.dim));
    w.put_array(d.features);
    std::vector<std::int32_t> labels(d.labels.begin(), d.labels.end());
    w.put_array(labels);
    return w.bytes();
}

inline Dataset deserialize_dataset(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.get_raw(8) != std::string_view(kDatasetMagic, 8)) throw ValidationError("dataset: bad magic");
    if (r.get<std::uint32_t>() != kDatasetVersion) throw ValidationError("dataset: unsupported version");
    Dataset d;
    d.num_qubits = r.get<std::uint32_t>();
    const auto rows = r.get<std::uint64_t>();
    d.num_classes = r.get<std::uint32_t>();
    d.dim = r.get<std::uint32_t>();
    d.features = r.get_array<double>(rows * d.dim);
    const auto labels = r.get_array<std::int32_t>(rows);
    d.labels.assign(labels.begin(), labels.end());
    if (!r.done()) throw ValidationError("dataset: trailing bytes");
    d.check();
    return d;
}

inline void write_dataset(const fs::path& path, const Dataset& d) { atomic_write(path, serialize_dataset(d)); }
inline Dataset read_dataset(const fs::path& path) { return deserialize_dataset(read_file(path)); }

inline std::string dataset_csv(const Dataset& d) {
    std::string out;
    for (std::size_t j = 0; j < d.dim; ++j) out += "T_" + std::to_string(j) + ",";
    out += "label\n";
    char buf[32];
    for (std::size_t i = 0; i < d.rows(); ++i) {
        for (std::size_t j = 0; j < d.dim; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,", d.row(i)[j]);
            out += buf;
        }
        out += std::to_string(d.labels[i]) + "\n";
    }
    return out;
}

} // namespace entml
