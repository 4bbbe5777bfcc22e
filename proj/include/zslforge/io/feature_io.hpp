// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/io/atomic_file.hpp"
#include "zslforge/nn/matrix.hpp"
#include "zslforge/zsl/feature_set.hpp"

namespace zslforge::io {

static_assert(std::endian::native == std::endian::little, "feature files are read and written on little-endian hosts only");

inline constexpr std::array<char, 4> feature_magic = {'Z', 'S', 'L', 'F'};
inline constexpr std::uint32_t feature_version = 1;
inline constexpr std::size_t feature_header_bytes = 4 + 4 * 4;

/// Payload element type. 0 is the interchange default; 1 preserves doubles.
enum class DType : std::uint32_t { f32 = 0, f64 = 1 };

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

inline std::uint32_t get_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

} // namespace detail

/// Header + row-major payload as one byte string.
inline std::string encode_matrix(const Matrix& m, DType dtype = DType::f32) {
    if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) fail(ErrorCode::format_error, "matrix too large for feature format");
    std::string out;
    const auto n = static_cast<std::size_t>(m.size());
    out.reserve(feature_header_bytes + n * dtype_size(dtype));
    out.append(feature_magic.data(), 4);
    detail::put_u32(out, feature_version);
    detail::put_u32(out, static_cast<std::uint32_t>(dtype));
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    const std::size_t start = out.size();
    out.resize(start + n * dtype_size(dtype));
    char* dst = out.data() + start;
    if (dtype == DType::f64) {
        std::memcpy(dst, m.data(), n * 8);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const auto f = static_cast<float>(m.data()[i]);
            std::memcpy(dst + 4 * i, &f, 4);
        }
    }
    return out;
}

struct DecodedMatrix {
    Matrix values;
    DType dtype = DType::f32;
};

inline DecodedMatrix decode_matrix(const char* data, std::size_t size, const std::string& what = "feature file") {
    if (size < feature_header_bytes) fail(ErrorCode::format_error, what + ": truncated header");
    if (std::memcmp(data, feature_magic.data(), 4) != 0) fail(ErrorCode::format_error, what + ": bad magic");
    const std::uint32_t version = detail::get_u32(data + 4);
    if (version != feature_version) fail(ErrorCode::format_error, what + ": unsupported version " + std::to_string(version));
    const std::uint32_t dt = detail::get_u32(data + 8);
    if (dt > 1) fail(ErrorCode::format_error, what + ": unsupported dtype " + std::to_string(dt));
    const auto dtype = static_cast<DType>(dt);
    const std::uint64_t rows = detail::get_u32(data + 12);
    const std::uint64_t cols = detail::get_u32(data + 16);
    const std::uint64_t expect = feature_header_bytes + rows * cols * dtype_size(dtype);
    if (size < expect) fail(ErrorCode::format_error, what + ": truncated payload");
    if (size > expect) fail(ErrorCode::format_error, what + ": trailing bytes after payload");
    DecodedMatrix out;
    out.dtype = dtype;
    out.values = Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const char* src = data + feature_header_bytes;
    const std::size_t n = rows * cols;
    if (dtype == DType::f64) {
        std::memcpy(out.values.data(), src, n * 8);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, src + 4 * i, 4);
            out.values.data()[i] = f;
        }
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::string buf(size, '\0');
    if (size && !in.read(buf.data(), static_cast<std::streamsize>(size))) fail(ErrorCode::io_error, "cannot read " + path.string());
    return buf;
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m, DType dtype = DType::f32) {
    write_atomic(path, encode_matrix(m, dtype));
}

inline Matrix load_matrix(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    return decode_matrix(buf.data(), buf.size(), path.string()).values;
}

inline std::filesystem::path labels_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".labels");
}

/// Binary matrix at `path`, one class name per line at `path`.labels.
inline void save_features(const std::filesystem::path& path, const FeatureSet& fs, DType dtype = DType::f32) {
    fs.validate();
    std::string labels;
    for (const auto& l : fs.labels) {
        if (l.find('\n') != std::string::npos || l.empty()) fail(ErrorCode::format_error, "label must be a non-empty single line");
        labels += l;
        labels += '\n';
    }
    write_atomic(path, encode_matrix(fs.features, dtype));
    write_atomic(labels_path(path), labels);
}

inline FeatureSet load_features(const std::filesystem::path& path) {
    FeatureSet fs;
    fs.features = load_matrix(path);
    std::istringstream in(read_file(labels_path(path)));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) fail(ErrorCode::format_error, labels_path(path).string() + ": empty label line");
        fs.labels.push_back(line);
    }
    if (static_cast<Eigen::Index>(fs.labels.size()) != fs.features.rows()) {
        fail(ErrorCode::format_error, path.string() + ": " + std::to_string(fs.features.rows()) + " rows but " +
                                          std::to_string(fs.labels.size()) + " labels");
    }
    return fs;
}

/// CSV interchange: label,v0,v1,... per row, no header. Values use
/// round-trip precision.
inline std::string features_to_csv(const FeatureSet& fs) {
    fs.validate();
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs.labels[i].find_first_of(",\n\"") != std::string::npos) fail(ErrorCode::format_error, "label not representable in CSV");
        out << fs.labels[i];
        for (Eigen::Index j = 0; j < fs.features.cols(); ++j) out << ',' << fs.features(static_cast<Eigen::Index>(i), j);
        out << '\n';
    }
    return out.str();
}

inline FeatureSet features_from_csv(const std::string& text) {
    FeatureSet fs;
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        if (cell.empty()) fail(ErrorCode::format_error, "csv line " + std::to_string(lineno) + ": empty label");
        fs.labels.push_back(cell);
        std::vector<double> r;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                r.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                fail(ErrorCode::format_error, "csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && r.size() != rows.front().size()) fail(ErrorCode::format_error, "csv line " + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(r));
    }
    const auto cols = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
    fs.features = Matrix(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) fs.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    fs.validate();
    return fs;
}

/// Loads by extension: ".csv" uses the CSV fallback, anything else the
/// binary format.
inline FeatureSet load_features_any(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return features_from_csv(read_file(path));
    return load_features(path);
}

inline void save_features_any(const std::filesystem::path& path, const FeatureSet& fs) {
    if (path.extension() == ".csv") {
        write_atomic(path, features_to_csv(fs));
        return;
    }
    save_features(path, fs);
}

} // namespace zslforge::io
