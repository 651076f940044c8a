#pragma once

// Output formats: RFC-4180 CSV with shortest round-trip doubles, JSON
// metadata and 16-bit binary PGM snapshots.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "mofem/errors.hpp"

namespace mofem::io {

using json = nlohmann::ordered_json;

inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out | std::ios::binary);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    return os;
}

/// Streams rows to a CSV file (CRLF line endings).
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : os_(open_output(path))
    {
        row(header);
    }

    void row(const std::vector<std::string>& fields)
    {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            os_ << csv_escape(fields[i]);
        }
        os_ << "\r\n";
    }

    void flush() { os_.flush(); }

private:
    std::ofstream os_;
};

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M)
{
    auto os = open_output(path);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) os << ',';
            os << format_double(M(i, j));
        }
        os << "\r\n";
    }
}

inline void write_vector_csv(const std::filesystem::path& path, const std::string& name, const Eigen::VectorXd& v)
{
    CsvWriter w(path, {name});
    for (Eigen::Index i = 0; i < v.size(); ++i) w.row({format_double(v[i])});
}

/// Coordinate (row, col, value) triplets, 0-based.
inline void write_triplets_csv(const std::filesystem::path& path, const Eigen::SparseMatrix<double>& M)
{
    CsvWriter w(path, {"row", "col", "value"});
    for (int k = 0; k < M.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
            w.row({std::to_string(it.row()), std::to_string(it.col()), format_double(it.value())});
}

inline void write_json(const std::filesystem::path& path, const json& j)
{
    auto os = open_output(path);
    os << j.dump(2) << '\n';
}

/// Binary P5 PGM with maxval 65535, min-max normalized; row 0 of the image is
/// the top (largest y), so the picture has the usual orientation.
inline void write_pgm16(const std::filesystem::path& path, const Eigen::MatrixXd& U)
{
    if (U.size() == 0) throw ShapeError("write_pgm16: empty field");
    const double lo = U.minCoeff(), hi = U.maxCoeff();
    // Spans at rounding level relative to the values count as constant.
    const double scale = std::max(std::abs(lo), std::abs(hi));
    const double span = hi - lo > 64.0 * std::numeric_limits<double>::epsilon() * scale ? hi - lo : 0.0;
    auto os = open_output(path, true);
    os << "P5\n" << U.cols() << ' ' << U.rows() << "\n65535\n";
    std::vector<unsigned char> line(2 * U.cols());
    for (Eigen::Index r = U.rows() - 1; r >= 0; --r) {
        for (Eigen::Index c = 0; c < U.cols(); ++c) {
            const double t = span > 0.0 ? (U(r, c) - lo) / span : 0.0;
            const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
            line[2 * c] = static_cast<unsigned char>(v >> 8);
            line[2 * c + 1] = static_cast<unsigned char>(v & 0xFF);
        }
        os.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(line.size()));
    }
}

} // namespace mofem::io
