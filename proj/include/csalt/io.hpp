#pragma once

// Text artifacts: coordinate data files, label files, dense tab-separated
// 0/1 matrices and model directories with a key=value meta file.

#include "csalt/binmat.hpp"
#include "csalt/errors.hpp"
#include "csalt/model.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace csalt::io {

namespace fs = std::filesystem;

using Meta = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError("cannot open " + p.string());
    return in;
}

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    if (line.empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename Int>
Int parse_int(std::string_view tok, const std::string& where) {
    Int v{};
    const auto* end = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), end, v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != end)
        throw ParseError(where + ": expected an integer, got '" + std::string(tok) + "'");
    return v;
}

inline std::string_view strip_cr(const std::string& line) {
    std::string_view v(line);
    if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
    return v;
}

inline std::vector<std::string_view> fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

} // namespace detail

/// Header "rows cols nnz", then one 0-based "row col" pair per line.
inline SparseBinaryMatrix read_data(const fs::path& path) {
    auto in = detail::open_in(path);
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) throw ParseError(where + ": missing header");
    const auto head = detail::fields(detail::strip_cr(line));
    if (head.size() != 3) throw ParseError(where + ": header must be 'rows cols nnz'");
    const auto rows = detail::parse_int<Index>(head[0], where);
    const auto cols = detail::parse_int<Index>(head[1], where);
    const auto nnz = detail::parse_int<std::size_t>(head[2], where);
    if (rows < 0 || cols < 0) throw ParseError(where + ": negative dimension");

    std::vector<SparseBinaryMatrix::Coord> ones;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto f = detail::fields(detail::strip_cr(line));
        if (f.empty()) continue;
        const std::string at = where + ":" + std::to_string(lineno);
        if (f.size() != 2) throw ParseError(at + ": expected 'row col'");
        const auto r = detail::parse_int<Index>(f[0], at);
        const auto c = detail::parse_int<Index>(f[1], at);
        if (r < 0 || r >= rows || c < 0 || c >= cols) throw ParseError(at + ": coordinate out of range");
        ones.emplace_back(r, c);
    }
    if (ones.size() != nnz)
        throw ParseError(where + ": header says " + std::to_string(nnz) + " ones, found " + std::to_string(ones.size()));
    SparseBinaryMatrix out(rows, cols, ones);
    if (out.nnz() != nnz) throw ParseError(where + ": duplicate coordinates");
    return out;
}

inline void write_data(const fs::path& path, const SparseBinaryMatrix& d) {
    auto out = detail::open_out(path);
    out << d.rows() << ' ' << d.cols() << ' ' << d.nnz() << '\n';
    for (const auto& [r, c] : d.ones()) out << r << ' ' << c << '\n';
}

/// One integer class id per line.
inline std::vector<int> read_labels(const fs::path& path) {
    auto in = detail::open_in(path);
    const std::string where = path.string();
    std::vector<int> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto f = detail::fields(detail::strip_cr(line));
        if (f.empty()) continue;
        const std::string at = where + ":" + std::to_string(lineno);
        if (f.size() != 1) throw ParseError(at + ": expected one label");
        const int v = detail::parse_int<int>(f[0], at);
        if (v < 0) throw ParseError(at + ": negative label");
        out.push_back(v);
    }
    return out;
}

inline void write_labels(const fs::path& path, const std::vector<int>& labels) {
    auto out = detail::open_out(path);
    for (int l : labels) out << l << '\n';
}

/// Dense 0/1 matrix, one tab-separated row per line. A matrix with no
/// columns is a run of empty lines.
inline BinaryMatrix read_tsv(const fs::path& path) {
    auto in = detail::open_in(path);
    const std::string where = path.string();
    std::vector<std::vector<std::uint8_t>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const auto cells = detail::split(detail::strip_cr(line), '\t');
        const std::string at = where + ":" + std::to_string(rows.size() + 1);
        std::vector<std::uint8_t> row;
        for (auto cell : cells) {
            if (cell == "0") row.push_back(0);
            else if (cell == "1") row.push_back(1);
            else throw ParseError(at + ": entry is not 0 or 1");
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw ParseError(at + ": ragged row");
        rows.push_back(std::move(row));
    }
    const auto n = static_cast<Index>(rows.size());
    const auto r = rows.empty() ? Index{0} : static_cast<Index>(rows.front().size());
    BinaryMatrix out(n, r);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < r; ++j) out.set(i, j, rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] != 0);
    return out;
}

inline void write_tsv(const fs::path& path, const BinaryMatrix& m) {
    auto out = detail::open_out(path);
    std::string line;
    for (Index i = 0; i < m.rows(); ++i) {
        line.clear();
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) line += '\t';
            line += m(i, j) ? '1' : '0';
        }
        line += '\n';
        out << line;
    }
}

inline Meta read_meta(const fs::path& path) {
    auto in = detail::open_in(path);
    Meta out;
    std::string line;
    while (std::getline(in, line)) {
        const auto v = detail::strip_cr(line);
        if (v.empty()) continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) throw ParseError(path.string() + ": expected key=value");
        out.emplace_back(std::string(v.substr(0, eq)), std::string(v.substr(eq + 1)));
    }
    return out;
}

inline void write_meta(const fs::path& path, const Meta& meta) {
    auto out = detail::open_out(path);
    for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
}

inline const std::string* find_meta(const Meta& meta, std::string_view key) {
    for (const auto& kv : meta)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

/// Shortest text that reads back to the same double; integral values keep a
/// trailing ".0".
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eni") == std::string::npos) s += ".0";
    return s;
}

template <typename T>
std::string join(const std::vector<T>& v, char sep = ',') {
    std::ostringstream os;
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? std::string(1, sep) : std::string()) << v[k];
    return os.str();
}

/// A model directory loaded back into canonical row order.
struct ModelDir {
    FactorModel model;
    std::vector<int> labels;          // original row order
    std::vector<Index> permutation;   // canonical row j is original row permutation[j]
    Meta meta;
};

/// Writes X.tsv, V_<a>.tsv, Y.tsv (rows in the original order given by
/// labels), labels.txt and meta.txt.
inline void write_model_dir(const fs::path& dir, const FactorModel& model, const std::vector<int>& labels,
                            const Meta& meta) {
    model.check_shapes();
    const CanonicalOrder order = canonicalize(labels);
    if (order.partition != model.partition) throw DimensionMismatch("labels do not match the model partition");
    fs::create_directories(dir);
    write_tsv(dir / "X.tsv", model.X);
    for (int a = 0; a < model.class_count(); ++a)
        write_tsv(dir / ("V_" + std::to_string(a) + ".tsv"), model.V[static_cast<std::size_t>(a)]);
    BinaryMatrix y(model.Y.rows(), model.Y.cols());
    for (Index j = 0; j < y.rows(); ++j)
        y.bits().row(order.permutation[static_cast<std::size_t>(j)]) = model.Y.bits().row(j);
    write_tsv(dir / "Y.tsv", y);
    write_labels(dir / "labels.txt", labels);
    write_meta(dir / "meta.txt", meta);
}

inline ModelDir read_model_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ParseError("not a directory: " + dir.string());
    ModelDir out;
    out.labels = read_labels(dir / "labels.txt");
    CanonicalOrder order;
    try {
        order = canonicalize(out.labels);
    } catch (const InvalidInput& e) {
        throw ParseError(dir.string() + ": " + e.what());
    }
    out.permutation = order.permutation;
    out.meta = read_meta(dir / "meta.txt");

    FactorModel& m = out.model;
    m.partition = order.partition;
    m.X = read_tsv(dir / "X.tsv");
    for (int a = 0; a < m.partition.class_count(); ++a) m.V.push_back(read_tsv(dir / ("V_" + std::to_string(a) + ".tsv")));
    const BinaryMatrix y = read_tsv(dir / "Y.tsv");
    if (y.rows() != static_cast<Index>(out.labels.size()))
        throw ParseError(dir.string() + ": Y.tsv and labels.txt disagree on the row count");
    m.Y = BinaryMatrix(y.rows(), y.cols());
    for (Index j = 0; j < y.rows(); ++j) m.Y.bits().row(j) = y.bits().row(order.permutation[static_cast<std::size_t>(j)]);

    try {
        m.check_shapes();
    } catch (const DimensionMismatch& e) {
        throw ParseError(dir.string() + ": " + e.what());
    }
    return out;
}

} // namespace csalt::io
