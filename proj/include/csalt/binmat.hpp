#pragma once

// Binary and real matrix primitives: Boolean products, thresholding,
// entrywise norms and class-block views of row-partitioned matrices.

#include "csalt/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace csalt {

using Index = Eigen::Index;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using SparseReal = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Dense {0,1}-valued matrix. Used for factor matrices and rounded models.
class BinaryMatrix {
  public:
    using Storage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

    BinaryMatrix() = default;
    BinaryMatrix(Index rows, Index cols) : bits_(Storage::Zero(rows, cols)) {}

    /// Entries must be exactly 0 or 1.
    static BinaryMatrix from_real(const RealMatrix& m) {
        BinaryMatrix out(m.rows(), m.cols());
        for (Index j = 0; j < m.cols(); ++j)
            for (Index i = 0; i < m.rows(); ++i) {
                const double v = m(i, j);
                if (v != 0.0 && v != 1.0)
                    throw InvalidInput("matrix entry is not binary");
                out.bits_(i, j) = v == 1.0 ? 1 : 0;
            }
        return out;
    }

    Index rows() const noexcept { return bits_.rows(); }
    Index cols() const noexcept { return bits_.cols(); }

    bool operator()(Index i, Index j) const { return bits_(i, j) != 0; }
    void set(Index i, Index j, bool v) { bits_(i, j) = v ? 1 : 0; }

    std::size_t count() const {
        return static_cast<std::size_t>(bits_.cast<std::size_t>().sum());
    }
    std::size_t col_count(Index s) const {
        return static_cast<std::size_t>(bits_.col(s).cast<std::size_t>().sum());
    }
    std::size_t row_count(Index j) const {
        return static_cast<std::size_t>(bits_.row(j).cast<std::size_t>().sum());
    }

    RealMatrix to_real() const { return bits_.cast<double>(); }

    const Storage& bits() const noexcept { return bits_; }
    Storage& bits() noexcept { return bits_; }

    bool operator==(const BinaryMatrix& o) const {
        return rows() == o.rows() && cols() == o.cols() && bits_ == o.bits_;
    }

  private:
    Storage bits_;
};

/// Binary matrix stored as a sorted, duplicate-free list of (row, col) ones.
class SparseBinaryMatrix {
  public:
    using Coord = std::pair<Index, Index>;

    SparseBinaryMatrix() = default;
    SparseBinaryMatrix(Index rows, Index cols, std::vector<Coord> ones)
        : rows_(rows), cols_(cols), ones_(std::move(ones)) {
        for (const auto& [r, c] : ones_)
            if (r < 0 || r >= rows_ || c < 0 || c >= cols_)
                throw InvalidInput("coordinate (" + std::to_string(r) + ", " +
                                   std::to_string(c) + ") out of range");
        std::sort(ones_.begin(), ones_.end());
        ones_.erase(std::unique(ones_.begin(), ones_.end()), ones_.end());
    }

    static SparseBinaryMatrix from_dense(const BinaryMatrix& m) {
        std::vector<Coord> ones;
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j)
                if (m(i, j)) ones.emplace_back(i, j);
        return {m.rows(), m.cols(), std::move(ones)};
    }

    Index rows() const noexcept { return rows_; }
    Index cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return ones_.size(); }
    const std::vector<Coord>& ones() const noexcept { return ones_; }

    BinaryMatrix to_dense() const {
        BinaryMatrix out(rows_, cols_);
        for (const auto& [r, c] : ones_) out.set(r, c, true);
        return out;
    }

    SparseReal to_sparse_real() const {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(ones_.size());
        for (const auto& [r, c] : ones_) trips.emplace_back(r, c, 1.0);
        SparseReal out(rows_, cols_);
        out.setFromTriplets(trips.begin(), trips.end());
        return out;
    }

    std::vector<std::size_t> col_counts() const {
        std::vector<std::size_t> out(static_cast<std::size_t>(cols_), 0);
        for (const auto& rc : ones_) ++out[static_cast<std::size_t>(rc.second)];
        return out;
    }

    /// Keeps only the listed columns, renumbered in the given order.
    SparseBinaryMatrix select_columns(const std::vector<Index>& keep) const {
        std::vector<Index> remap(static_cast<std::size_t>(cols_), -1);
        for (std::size_t k = 0; k < keep.size(); ++k)
            remap[static_cast<std::size_t>(keep[k])] = static_cast<Index>(k);
        std::vector<Coord> ones;
        for (const auto& [r, c] : ones_)
            if (remap[static_cast<std::size_t>(c)] >= 0)
                ones.emplace_back(r, remap[static_cast<std::size_t>(c)]);
        return {rows_, static_cast<Index>(keep.size()), std::move(ones)};
    }

    /// Row j of the result is row perm[j] of this matrix.
    SparseBinaryMatrix permute_rows(const std::vector<Index>& perm) const {
        std::vector<Index> inverse(perm.size());
        for (std::size_t j = 0; j < perm.size(); ++j)
            inverse[static_cast<std::size_t>(perm[j])] = static_cast<Index>(j);
        std::vector<Coord> ones;
        ones.reserve(ones_.size());
        for (const auto& [r, c] : ones_)
            ones.emplace_back(inverse[static_cast<std::size_t>(r)], c);
        return {rows_, cols_, std::move(ones)};
    }

    bool operator==(const SparseBinaryMatrix& o) const = default;

  private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Coord> ones_;
};

/// Row-to-class assignment in canonical (class-contiguous) order.
class ClassPartition {
  public:
    ClassPartition() = default;

    /// Class a occupies rows [offset(a), offset(a) + size(a)).
    static ClassPartition from_block_sizes(const std::vector<Index>& sizes) {
        if (sizes.empty()) throw InvalidInput("partition needs at least one class");
        ClassPartition p;
        p.offsets_.assign(1, 0);
        for (Index s : sizes) {
            if (s <= 0) throw InvalidInput("every class needs at least one row");
            p.offsets_.push_back(p.offsets_.back() + s);
        }
        return p;
    }

    int class_count() const noexcept { return static_cast<int>(offsets_.size()) - 1; }
    Index rows() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
    Index offset(int a) const { check(a); return offsets_[static_cast<std::size_t>(a)]; }
    Index size(int a) const {
        check(a);
        return offsets_[static_cast<std::size_t>(a) + 1] - offsets_[static_cast<std::size_t>(a)];
    }
    std::vector<Index> block_sizes() const {
        std::vector<Index> out;
        for (int a = 0; a < class_count(); ++a) out.push_back(size(a));
        return out;
    }
    int class_of(Index row) const {
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), row);
        return static_cast<int>(it - offsets_.begin()) - 1;
    }
    std::vector<int> row_class() const {
        std::vector<int> out;
        for (int a = 0; a < class_count(); ++a) out.insert(out.end(), static_cast<std::size_t>(size(a)), a);
        return out;
    }

    void check(int a) const {
        if (a < 0 || a >= class_count())
            throw InvalidInput("unknown class id " + std::to_string(a));
    }

    bool operator==(const ClassPartition& o) const = default;

  private:
    std::vector<Index> offsets_;
};

/// Result of sorting labeled rows into class-contiguous order.
struct CanonicalOrder {
    ClassPartition partition;
    /// Canonical row j is original row permutation[j].
    std::vector<Index> permutation;
};

/// Labels must be 0..c-1 with every class present. Stable within a class.
inline CanonicalOrder canonicalize(const std::vector<int>& labels) {
    if (labels.empty()) throw InvalidInput("no rows");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    if (*std::min_element(labels.begin(), labels.end()) < 0)
        throw InvalidInput("negative class label");
    std::vector<Index> sizes(static_cast<std::size_t>(max_label) + 1, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    CanonicalOrder out;
    out.partition = ClassPartition::from_block_sizes(sizes);
    out.permutation.resize(labels.size());
    std::iota(out.permutation.begin(), out.permutation.end(), Index{0});
    std::stable_sort(out.permutation.begin(), out.permutation.end(), [&](Index x, Index y) {
        return labels[static_cast<std::size_t>(x)] < labels[static_cast<std::size_t>(y)];
    });
    return out;
}

/// Rows [offset(a), offset(a)+m_a) of a dense Eigen matrix; writes through.
template <typename Derived>
auto class_block(Eigen::MatrixBase<Derived>& m, const ClassPartition& p, int a) {
    if (m.rows() != p.rows()) throw DimensionMismatch("matrix rows do not match partition");
    return m.middleRows(p.offset(a), p.size(a));
}

template <typename Derived>
auto class_block(const Eigen::MatrixBase<Derived>& m, const ClassPartition& p, int a) {
    if (m.rows() != p.rows()) throw DimensionMismatch("matrix rows do not match partition");
    return m.middleRows(p.offset(a), p.size(a));
}

inline auto class_block(BinaryMatrix& m, const ClassPartition& p, int a) {
    return class_block(m.bits(), p, a);
}

inline BinaryMatrix class_block(const BinaryMatrix& m, const ClassPartition& p, int a) {
    if (m.rows() != p.rows()) throw DimensionMismatch("matrix rows do not match partition");
    BinaryMatrix out(p.size(a), m.cols());
    out.bits() = m.bits().middleRows(p.offset(a), p.size(a));
    return out;
}

/// theta_t: entries >= t become one.
inline BinaryMatrix theta(const RealMatrix& m, double t = 0.5) {
    BinaryMatrix out(m.rows(), m.cols());
    out.bits() = (m.array() >= t).cast<std::uint8_t>();
    return out;
}

/// Boolean product: result(j,i) = OR_s Y(j,s) AND X(i,s).
inline BinaryMatrix boolean_product(const BinaryMatrix& y, const BinaryMatrix& x) {
    if (y.cols() != x.cols()) throw DimensionMismatch("boolean_product: rank mismatch");
    const Eigen::MatrixXi counts = y.bits().cast<int>() * x.bits().cast<int>().transpose();
    BinaryMatrix out(y.rows(), x.rows());
    out.bits() = (counts.array() > 0).cast<std::uint8_t>();
    return out;
}

template <typename A, typename B>
auto hadamard(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("hadamard: shape mismatch");
    return (a.array() * b.array()).matrix().eval();
}

inline BinaryMatrix hadamard(const BinaryMatrix& a, const BinaryMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("hadamard: shape mismatch");
    BinaryMatrix out(a.rows(), a.cols());
    out.bits() = a.bits().array() * b.bits().array();
    return out;
}

/// Entrywise 1-norm |A|.
template <typename Derived>
double norm_l1(const Eigen::MatrixBase<Derived>& a) {
    return a.template cast<double>().cwiseAbs().sum();
}

/// Frobenius norm.
template <typename Derived>
double norm_fro(const Eigen::MatrixBase<Derived>& a) {
    return a.template cast<double>().norm();
}

template <typename Derived>
double trace(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("trace of a non-square matrix");
    return a.template cast<double>().trace();
}

/// Packed bit rows, used for fast Boolean reconstruction and residual counts.
class BitRows {
  public:
    BitRows() = default;
    BitRows(Index rows, Index cols)
        : rows_(rows), cols_(cols), words_((cols + 63) / 64),
          data_(static_cast<std::size_t>(rows * words_), 0) {}

    static BitRows from_columns(const BinaryMatrix& m) {
        // row s of the result holds column s of m
        BitRows out(m.cols(), m.rows());
        for (Index s = 0; s < m.cols(); ++s)
            for (Index i = 0; i < m.rows(); ++i)
                if (m(i, s)) out.set(s, i);
        return out;
    }

    static BitRows from_sparse(const SparseBinaryMatrix& m) {
        BitRows out(m.rows(), m.cols());
        for (const auto& [r, c] : m.ones()) out.set(r, c);
        return out;
    }

    Index rows() const noexcept { return rows_; }
    Index cols() const noexcept { return cols_; }
    Index words() const noexcept { return words_; }

    std::uint64_t* row(Index j) { return data_.data() + j * words_; }
    const std::uint64_t* row(Index j) const { return data_.data() + j * words_; }

    void set(Index j, Index i) {
        row(j)[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    bool test(Index j, Index i) const {
        return (row(j)[i / 64] >> (i % 64)) & 1U;
    }

    std::size_t row_popcount(Index j) const {
        std::size_t c = 0;
        const auto* r = row(j);
        for (Index w = 0; w < words_; ++w) c += static_cast<std::size_t>(std::popcount(r[w]));
        return c;
    }

  private:
    Index rows_ = 0;
    Index cols_ = 0;
    Index words_ = 0;
    std::vector<std::uint64_t> data_;
};

inline std::size_t popcount_and(const std::uint64_t* a, const std::uint64_t* b, Index words) {
    std::size_t c = 0;
    for (Index w = 0; w < words; ++w) c += static_cast<std::size_t>(std::popcount(a[w] & b[w]));
    return c;
}

} // namespace csalt
