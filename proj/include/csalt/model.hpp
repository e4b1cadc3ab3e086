#pragma once

#include "csalt/binmat.hpp"

#include <vector>

namespace csalt {

/// Rounded factorization: patterns X (n x r), class alterations V (c blocks
/// of n x r) and usage Y (m x r, rows in canonical class order).
struct FactorModel {
    BinaryMatrix X;
    std::vector<BinaryMatrix> V;
    BinaryMatrix Y;
    ClassPartition partition;

    Index rank() const noexcept { return X.cols(); }
    Index items() const noexcept { return X.rows(); }
    int class_count() const noexcept { return partition.class_count(); }

    /// All-zero model of rank r.
    static FactorModel zeros(Index n, const ClassPartition& p, Index r) {
        FactorModel m;
        m.X = BinaryMatrix(n, r);
        m.V.assign(static_cast<std::size_t>(p.class_count()), BinaryMatrix(n, r));
        m.Y = BinaryMatrix(p.rows(), r);
        m.partition = p;
        return m;
    }

    /// X + V^(a), which is binary whenever the model is class-specific.
    BinaryMatrix class_patterns(int a) const {
        BinaryMatrix out(X.rows(), X.cols());
        out.bits() = X.bits().cwiseMax(V[static_cast<std::size_t>(a)].bits());
        return out;
    }

    void check_shapes() const {
        const auto c = static_cast<std::size_t>(partition.class_count());
        if (V.size() != c) throw DimensionMismatch("model needs one V block per class");
        for (const auto& v : V)
            if (v.rows() != X.rows() || v.cols() != X.cols())
                throw DimensionMismatch("V block shape differs from X");
        if (Y.rows() != partition.rows() || Y.cols() != X.cols())
            throw DimensionMismatch("Y shape does not match partition and rank");
    }

    bool operator==(const FactorModel& o) const = default;
};

/// Keeps the listed columns of every factor, in order.
inline FactorModel select_columns(const FactorModel& m, const std::vector<Index>& keep) {
    auto pick = [&](const BinaryMatrix& b) {
        BinaryMatrix out(b.rows(), static_cast<Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) out.bits().col(static_cast<Index>(k)) = b.bits().col(keep[k]);
        return out;
    };
    FactorModel out;
    out.X = pick(m.X);
    for (const auto& v : m.V) out.V.push_back(pick(v));
    out.Y = pick(m.Y);
    out.partition = m.partition;
    return out;
}

/// Appends zero columns until the model has rank r.
inline FactorModel pad_rank(const FactorModel& m, Index r) {
    if (r <= m.rank()) return m;
    auto grow = [&](const BinaryMatrix& b) {
        BinaryMatrix out(b.rows(), r);
        out.bits().leftCols(b.cols()) = b.bits();
        return out;
    };
    FactorModel out;
    out.X = grow(m.X);
    for (const auto& v : m.V) out.V.push_back(grow(v));
    out.Y = grow(m.Y);
    out.partition = m.partition;
    return out;
}

} // namespace csalt
