#pragma once

// Shared fixtures and reference implementations for the test binaries. The
// reference code below is written with plain loops over dense matrices and
// does not call the library routine it is compared against.

#include "csalt/csalt.hpp"
#include "csalt/eval.hpp"
#include "csalt/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace csalt::testkit {

using Rng = std::mt19937_64;

/// Random labeled data in canonical order with every column nonempty.
inline SparseBinaryMatrix random_sparse(Rng& rng, Index m, Index n, double density) {
    std::bernoulli_distribution one(density);
    std::uniform_int_distribution<Index> row(0, m - 1);
    BinaryMatrix d(m, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) d.set(j, i, one(rng));
        if (d.col_count(i) == 0) d.set(row(rng), i, true);
    }
    return SparseBinaryMatrix::from_dense(d);
}

inline ClassPartition even_partition(Index m, int c) {
    std::vector<Index> sizes;
    for (int a = 0; a < c; ++a) sizes.push_back(m / c + (a < m % c ? 1 : 0));
    return ClassPartition::from_block_sizes(sizes);
}

inline RealMatrix uniform_matrix(Rng& rng, Index rows, Index cols, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    RealMatrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) out(i, j) = u(rng);
    return out;
}

inline RelaxedState random_state(Rng& rng, Index n, Index m, int c, Index r, double lo = 0.05, double hi = 0.95) {
    RelaxedState s;
    s.X = uniform_matrix(rng, n, r, lo, hi);
    for (int a = 0; a < c; ++a) s.V.push_back(uniform_matrix(rng, n, r, lo, hi));
    s.Y = uniform_matrix(rng, m, r, lo, hi);
    return s;
}

inline BinaryMatrix random_binary(Rng& rng, Index rows, Index cols, double density) {
    std::bernoulli_distribution one(density);
    BinaryMatrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) out.set(i, j, one(rng));
    return out;
}

inline FactorModel random_model(Rng& rng, Index n, const ClassPartition& part, Index r, double density) {
    FactorModel m;
    m.partition = part;
    m.X = random_binary(rng, n, r, density);
    for (int a = 0; a < part.class_count(); ++a) m.V.push_back(random_binary(rng, n, r, density));
    m.Y = random_binary(rng, part.rows(), r, density);
    return m;
}

/// Dense 0/1 copy of the data as doubles.
inline std::vector<std::vector<double>> dense_rows(const SparseBinaryMatrix& d) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(d.rows()),
                                         std::vector<double>(static_cast<std::size_t>(d.cols()), 0.0));
    for (const auto& [r, c] : d.ones()) out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = 1.0;
    return out;
}

inline int label_of(const ClassPartition& part, Index j) {
    for (int a = 0; a < part.class_count(); ++a)
        if (j >= part.offset(a) && j < part.offset(a) + part.size(a)) return a;
    return -1;
}

/// Code lengths by counting.
inline std::vector<double> ref_codes(const std::vector<std::vector<double>>& d) {
    const std::size_t n = d.empty() ? 0 : d.front().size();
    std::vector<double> col(n, 0.0);
    double total = 0.0;
    for (const auto& row : d)
        for (std::size_t i = 0; i < n; ++i) {
            col[i] += row[i];
            total += row[i];
        }
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = -std::log(col[i] / total);
    return u;
}

/// S by its defining double sum over columns and classes.
inline double ref_specificity(const std::vector<std::vector<double>>& d, const ClassPartition& part,
                              const RealMatrix& y, const std::vector<RealMatrix>& v) {
    const Index m = y.rows();
    const Index r = y.cols();
    const Index n = v.front().rows();
    double total = 0.0;
    for (Index s = 0; s < r; ++s)
        for (int a = 0; a < part.class_count(); ++a) {
            double ya = 0.0, vs = 0.0, in_class = 0.0, elsewhere = 0.0;
            for (Index j = 0; j < m; ++j)
                if (label_of(part, j) == a) ya += y(j, s);
            for (Index i = 0; i < n; ++i) vs += v[static_cast<std::size_t>(a)](i, s);
            for (Index j = 0; j < m; ++j)
                for (Index i = 0; i < n; ++i) {
                    const double t = y(j, s) * d[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] *
                                     v[static_cast<std::size_t>(a)](i, s);
                    if (label_of(part, j) == a) in_class += t;
                    else elsewhere += t;
                }
            total += ya * vs - in_class + elsewhere;
        }
    return total;
}

/// The relaxed objective with every term spelled out entry by entry.
inline double ref_relaxed_F(const SparseBinaryMatrix& data, const ClassPartition& part, const RelaxedState& s) {
    const auto d = dense_rows(data);
    const auto u = ref_codes(d);
    const Index m = s.Y.rows();
    const Index n = s.X.rows();
    const Index r = s.X.cols();
    const double mu = 1.0 + std::log(static_cast<double>(n));

    double rss = 0.0;
    for (Index j = 0; j < m; ++j) {
        const auto& va = s.V[static_cast<std::size_t>(label_of(part, j))];
        for (Index i = 0; i < n; ++i) {
            double rec = 0.0;
            for (Index k = 0; k < r; ++k) rec += s.Y(j, k) * (s.X(i, k) + va(i, k));
            const double e = d[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - rec;
            rss += e * e;
        }
    }

    double g = 0.0, y_total = 0.0;
    std::vector<double> usage(static_cast<std::size_t>(r), 0.0);
    for (Index k = 0; k < r; ++k)
        for (Index j = 0; j < m; ++j) {
            usage[static_cast<std::size_t>(k)] += s.Y(j, k);
            y_total += s.Y(j, k);
        }
    for (Index k = 0; k < r; ++k) {
        const double uk = usage[static_cast<std::size_t>(k)];
        g -= (uk + 1.0) * std::log((uk + 1.0) / (y_total + static_cast<double>(r)));
        double xu = 0.0;
        for (Index i = 0; i < n; ++i) xu += s.X(i, k) * u[static_cast<std::size_t>(i)];
        g += std::abs(xu);
        for (const auto& v : s.V) {
            double vu = 0.0;
            for (Index i = 0; i < n; ++i) vu += v(i, k) * u[static_cast<std::size_t>(i)];
            g += std::abs(vu);
        }
    }
    g += y_total;

    return 0.5 * mu * rss + 0.5 * g + ref_specificity(d, part, s.Y, s.V);
}

/// Description length of a binary model, by enumeration of every cell.
inline double ref_description_length(const SparseBinaryMatrix& data, const FactorModel& model) {
    const auto d = dense_rows(data);
    const auto u = ref_codes(d);
    const Index m = model.Y.rows();
    const Index n = model.X.rows();
    const Index r = model.rank();
    std::vector<double> noise(static_cast<std::size_t>(n), 0.0);
    double n_total = 0.0;
    for (Index j = 0; j < m; ++j) {
        const int a = label_of(model.partition, j);
        for (Index i = 0; i < n; ++i) {
            bool rec = false;
            for (Index k = 0; k < r; ++k)
                rec = rec || (model.Y(j, k) && (model.X(i, k) || model.V[static_cast<std::size_t>(a)](i, k)));
            if ((rec ? 1.0 : 0.0) != d[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
                noise[static_cast<std::size_t>(i)] += 1.0;
                n_total += 1.0;
            }
        }
    }
    double y_total = 0.0;
    for (Index k = 0; k < r; ++k) y_total += static_cast<double>(model.Y.col_count(k));
    const double denom = y_total + n_total;
    if (denom == 0.0) return 0.0;
    double f = 0.0;
    for (Index k = 0; k < r; ++k) {
        const double ys = static_cast<double>(model.Y.col_count(k));
        if (ys == 0.0) continue;
        f += -(ys + 1.0) * std::log(ys / denom);
        for (Index i = 0; i < n; ++i) {
            if (model.X(i, k)) f += u[static_cast<std::size_t>(i)];
            for (const auto& v : model.V)
                if (v(i, k)) f += u[static_cast<std::size_t>(i)];
        }
    }
    for (Index i = 0; i < n; ++i) {
        const double ni = noise[static_cast<std::size_t>(i)];
        if (ni == 0.0) continue;
        f += -(ni + 1.0) * std::log(ni / denom) + u[static_cast<std::size_t>(i)];
    }
    std::vector<RealMatrix> v;
    for (const auto& b : model.V) v.push_back(b.to_real());
    return f + ref_specificity(d, model.partition, model.Y.to_real(), v);
}

/// Best total over all permutations (rows to columns).
inline double brute_force_assignment(const RealMatrix& score) {
    const Index k = score.rows();
    std::vector<Index> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), Index{0});
    double best = -std::numeric_limits<double>::infinity();
    do {
        double t = 0.0;
        for (Index s = 0; s < k; ++s) t += score(s, perm[static_cast<std::size_t>(s)]);
        best = std::max(best, t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Audits a generated instance against the planted-structure constraints.
/// Returns human-readable violations; empty means the instance passes.
inline std::vector<std::string> audit_instance(const GroundTruth& gt) {
    std::vector<std::string> bad;
    const FactorModel& t = gt.truth;
    const GeneratorSpec& spec = gt.spec;
    const Index n = t.X.rows();
    const Index m = t.Y.rows();
    const Index r = t.rank();
    const int c = t.class_count();
    auto fail = [&](const std::string& what, Index s) { bad.push_back(what + " (column " + std::to_string(s) + ")"); };

    for (Index s = 0; s < r; ++s) {
        Index xs = 0, unique_items = 0;
        for (Index i = 0; i < n; ++i) {
            if (!t.X(i, s)) continue;
            ++xs;
            bool elsewhere = false;
            for (Index k = 0; k < r && !elsewhere; ++k) {
                if (k != s && t.X(i, k)) elsewhere = true;
                for (int a = 0; a < c && !elsewhere; ++a)
                    if (t.V[static_cast<std::size_t>(a)](i, k)) elsewhere = true;
            }
            if (!elsewhere) ++unique_items;
        }
        if (xs > n / 10) fail("pattern exceeds the item density cap", s);
        if (unique_items < n / 100) fail("pattern has too few unique items", s);

        Index v_total = 0;
        for (int a = 0; a < c; ++a) {
            Index va = 0;
            for (Index i = 0; i < n; ++i) {
                if (!t.V[static_cast<std::size_t>(a)](i, s)) continue;
                ++va;
                if (t.X(i, s)) fail("alteration overlaps its pattern", s);
            }
            if (va > 0 && !spec.C(a, s)) fail("alteration planted in a class that does not use the pattern", s);
            v_total += va;
        }
        if (3 * v_total > 2 * xs) fail("alterations exceed two thirds of the pattern", s);
        for (Index i = 0; i < n; ++i) {
            bool all = true;
            for (int a = 0; a < c; ++a) all = all && t.V[static_cast<std::size_t>(a)](i, s);
            if (all) fail("alteration item shared by every class", s);
        }

        Index unique_rows = 0;
        for (int a = 0; a < c; ++a) {
            Index ya = 0;
            for (Index j = t.partition.offset(a); j < t.partition.offset(a) + t.partition.size(a); ++j)
                if (t.Y(j, s)) ++ya;
            if (!spec.C(a, s) && ya > 0) fail("usage in a class that does not use the pattern", s);
            if (ya > t.partition.size(a) / 10) fail("usage exceeds the class density cap", s);
        }
        for (Index j = 0; j < m; ++j) {
            if (!t.Y(j, s)) continue;
            bool elsewhere = false;
            for (Index k = 0; k < r && !elsewhere; ++k) elsewhere = k != s && t.Y(j, k);
            if (!elsewhere) ++unique_rows;
        }
        if (unique_rows < m / 100) fail("pattern has too few unique transactions", s);
    }

    // composition and noise
    std::size_t flips = 0;
    const auto clean = dense_rows(gt.clean);
    const auto noisy = dense_rows(gt.data);
    for (Index j = 0; j < m; ++j) {
        const int a = label_of(t.partition, j);
        for (Index i = 0; i < n; ++i) {
            bool rec = false;
            for (Index k = 0; k < r; ++k)
                rec = rec || (t.Y(j, k) && (t.X(i, k) || t.V[static_cast<std::size_t>(a)](i, k)));
            if ((rec ? 1.0 : 0.0) != clean[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
                bad.push_back("clean data differs from the Boolean product at row " + std::to_string(j));
            if (clean[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] !=
                noisy[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
                ++flips;
        }
    }
    if (flips != gt.flipped) bad.push_back("flip count does not match the noisy data");
    return bad;
}

} // namespace csalt::testkit
