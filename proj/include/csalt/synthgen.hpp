#pragma once

// Planted-structure generator: patterns, class alterations and usages drawn
// under uniqueness quotas and density caps, composed per class with the
// Boolean product and corrupted by independent bit flips.

#include "csalt/binmat.hpp"
#include "csalt/errors.hpp"
#include "csalt/model.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace csalt {

struct GeneratorSpec {
    Index n = 0;
    std::vector<Index> class_sizes;  // m_a
    Index rank = 24;
    BinaryMatrix C;                  // c x rank, C(a, s) = 1 if class a uses pattern s
    double p = 0.1;
    std::uint64_t seed = 0;

    Index m() const { return std::accumulate(class_sizes.begin(), class_sizes.end(), Index{0}); }
    int class_count() const { return static_cast<int>(class_sizes.size()); }
};

struct GroundTruth {
    FactorModel truth;          // rows in canonical class order
    SparseBinaryMatrix clean;   // theta(Y_a (X + V_a)^T), stacked
    SparseBinaryMatrix data;    // clean with flipped bits
    std::size_t flipped = 0;
    GeneratorSpec spec;
};

/// The block-repeated class-usage matrices for two, three or four classes.
inline BinaryMatrix default_class_matrix(int classes, Index rank) {
    static const int c2[2][3] = {{1, 0, 1}, {1, 1, 0}};
    static const int c3[3][4] = {{1, 1, 0, 0}, {1, 0, 1, 0}, {1, 0, 1, 1}};
    static const int c4[4][5] = {{1, 1, 0, 0, 0}, {1, 0, 1, 0, 0}, {1, 0, 1, 1, 0}, {1, 0, 1, 1, 1}};
    if (classes < 2 || classes > 4)
        throw InvalidInput("default class matrix exists for 2, 3 or 4 classes only");
    const Index width = classes + 1;
    if (rank <= 0 || rank % width != 0)
        throw InvalidInput("rank must be a positive multiple of " + std::to_string(width));
    BinaryMatrix out(classes, rank);
    for (int a = 0; a < classes; ++a)
        for (Index s = 0; s < rank; ++s) {
            const auto k = static_cast<std::size_t>(s % width);
            const int v = classes == 2 ? c2[a][k] : classes == 3 ? c3[a][k] : c4[a][k];
            out.set(a, s, v != 0);
        }
    return out;
}

/// XOR every entry with an independent Bernoulli(p) draw.
template <typename Rng>
BinaryMatrix flip_noise(const BinaryMatrix& m, double p, Rng& rng, std::size_t* flipped = nullptr) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("flip probability must lie in [0,1]");
    std::bernoulli_distribution flip(p);
    BinaryMatrix out = m;
    std::size_t count = 0;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            if (flip(rng)) {
                out.set(i, j, !m(i, j));
                ++count;
            }
    if (flipped) *flipped = count;
    return out;
}

namespace detail {

template <typename Rng>
Index uniform_index(Index lo, Index hi, Rng& rng) {
    if (hi <= lo) return lo;
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

/// k distinct elements of pool, in random order.
template <typename Rng>
std::vector<Index> sample_distinct(std::vector<Index> pool, Index k, Rng& rng) {
    k = std::min<Index>(k, static_cast<Index>(pool.size()));
    for (Index i = 0; i < k; ++i) {
        const Index j = uniform_index(i, static_cast<Index>(pool.size()) - 1, rng);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

inline Index ceil_half(Index x) { return (x + 1) / 2; }

} // namespace detail

/// Draws a planted model and its data. Column sizes are uniform between half
/// the density cap and the cap; alterations are only planted for patterns used
/// by at least two classes and are disjoint across classes.
inline GroundTruth generate(const GeneratorSpec& spec) {
    const int c = spec.class_count();
    const Index n = spec.n;
    const Index r = spec.rank;
    if (c < 1) throw InvalidInput("need at least one class");
    if (n <= 0 || r <= 0) throw InvalidInput("n and rank must be positive");
    if (spec.C.rows() != c || spec.C.cols() != r) throw InvalidInput("class matrix must be classes x rank");
    for (Index sz : spec.class_sizes)
        if (sz <= 0) throw InvalidInput("every class needs rows");
    if (!(spec.p >= 0.0 && spec.p < 0.5)) throw InvalidInput("p must lie in [0, 0.5)");

    const Index m = spec.m();
    const ClassPartition part = ClassPartition::from_block_sizes(spec.class_sizes);
    std::mt19937_64 rng(spec.seed);

    const Index item_quota = n / 100;
    const Index item_cap = n / 10;
    const Index row_quota = m / 100;
    if (item_cap < 1 || r * item_quota > n)
        throw ConstraintInfeasible("cannot reserve " + std::to_string(item_quota) + " unique items for " +
                                   std::to_string(r) + " patterns among " + std::to_string(n) + " items");
    if (r * row_quota > m)
        throw ConstraintInfeasible("cannot reserve unique transactions for every pattern");

    GroundTruth gt;
    gt.spec = spec;
    FactorModel& t = gt.truth;
    t = FactorModel::zeros(n, part, r);

    // patterns: disjoint unique quotas, then shared fill up to the cap
    std::vector<Index> items(static_cast<std::size_t>(n));
    std::iota(items.begin(), items.end(), Index{0});
    std::shuffle(items.begin(), items.end(), rng);
    const std::vector<Index> shared_items(items.begin() + r * item_quota, items.end());
    std::vector<bool> reserved_item(static_cast<std::size_t>(n), false);
    for (Index k = 0; k < r * item_quota; ++k) reserved_item[static_cast<std::size_t>(items[static_cast<std::size_t>(k)])] = true;
    for (Index s = 0; s < r; ++s) {
        for (Index k = 0; k < item_quota; ++k) t.X.set(items[static_cast<std::size_t>(s * item_quota + k)], s, true);
        const Index size = detail::uniform_index(std::max(item_quota, detail::ceil_half(item_cap)), item_cap, rng);
        for (Index i : detail::sample_distinct(shared_items, size - item_quota, rng)) t.X.set(i, s, true);
    }

    // alterations: per using class, disjoint from X_s, from the other classes
    // and from every reserved unique item; total at most 2/3 |X_s|
    for (Index s = 0; s < r; ++s) {
        std::vector<int> users;
        for (int a = 0; a < c; ++a)
            if (spec.C(a, s)) users.push_back(a);
        if (users.size() < 2) continue;
        const Index budget = (2 * static_cast<Index>(t.X.col_count(s))) / 3;
        const Index per_class = budget / static_cast<Index>(users.size());
        if (per_class < 1) continue;
        std::vector<Index> pool;
        for (Index i = 0; i < n; ++i)
            if (!t.X(i, s) && !reserved_item[static_cast<std::size_t>(i)]) pool.push_back(i);
        std::vector<Index> sizes;
        Index total = 0;
        for (std::size_t k = 0; k < users.size(); ++k) {
            sizes.push_back(detail::uniform_index(detail::ceil_half(per_class), per_class, rng));
            total += sizes.back();
        }
        const auto picked = detail::sample_distinct(pool, total, rng);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < users.size(); ++k)
            for (Index q = 0; q < sizes[k] && pos < picked.size(); ++q, ++pos)
                t.V[static_cast<std::size_t>(users[k])].set(picked[pos], s, true);
    }

    // usage: unique transaction quotas across the using classes, then fill
    std::vector<std::vector<Index>> class_rows(static_cast<std::size_t>(c));
    for (int a = 0; a < c; ++a) {
        auto& rows = class_rows[static_cast<std::size_t>(a)];
        rows.resize(static_cast<std::size_t>(part.size(a)));
        std::iota(rows.begin(), rows.end(), part.offset(a));
        std::shuffle(rows.begin(), rows.end(), rng);
    }
    // single-class patterns reserve first; a shared pattern takes each unique
    // row from the using class with the most unreserved rows left
    std::vector<Index> cursor(static_cast<std::size_t>(c), 0);
    std::vector<std::vector<Index>> reserved_count(static_cast<std::size_t>(r), std::vector<Index>(static_cast<std::size_t>(c), 0));
    std::vector<Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Index{0});
    auto users_of = [&](Index s) {
        int k = 0;
        for (int a = 0; a < c; ++a) k += spec.C(a, s) ? 1 : 0;
        return k;
    };
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return users_of(x) < users_of(y); });
    for (Index s : order) {
        if (users_of(s) == 0) {
            if (row_quota > 0) throw ConstraintInfeasible("pattern " + std::to_string(s) + " is used by no class");
            continue;
        }
        auto& have = reserved_count[static_cast<std::size_t>(s)];
        for (Index k = 0; k < row_quota; ++k) {
            int pick = -1;
            for (int a = 0; a < c; ++a) {
                if (!spec.C(a, s) || have[static_cast<std::size_t>(a)] >= part.size(a) / 10) continue;
                if (cursor[static_cast<std::size_t>(a)] >= part.size(a)) continue;
                if (pick < 0 || part.size(a) - cursor[static_cast<std::size_t>(a)] >
                                    part.size(pick) - cursor[static_cast<std::size_t>(pick)])
                    pick = a;
            }
            if (pick < 0)
                throw ConstraintInfeasible("pattern " + std::to_string(s) +
                                           " cannot get its unique transactions within the density caps");
            auto& cur = cursor[static_cast<std::size_t>(pick)];
            t.Y.set(class_rows[static_cast<std::size_t>(pick)][static_cast<std::size_t>(cur)], s, true);
            ++cur;
            ++have[static_cast<std::size_t>(pick)];
        }
    }
    for (Index s = 0; s < r; ++s)
        for (int a = 0; a < c; ++a) {
            if (!spec.C(a, s)) continue;
            const Index cap = part.size(a) / 10;
            const Index have = reserved_count[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
            if (have > cap) throw ConstraintInfeasible("usage quota exceeds the density cap of class " + std::to_string(a));
            const auto& rows = class_rows[static_cast<std::size_t>(a)];
            const std::vector<Index> free_rows(rows.begin() + cursor[static_cast<std::size_t>(a)], rows.end());
            const Index size = detail::uniform_index(std::max(have, detail::ceil_half(cap)), cap, rng);
            for (Index j : detail::sample_distinct(free_rows, size - have, rng)) t.Y.set(j, s, true);
        }

    // compose and corrupt
    BinaryMatrix clean(m, n);
    for (int a = 0; a < c; ++a) {
        const BinaryMatrix block = boolean_product(class_block(std::as_const(t.Y), part, a), t.class_patterns(a));
        clean.bits().middleRows(part.offset(a), part.size(a)) = block.bits();
    }
    const BinaryMatrix noisy = flip_noise(clean, spec.p, rng, &gt.flipped);
    gt.clean = SparseBinaryMatrix::from_dense(clean);
    gt.data = SparseBinaryMatrix::from_dense(noisy);
    return gt;
}

/// Two equally sized classes (the first gets the remainder), default C.
inline GeneratorSpec default_spec(Index n, Index m, int classes, Index rank, double p, std::uint64_t seed) {
    GeneratorSpec spec;
    spec.n = n;
    for (int a = 0; a < classes; ++a) spec.class_sizes.push_back(m / classes + (a < m % classes ? 1 : 0));
    spec.rank = rank;
    spec.C = default_class_matrix(classes, rank);
    spec.p = p;
    spec.seed = seed;
    return spec;
}

} // namespace csalt
