#pragma once

// Planted-structure recovery measures: one-to-one matching of outer products
// by the Hungarian method, micro-averaged F per class, recall of the planted
// alterations, and class-wise effective ranks.

#include "csalt/binmat.hpp"
#include "csalt/csalt.hpp"
#include "csalt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace csalt {

struct MatchResult {
    /// assignment[s] is the column matched to row s.
    std::vector<Index> assignment;
    double total = 0.0;
};

namespace detail {

/// Minimum-cost assignment with dual potentials (rows u, columns v).
struct AssignmentSolution {
    std::vector<Index> row_to_col;
    std::vector<double> u, v;
};

inline AssignmentSolution min_cost_assignment(const RealMatrix& cost) {
    const Index n = cost.rows();
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; column 0 is the virtual start
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<Index> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const Index i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const Index j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    AssignmentSolution out;
    out.row_to_col.assign(static_cast<std::size_t>(n), 0);
    for (Index j = 1; j <= n; ++j) out.row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    out.u.assign(u.begin() + 1, u.end());
    out.v.assign(v.begin() + 1, v.end());
    return out;
}

/// Among all perfect matchings of the tight (zero reduced cost) graph, which
/// are exactly the optimal assignments, pick the lexicographically smallest.
inline void lexicographic_refine(const RealMatrix& cost, const AssignmentSolution& duals, std::vector<Index>& sigma) {
    const Index n = cost.rows();
    const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
    const double tol = 1e-9 * scale;
    auto tight = [&](Index i, Index j) {
        return std::abs(cost(i, j) - duals.u[static_cast<std::size_t>(i)] - duals.v[static_cast<std::size_t>(j)]) <= tol;
    };
    std::vector<Index> col_owner(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) col_owner[static_cast<std::size_t>(sigma[static_cast<std::size_t>(i)])] = i;
    std::vector<bool> col_fixed(static_cast<std::size_t>(n), false);

    for (Index s = 0; s < n; ++s) {
        for (Index t = 0; t < n; ++t) {
            if (col_fixed[static_cast<std::size_t>(t)] || !tight(s, t)) continue;
            if (t == sigma[static_cast<std::size_t>(s)]) break;
            // reroute: the owner of t must reach the column s frees, through
            // tight edges among rows > s
            const Index target = sigma[static_cast<std::size_t>(s)];
            const Index start = col_owner[static_cast<std::size_t>(t)];
            std::vector<Index> via_col(static_cast<std::size_t>(n), -1);  // predecessor row of a column
            std::vector<bool> seen_row(static_cast<std::size_t>(n), false);
            std::vector<Index> queue{start};
            seen_row[static_cast<std::size_t>(start)] = true;
            bool found = false;
            for (std::size_t q = 0; q < queue.size() && !found; ++q) {
                const Index i = queue[q];
                for (Index j = 0; j < n; ++j) {
                    if (j == t || col_fixed[static_cast<std::size_t>(j)] || via_col[static_cast<std::size_t>(j)] >= 0 || !tight(i, j))
                        continue;
                    via_col[static_cast<std::size_t>(j)] = i;
                    if (j == target) {
                        found = true;
                        break;
                    }
                    const Index next = col_owner[static_cast<std::size_t>(j)];
                    if (next == s || seen_row[static_cast<std::size_t>(next)]) continue;
                    seen_row[static_cast<std::size_t>(next)] = true;
                    queue.push_back(next);
                }
            }
            if (!found) continue;
            for (Index j = target;;) {
                const Index i = via_col[static_cast<std::size_t>(j)];
                const Index prev = sigma[static_cast<std::size_t>(i)];
                sigma[static_cast<std::size_t>(i)] = j;
                col_owner[static_cast<std::size_t>(j)] = i;
                if (i == start) break;
                j = prev;
            }
            sigma[static_cast<std::size_t>(s)] = t;
            col_owner[static_cast<std::size_t>(t)] = s;
            break;
        }
        col_fixed[static_cast<std::size_t>(sigma[static_cast<std::size_t>(s)])] = true;
    }
}

} // namespace detail

/// Maximum-score one-to-one assignment; non-square inputs are zero-padded.
/// Ties resolve to the lexicographically smallest assignment.
inline MatchResult hungarian(const RealMatrix& score) {
    const Index n = std::max(score.rows(), score.cols());
    MatchResult out;
    if (n == 0) return out;
    RealMatrix cost = RealMatrix::Zero(n, n);
    cost.topLeftCorner(score.rows(), score.cols()) = -score;
    const auto sol = detail::min_cost_assignment(cost);
    out.assignment = sol.row_to_col;
    detail::lexicographic_refine(cost, sol, out.assignment);
    out.assignment.resize(static_cast<std::size_t>(score.rows()));
    for (Index s = 0; s < score.rows(); ++s) {
        const Index t = out.assignment[static_cast<std::size_t>(s)];
        if (t < score.cols()) out.total += score(s, t);
    }
    return out;
}

enum class MatchMode { PerClass, Shared };

struct EvalReport {
    std::vector<double> f_class;
    double f_avg = 0.0;
    std::vector<double> recv_class;
    double recv_avg = 0.0;
    std::vector<Index> rank_class;
    double rank_avg = 0.0;
    std::size_t rss = 0;
};

namespace detail {

using IntMatrix = Eigen::MatrixXi;

/// Usage rows of class a and the class patterns X + V^(a), as integers.
struct ClassView {
    IntMatrix usage;    // m_a x R
    IntMatrix pattern;  // n x R
};

inline ClassView class_view(const FactorModel& m, int a) {
    return {m.Y.bits().middleRows(m.partition.offset(a), m.partition.size(a)).cast<int>(),
            m.class_patterns(a).bits().cast<int>()};
}

/// overlap(s, t) = |Y*_s o Y_t| * |X*_s o X_t| for one class.
inline RealMatrix overlap_mass(const ClassView& truth, const ClassView& model) {
    const IntMatrix yo = truth.usage.transpose() * model.usage;
    const IntMatrix xo = truth.pattern.transpose() * model.pattern;
    return (yo.cast<double>().array() * xo.cast<double>().array()).matrix();
}

/// |Y_s| * |X_s| per column.
inline RealVector product_mass(const ClassView& v) {
    return (v.usage.colwise().sum().cast<double>().array() * v.pattern.colwise().sum().cast<double>().array())
        .matrix()
        .transpose();
}

inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline void check_comparable(const FactorModel& truth, const FactorModel& model) {
    truth.check_shapes();
    model.check_shapes();
    if (truth.items() != model.items()) throw DimensionMismatch("truth and model have different item counts");
    if (!(truth.partition == model.partition)) throw DimensionMismatch("truth and model partitions differ");
}

inline double set_f(double overlap, double model_mass, double truth_mass) {
    if (model_mass == 0.0 && truth_mass == 0.0) return 1.0;
    if (model_mass == 0.0 || truth_mass == 0.0) return 0.0;
    return harmonic(overlap / model_mass, overlap / truth_mass);
}

} // namespace detail

/// Pairwise F-measures F^(a)_{s,t} between planted column s and computed
/// column t. Both models must already have the same rank.
inline RealMatrix pair_scores(const FactorModel& truth, const FactorModel& model, int a) {
    detail::check_comparable(truth, model);
    if (truth.rank() != model.rank()) throw DimensionMismatch("pad both models to a common rank first");
    const auto tv = detail::class_view(truth, a);
    const auto mv = detail::class_view(model, a);
    const RealMatrix ov = detail::overlap_mass(tv, mv);
    const RealVector tm = detail::product_mass(tv);
    const RealVector mm = detail::product_mass(mv);
    RealMatrix out(ov.rows(), ov.cols());
    for (Index s = 0; s < ov.rows(); ++s)
        for (Index t = 0; t < ov.cols(); ++t) {
            if (tm(s) == 0.0 || mm(t) == 0.0) {
                out(s, t) = 0.0;
                continue;
            }
            out(s, t) = detail::harmonic(ov(s, t) / mm(t), ov(s, t) / tm(s));
        }
    return out;
}

struct ClassScores {
    std::vector<double> per_class;
    double average = 0.0;
};

/// Micro F-measure per class under the matching sigma_1.
inline ClassScores micro_f(const FactorModel& truth_in, const FactorModel& model_in,
                           MatchMode mode = MatchMode::PerClass) {
    detail::check_comparable(truth_in, model_in);
    const Index r = std::max(truth_in.rank(), model_in.rank());
    const FactorModel truth = pad_rank(truth_in, r);
    const FactorModel model = pad_rank(model_in, r);
    const int c = truth.class_count();

    std::vector<RealMatrix> scores;
    for (int a = 0; a < c; ++a) scores.push_back(pair_scores(truth, model, a));
    MatchResult shared;
    if (mode == MatchMode::Shared) {
        RealMatrix sum = RealMatrix::Zero(r, r);
        for (const auto& s : scores) sum += s;
        shared = hungarian(sum);
    }

    ClassScores out;
    for (int a = 0; a < c; ++a) {
        const MatchResult match = mode == MatchMode::Shared ? shared : hungarian(scores[static_cast<std::size_t>(a)]);
        const auto tv = detail::class_view(truth, a);
        const auto mv = detail::class_view(model, a);
        const RealMatrix ov = detail::overlap_mass(tv, mv);
        double overlap = 0.0;
        for (Index s = 0; s < r; ++s) overlap += ov(s, match.assignment[static_cast<std::size_t>(s)]);
        out.per_class.push_back(
            detail::set_f(overlap, detail::product_mass(mv).sum(), detail::product_mass(tv).sum()));
    }
    out.average = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / c;
    return out;
}

/// Recall of the planted alterations (V*, Y*) against the computed patterns
/// [X V^(1) ... V^(c)] with usage [Y ... Y] (c + 1 copies). A class without
/// planted alterations scores 1.
inline ClassScores recall_v(const FactorModel& truth_in, const FactorModel& model_in,
                            MatchMode mode = MatchMode::PerClass) {
    detail::check_comparable(truth_in, model_in);
    const Index r = std::max(truth_in.rank(), model_in.rank());
    const FactorModel truth = pad_rank(truth_in, r);
    const FactorModel model = pad_rank(model_in, r);
    const int c = truth.class_count();
    const Index k = static_cast<Index>(c + 1) * r;
    const Index n = truth.items();

    detail::IntMatrix xv(n, k);
    xv.leftCols(r) = model.X.bits().cast<int>();
    for (int a = 0; a < c; ++a) xv.middleCols((a + 1) * r, r) = model.V[static_cast<std::size_t>(a)].bits().cast<int>();

    std::vector<RealMatrix> scores;
    std::vector<RealMatrix> overlaps;
    std::vector<RealVector> planted_mass;
    for (int a = 0; a < c; ++a) {
        detail::ClassView tv;
        tv.usage = detail::IntMatrix::Zero(truth.partition.size(a), k);
        tv.usage.leftCols(r) = truth.Y.bits().middleRows(truth.partition.offset(a), truth.partition.size(a)).cast<int>();
        tv.pattern = detail::IntMatrix::Zero(n, k);
        tv.pattern.leftCols(r) = truth.V[static_cast<std::size_t>(a)].bits().cast<int>();
        detail::ClassView mv;
        mv.usage = detail::IntMatrix(truth.partition.size(a), k);
        const auto ya = model.Y.bits().middleRows(model.partition.offset(a), model.partition.size(a)).cast<int>();
        for (int g = 0; g <= c; ++g) mv.usage.middleCols(g * r, r) = ya;
        mv.pattern = xv;

        RealMatrix ov = detail::overlap_mass(tv, mv);
        RealVector tm = detail::product_mass(tv);
        RealMatrix sc = RealMatrix::Zero(k, k);
        for (Index s = 0; s < k; ++s)
            if (tm(s) > 0.0) sc.row(s) = ov.row(s) / tm(s);
        scores.push_back(std::move(sc));
        overlaps.push_back(std::move(ov));
        planted_mass.push_back(std::move(tm));
    }
    MatchResult shared;
    if (mode == MatchMode::Shared) {
        RealMatrix sum = RealMatrix::Zero(k, k);
        for (const auto& s : scores) sum += s;
        shared = hungarian(sum);
    }

    ClassScores out;
    for (int a = 0; a < c; ++a) {
        const double mass = planted_mass[static_cast<std::size_t>(a)].sum();
        if (mass == 0.0) {
            out.per_class.push_back(1.0);
            continue;
        }
        const MatchResult match = mode == MatchMode::Shared ? shared : hungarian(scores[static_cast<std::size_t>(a)]);
        double overlap = 0.0;
        for (Index s = 0; s < k; ++s) overlap += overlaps[static_cast<std::size_t>(a)](s, match.assignment[static_cast<std::size_t>(s)]);
        out.per_class.push_back(overlap / mass);
    }
    out.average = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / c;
    return out;
}

struct RankScores {
    std::vector<Index> per_class;
    double average = 0.0;
};

inline RankScores effective_ranks(const FactorModel& model) {
    RankScores out;
    out.per_class = class_ranks(model);
    double sum = 0.0;
    for (Index v : out.per_class) sum += static_cast<double>(v);
    out.average = out.per_class.empty() ? 0.0 : sum / static_cast<double>(out.per_class.size());
    return out;
}

/// Full report. rss is the Boolean residual of the model against the data.
inline EvalReport evaluate(const FactorModel& truth, const FactorModel& model, std::size_t rss,
                           MatchMode mode = MatchMode::PerClass) {
    EvalReport rep;
    const auto f = micro_f(truth, model, mode);
    rep.f_class = f.per_class;
    rep.f_avg = f.average;
    const auto rv = recall_v(truth, model, mode);
    rep.recv_class = rv.per_class;
    rep.recv_avg = rv.average;
    const auto rk = effective_ranks(model);
    rep.rank_class = rk.per_class;
    rep.rank_avg = rk.average;
    rep.rss = rss;
    return rep;
}

} // namespace csalt
