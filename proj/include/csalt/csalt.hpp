#pragma once

// Rank escalation driver: warm-started PALM at ranks delta_r, 2 delta_r, ...,
// threshold-grid rounding under the class-specific alteration constraints,
// removal of trivial outer products, and the rank-gap stopping rule.

#include "csalt/binmat.hpp"
#include "csalt/model.hpp"
#include "csalt/objective.hpp"
#include "csalt/palm.hpp"

#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

namespace csalt {

struct CsaltConfig {
    Index delta_r = 10;
    PalmConfig palm;
    /// Stop escalating after the stage with this rank.
    Index max_rank = 200;
    std::uint64_t seed = 0;
    /// Per-stage summary lines go here when set.
    std::ostream* log = nullptr;

    static std::vector<double> threshold_grid() {
        std::vector<double> grid;
        for (int k = 0; k <= 20; ++k) grid.push_back(0.05 * k);
        return grid;
    }

    void validate() const {
        if (delta_r < 1) throw InvalidInput("delta_r must be at least 1");
        if (max_rank < delta_r) throw InvalidInput("max_rank must be at least delta_r");
        palm.validate();
    }
};

/// Data restricted to its nonempty columns.
struct ColumnFilter {
    SparseBinaryMatrix data;
    std::vector<Index> kept;  // original index of every retained column
    Index original_cols = 0;
};

inline ColumnFilter drop_empty_columns(const SparseBinaryMatrix& d) {
    ColumnFilter out;
    out.original_cols = d.cols();
    const auto counts = d.col_counts();
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) out.kept.push_back(static_cast<Index>(i));
    out.data = d.select_columns(out.kept);
    return out;
}

/// Maps a model over the retained columns back to all original items; dropped
/// items get zero rows in X and V.
inline FactorModel expand_items(const FactorModel& m, const ColumnFilter& filter) {
    auto expand = [&](const BinaryMatrix& b) {
        BinaryMatrix out(filter.original_cols, b.cols());
        for (std::size_t k = 0; k < filter.kept.size(); ++k)
            out.bits().row(filter.kept[k]) = b.bits().row(static_cast<Index>(k));
        return out;
    };
    FactorModel out;
    out.X = expand(m.X);
    for (const auto& v : m.V) out.V.push_back(expand(v));
    out.Y = m.Y;
    out.partition = m.partition;
    return out;
}

/// Appends delta_r random columns to every factor; existing columns are kept.
/// X and Y entries are drawn from U[0,1], V entries from U[0,0.1].
template <typename Rng>
RelaxedState increase_rank(const RelaxedState& prev, Index n, Index m, int classes, Index delta_r, Rng& rng,
                           bool with_alterations = true) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Index r0 = prev.X.cols();
    const Index r = r0 + delta_r;
    auto grow = [&](const RealMatrix& old, Index rows, double scale) {
        RealMatrix out(rows, r);
        if (r0 > 0) out.leftCols(r0) = old;
        for (Index k = r0; k < r; ++k)
            for (Index i = 0; i < rows; ++i) out(i, k) = scale * unit(rng);
        return out;
    };
    RelaxedState next;
    next.X = grow(prev.X, n, 1.0);
    for (int a = 0; a < classes; ++a) {
        const RealMatrix old = prev.V.empty() ? RealMatrix(n, 0) : prev.V[static_cast<std::size_t>(a)];
        next.V.push_back(grow(old, n, with_alterations ? 0.1 : 0.0));
    }
    next.Y = grow(prev.Y, m, 1.0);
    next.iteration = 0;
    return next;
}

/// Zeroes alteration entries that overlap X or that are set in every class.
inline std::vector<BinaryMatrix> enforce_class_specific(const BinaryMatrix& x, std::vector<BinaryMatrix> v) {
    for (const auto& b : v)
        if (b.rows() != x.rows() || b.cols() != x.cols()) throw DimensionMismatch("V block shape differs from X");
    if (v.empty()) return v;
    BinaryMatrix::Storage all = v.front().bits();
    for (std::size_t a = 1; a < v.size(); ++a) all = all.cwiseMin(v[a].bits());
    const std::uint8_t one = 1;
    const BinaryMatrix::Storage keep = (one - x.bits().array()).cwiseMin(one - all.array()).matrix();
    for (auto& b : v) b.bits() = b.bits().cwiseMin(keep);
    return v;
}

/// X and every V^(a) disjoint, no entry set in all V^(a).
inline bool is_class_specific(const BinaryMatrix& x, const std::vector<BinaryMatrix>& v) {
    if (v.empty()) return true;
    BinaryMatrix::Storage all = v.front().bits();
    for (const auto& b : v) {
        if ((x.bits().array() * b.bits().array()).cast<int>().sum() != 0) return false;
        all = all.cwiseMin(b.bits());
    }
    return all.cast<int>().sum() == 0;
}

/// Column s counts for class a iff |Y^(a)_s| >= 2 and |X_s + V^(a)_s| >= 2.
inline bool nontrivial_in_class(const FactorModel& m, Index s, int a) {
    const auto ya = m.Y.bits().col(s).segment(m.partition.offset(a), m.partition.size(a));
    if (ya.cast<int>().sum() < 2) return false;
    const auto& va = m.V[static_cast<std::size_t>(a)].bits();
    return m.X.bits().col(s).cwiseMax(va.col(s)).cast<int>().sum() >= 2;
}

/// Number of nontrivial outer products per class.
inline std::vector<Index> class_ranks(const FactorModel& m) {
    std::vector<Index> out(static_cast<std::size_t>(m.class_count()), 0);
    for (Index s = 0; s < m.rank(); ++s)
        for (int a = 0; a < m.class_count(); ++a)
            if (nontrivial_in_class(m, s, a)) ++out[static_cast<std::size_t>(a)];
    return out;
}

/// Drops columns used by fewer than two transactions or whose pattern covers
/// fewer than two items in every class.
inline FactorModel remove_trivial(const FactorModel& m) {
    std::vector<Index> keep;
    for (Index s = 0; s < m.rank(); ++s) {
        if (m.Y.col_count(s) < 2) continue;
        bool covers = false;
        for (int a = 0; a < m.class_count() && !covers; ++a) {
            const auto& va = m.V[static_cast<std::size_t>(a)].bits();
            covers = m.X.bits().col(s).cwiseMax(va.col(s)).cast<int>().sum() >= 2;
        }
        if (covers) keep.push_back(s);
    }
    return select_columns(m, keep);
}

/// Summary of a rounded model.
struct RoundedModel {
    FactorModel model;
    double t_pattern = 0.5;
    double t_usage = 0.5;
    double f_before_removal = 0.0;  // best grid candidate
    double f = 0.0;                 // after trivial columns are removed
    std::size_t rss = 0;            // |N|
};

/// Tries every (t1, t2) pair of the threshold grid, keeping the candidate
/// with the smallest description length; ties go to the smaller thresholds.
inline RoundedModel round_model(const ObjectiveContext& ctx, const RelaxedState& s) {
    const auto grid = CsaltConfig::threshold_grid();
    std::vector<FactorModel> usages;
    for (double t2 : grid) {
        FactorModel probe;
        probe.Y = theta(s.Y, t2);
        usages.push_back(std::move(probe));
    }

    RoundedModel best;
    double best_f = std::numeric_limits<double>::infinity();
    FactorModel cand;
    cand.partition = ctx.partition();
    for (double t1 : grid) {
        cand.X = theta(s.X, t1);
        std::vector<BinaryMatrix> v;
        for (const auto& va : s.V) v.push_back(theta(va, t1));
        cand.V = enforce_class_specific(cand.X, std::move(v));
        for (std::size_t k = 0; k < grid.size(); ++k) {
            cand.Y = usages[k].Y;
            const double f = description_length(ctx, cand);
            if (f < best_f) {
                best_f = f;
                best.model = cand;
                best.t_pattern = t1;
                best.t_usage = grid[k];
            }
        }
    }
    best.f_before_removal = best_f;
    best.model = remove_trivial(best.model);
    best.f = description_length(ctx, best.model);
    best.rss = residual_boolean(ctx, best.model).total;
    return best;
}

/// One rank stage of the driver.
struct StageReport {
    Index rank_tried = 0;
    std::size_t iterations = 0;
    double final_objective = 0.0;  // F + phi after the last sweep
    double rounded_f = 0.0;
    Index rounded_rank = 0;
    PalmTrace trace;
};

struct FactorizeResult {
    FactorModel model;
    double f = 0.0;
    std::size_t rss = 0;
    std::vector<Index> class_ranks;
    std::vector<StageReport> stages;
    /// Final relaxed iterates of the returned stage.
    RelaxedState relaxed;
};

namespace detail {

inline FactorizeResult run_driver(const ObjectiveContext& ctx, const CsaltConfig& cfg, bool alterations) {
    cfg.validate();
    PalmConfig palm = cfg.palm;
    palm.update_alterations = alterations;
    std::mt19937_64 rng(cfg.seed);

    RelaxedState state;
    FactorizeResult best;
    double best_f = std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (Index r = cfg.delta_r;; r += cfg.delta_r) {
        state = increase_rank(state, ctx.items(), ctx.transactions(), ctx.class_count(), cfg.delta_r, rng,
                              alterations);
        StageReport stage;
        stage.rank_tried = r;
        stage.trace = run_palm(ctx, state, palm);
        stage.iterations = stage.trace.sweeps();
        stage.final_objective = stage.trace.values.back();

        RoundedModel rounded = round_model(ctx, state);
        stage.rounded_f = rounded.f;
        stage.rounded_rank = rounded.model.rank();
        if (cfg.log)
            *cfg.log << "rank " << r << ": iterations=" << stage.iterations << " F=" << stage.final_objective
                     << " f=" << rounded.f << " r(X,V,Y)=" << rounded.model.rank() << '\n';

        const bool gap = r - rounded.model.rank() > 1;
        if (gap || !have_best || rounded.f < best_f) {
            best.model = std::move(rounded.model);
            best.f = rounded.f;
            best.rss = rounded.rss;
            best.relaxed = state;
            best_f = rounded.f;
            have_best = true;
        }
        best.stages.push_back(std::move(stage));
        if (gap || r >= cfg.max_rank) break;
    }
    best.class_ranks = class_ranks(best.model);
    return best;
}

} // namespace detail

/// Class-aware factorization with alterations.
inline FactorizeResult factorize(const ObjectiveContext& ctx, const CsaltConfig& cfg) {
    return detail::run_driver(ctx, cfg, true);
}

/// Same pipeline with every V block pinned at zero.
inline FactorizeResult factorize_unsupervised(const ObjectiveContext& ctx, const CsaltConfig& cfg) {
    return detail::run_driver(ctx, cfg, false);
}

} // namespace csalt
