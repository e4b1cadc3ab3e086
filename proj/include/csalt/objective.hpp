#pragma once

// Code lengths, the specificity regularizer, the description length f of a
// rounded model, and the smooth relaxed objective F with its block gradients
// and Lipschitz moduli.
//
// F(X,V,Y) = mu/2 * sum_a ||D_a - Y_a (X + V_a)^T||^2 + G(X,V,Y)/2 + S(Y,V)
//
// with S entering unhalved so that the gradients below are exact.

#include "csalt/binmat.hpp"
#include "csalt/errors.hpp"
#include "csalt/model.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace csalt {

/// Standard code lengths u_i = -log(|D_i| / |D|).
struct CodeLengths {
    RealVector u;
    std::size_t total_ones = 0;
};

inline CodeLengths code_lengths(const SparseBinaryMatrix& d) {
    const auto counts = d.col_counts();
    CodeLengths out;
    out.total_ones = d.nnz();
    out.u.resize(d.cols());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) throw EmptyColumn(i);
        out.u(static_cast<Index>(i)) =
            -std::log(static_cast<double>(counts[i]) / static_cast<double>(out.total_ones));
    }
    return out;
}

/// Real-valued PALM iterates.
struct RelaxedState {
    RealMatrix X;               // n x r
    std::vector<RealMatrix> V;  // c blocks, n x r
    RealMatrix Y;               // m x r
    std::size_t iteration = 0;

    Index rank() const noexcept { return X.cols(); }
};

/// Data, partition and the constants derived from them. Rows of the data
/// must already be in canonical class order.
class ObjectiveContext {
  public:
    ObjectiveContext(SparseBinaryMatrix data, ClassPartition partition)
        : data_(std::move(data)), partition_(std::move(partition)) {
        if (data_.rows() != partition_.rows())
            throw DimensionMismatch("data rows do not match the partition");
        if (data_.nnz() == 0) throw InvalidInput("data has no ones");
        codes_ = code_lengths(data_);
        mu_ = 1.0 + std::log(static_cast<double>(data_.cols()));
        whole_ = data_.to_sparse_real();
        for (int a = 0; a < class_count(); ++a) {
            blocks_.emplace_back(whole_.middleRows(partition_.offset(a), partition_.size(a)));
            block_ones_.push_back(blocks_.back().sum());
        }
        bits_ = BitRows::from_sparse(data_);
    }

    const SparseBinaryMatrix& data() const noexcept { return data_; }
    const ClassPartition& partition() const noexcept { return partition_; }
    const RealVector& u() const noexcept { return codes_.u; }
    const CodeLengths& codes() const noexcept { return codes_; }
    double mu() const noexcept { return mu_; }

    Index items() const noexcept { return data_.cols(); }
    Index transactions() const noexcept { return data_.rows(); }
    int class_count() const noexcept { return partition_.class_count(); }

    const SparseReal& matrix() const noexcept { return whole_; }
    const SparseReal& block(int a) const {
        partition_.check(a);
        return blocks_[static_cast<std::size_t>(a)];
    }
    /// |D^(a)|
    double block_ones(int a) const { return block_ones_[static_cast<std::size_t>(a)]; }
    const BitRows& bit_rows() const noexcept { return bits_; }

  private:
    SparseBinaryMatrix data_;
    ClassPartition partition_;
    CodeLengths codes_;
    double mu_ = 1.0;
    SparseReal whole_;
    std::vector<SparseReal> blocks_;
    std::vector<double> block_ones_;
    BitRows bits_;
};

namespace detail {

inline void check_state(const ObjectiveContext& ctx, const RelaxedState& s) {
    if (s.X.rows() != ctx.items()) throw DimensionMismatch("X rows differ from item count");
    if (s.Y.rows() != ctx.transactions() || s.Y.cols() != s.X.cols())
        throw DimensionMismatch("Y shape does not match data and rank");
    if (s.V.size() != static_cast<std::size_t>(ctx.class_count()))
        throw DimensionMismatch("state needs one V block per class");
    for (const auto& v : s.V)
        if (v.rows() != s.X.rows() || v.cols() != s.X.cols())
            throw DimensionMismatch("V block shape differs from X");
}

inline auto y_block(const ObjectiveContext& ctx, const RealMatrix& y, int a) {
    return y.middleRows(ctx.partition().offset(a), ctx.partition().size(a));
}

/// D^(a)^T Y^(a) for every class.
inline std::vector<RealMatrix> data_usage_products(const ObjectiveContext& ctx, const RealMatrix& y) {
    std::vector<RealMatrix> out;
    for (int a = 0; a < ctx.class_count(); ++a)
        out.emplace_back(ctx.block(a).transpose() * y_block(ctx, y, a));
    return out;
}

inline RealMatrix sum_of(const std::vector<RealMatrix>& ms, Index rows, Index cols) {
    RealMatrix out = RealMatrix::Zero(rows, cols);
    for (const auto& m : ms) out += m;
    return out;
}

} // namespace detail

/// N^(a) = D^(a) - Y^(a) (X + V^(a))^T, dense and real-valued.
inline std::vector<RealMatrix> residual_real(const ObjectiveContext& ctx, const RelaxedState& s) {
    detail::check_state(ctx, s);
    std::vector<RealMatrix> out;
    for (int a = 0; a < ctx.class_count(); ++a) {
        RealMatrix n = RealMatrix(ctx.block(a));
        n.noalias() -= detail::y_block(ctx, s.Y, a) * (s.X + s.V[static_cast<std::size_t>(a)]).transpose();
        out.push_back(std::move(n));
    }
    return out;
}

/// D - theta(Y^(a)(X + V^(a))^T) per class, entries in {-1, 0, 1}.
struct BooleanResidual {
    Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> N;  // m x n, canonical rows
    std::vector<std::size_t> col_counts;                           // |N_i|
    std::size_t total = 0;                                         // |N|
};

namespace detail {

/// Per-column counts of cells where the Boolean reconstruction and the data
/// disagree. Optionally records the signed residual.
inline std::vector<std::size_t> boolean_mismatch(const BitRows& d, const FactorModel& model, BooleanResidual* full) {
    model.check_shapes();
    if (model.items() != d.cols() || model.partition.rows() != d.rows())
        throw DimensionMismatch("model shape does not match data");
    const Index n = d.cols();
    const Index words = d.words();
    std::vector<std::size_t> counts(static_cast<std::size_t>(n), 0);
    std::vector<std::uint64_t> recon(static_cast<std::size_t>(words));
    const auto& part = model.partition;
    for (int a = 0; a < part.class_count(); ++a) {
        const BitRows pat = BitRows::from_columns(model.class_patterns(a));
        const Index lo = part.offset(a);
        const Index hi = lo + part.size(a);
        for (Index j = lo; j < hi; ++j) {
            std::fill(recon.begin(), recon.end(), 0);
            for (Index s = 0; s < model.rank(); ++s)
                if (model.Y(j, s)) {
                    const auto* p = pat.row(s);
                    for (Index w = 0; w < words; ++w) recon[static_cast<std::size_t>(w)] |= p[w];
                }
            const auto* drow = d.row(j);
            for (Index w = 0; w < words; ++w) {
                std::uint64_t diff = recon[static_cast<std::size_t>(w)] ^ drow[w];
                while (diff) {
                    const Index i = w * 64 + std::countr_zero(diff);
                    ++counts[static_cast<std::size_t>(i)];
                    if (full) full->N(j, i) = d.test(j, i) ? 1 : -1;
                    diff &= diff - 1;
                }
            }
        }
    }
    return counts;
}

} // namespace detail

inline BooleanResidual residual_boolean(const ObjectiveContext& ctx, const FactorModel& model) {
    BooleanResidual out;
    out.N.setZero(ctx.transactions(), ctx.items());
    out.col_counts = detail::boolean_mismatch(ctx.bit_rows(), model, &out);
    for (auto c : out.col_counts) out.total += c;
    return out;
}

/// |D - theta(...)| for data whose rows follow the model's partition. Needs no
/// code lengths, so empty columns are allowed.
inline std::size_t boolean_rss(const SparseBinaryMatrix& data, const FactorModel& model) {
    std::size_t total = 0;
    for (auto c : detail::boolean_mismatch(BitRows::from_sparse(data), model, nullptr)) total += c;
    return total;
}

/// S(Y,V) in trace form: sum_a tr((Y_a^T (1 - 2 D_a) + Y^T D) V_a).
inline double specificity(const ObjectiveContext& ctx, const RealMatrix& y, const std::vector<RealMatrix>& v) {
    if (y.rows() != ctx.transactions()) throw DimensionMismatch("Y rows differ from data");
    if (v.size() != static_cast<std::size_t>(ctx.class_count()))
        throw DimensionMismatch("one V block per class required");
    const auto p = detail::data_usage_products(ctx, y);
    const RealMatrix p_all = detail::sum_of(p, ctx.items(), y.cols());
    double total = 0.0;
    for (int a = 0; a < ctx.class_count(); ++a) {
        const auto& va = v[static_cast<std::size_t>(a)];
        if (va.rows() != ctx.items() || va.cols() != y.cols())
            throw DimensionMismatch("V block shape mismatch");
        const RealVector usage = detail::y_block(ctx, y, a).colwise().sum().transpose();
        // (Y_a^T 1)^T V_a summed = sum_s |Y_a,s| * |V_a,s| for nonnegative entries
        total += (va * usage).sum();
        total += (va.array() * (p_all - 2.0 * p[static_cast<std::size_t>(a)]).array()).sum();
    }
    return total;
}

inline double specificity(const ObjectiveContext& ctx, const BinaryMatrix& y, const std::vector<BinaryMatrix>& v) {
    std::vector<RealMatrix> vr;
    for (const auto& b : v) vr.push_back(b.to_real());
    return specificity(ctx, y.to_real(), vr);
}

/// S(Y,V) evaluated by the column-wise double sum with scalar loops.
inline double specificity_sum_form(const ObjectiveContext& ctx, const RealMatrix& y,
                                   const std::vector<RealMatrix>& v) {
    const auto& part = ctx.partition();
    const RealMatrix d = RealMatrix(ctx.matrix());
    const Index r = y.cols();
    double total = 0.0;
    for (Index s = 0; s < r; ++s) {
        for (int a = 0; a < part.class_count(); ++a) {
            const auto& va = v[static_cast<std::size_t>(a)];
            double y_mass = 0.0, v_mass = 0.0;
            for (Index j = part.offset(a); j < part.offset(a) + part.size(a); ++j) y_mass += std::abs(y(j, s));
            for (Index i = 0; i < va.rows(); ++i) v_mass += std::abs(va(i, s));
            double own = 0.0, other = 0.0;
            for (Index j = 0; j < y.rows(); ++j) {
                double dv = 0.0;
                for (Index i = 0; i < d.cols(); ++i) dv += d(j, i) * va(i, s);
                if (part.class_of(j) == a)
                    own += y(j, s) * dv;
                else
                    other += y(j, s) * dv;
            }
            total += y_mass * v_mass - own + other;
        }
    }
    return total;
}

/// Description length f of a binary model (plus S), natural logarithms.
inline double description_length(const ObjectiveContext& ctx, const FactorModel& model) {
    const auto n_cols = detail::boolean_mismatch(ctx.bit_rows(), model, nullptr);
    double n_total = 0.0;
    for (auto c : n_cols) n_total += static_cast<double>(c);
    const Index r = model.rank();
    std::vector<double> usage(static_cast<std::size_t>(r));
    double y_total = 0.0;
    for (Index s = 0; s < r; ++s) {
        usage[static_cast<std::size_t>(s)] = static_cast<double>(model.Y.col_count(s));
        y_total += usage[static_cast<std::size_t>(s)];
    }
    const double denom = y_total + n_total;
    if (denom == 0.0) return 0.0;

    const RealVector& u = ctx.u();
    double f = 0.0;
    for (Index s = 0; s < r; ++s) {
        const double ys = usage[static_cast<std::size_t>(s)];
        if (ys <= 0.0) continue;
        f -= (ys + 1.0) * std::log(ys / denom);
        f += model.X.bits().col(s).cast<double>().dot(u);
        for (const auto& v : model.V) f += v.bits().col(s).cast<double>().dot(u);
    }
    for (std::size_t i = 0; i < n_cols.size(); ++i) {
        const double ni = static_cast<double>(n_cols[i]);
        if (ni <= 0.0) continue;
        f -= (ni + 1.0) * std::log(ni / denom);
        f += u(static_cast<Index>(i));
    }

    // binary S: each (usage row, alteration item) pair with a one in the data
    // counts -1 in the own class and +1 in the others
    const BitRows& d = ctx.bit_rows();
    for (int a = 0; a < ctx.class_count(); ++a) {
        const auto& va = model.V[static_cast<std::size_t>(a)];
        const BitRows vbits = BitRows::from_columns(va);
        const double ya_lo = static_cast<double>(ctx.partition().offset(a));
        const double ya_hi = ya_lo + static_cast<double>(ctx.partition().size(a));
        for (Index s = 0; s < r; ++s) {
            const double v_mass = static_cast<double>(va.col_count(s));
            if (v_mass == 0.0) continue;
            double ya_mass = 0.0, own = 0.0, other = 0.0;
            for (Index j = 0; j < model.Y.rows(); ++j) {
                if (!model.Y(j, s)) continue;
                const double hits = static_cast<double>(popcount_and(d.row(j), vbits.row(s), d.words()));
                const double jd = static_cast<double>(j);
                if (jd >= ya_lo && jd < ya_hi) {
                    ya_mass += 1.0;
                    own += hits;
                } else {
                    other += hits;
                }
            }
            f += ya_mass * v_mass - own + other;
        }
    }
    return f;
}

/// G(X,V,Y) for real iterates with entries in [0,1].
inline double smooth_G(const ObjectiveContext& ctx, const RelaxedState& s) {
    detail::check_state(ctx, s);
    const Index r = s.rank();
    const RealVector usage = s.Y.colwise().sum().transpose();
    const double y_total = usage.sum();
    double g = 0.0;
    for (Index k = 0; k < r; ++k)
        g -= (usage(k) + 1.0) * std::log((usage(k) + 1.0) / (y_total + static_cast<double>(r)));
    const RealVector& u = ctx.u();
    g += (s.X.transpose() * u).cwiseAbs().sum();
    for (const auto& v : s.V) g += (v.transpose() * u).cwiseAbs().sum();
    g += s.Y.cwiseAbs().sum();
    return g;
}

/// Sum over classes of ||N^(a)||^2, computed from Gram matrices without
/// forming the dense residual.
inline double residual_sq_norm(const ObjectiveContext& ctx, const RelaxedState& s) {
    detail::check_state(ctx, s);
    double total = 0.0;
    for (int a = 0; a < ctx.class_count(); ++a) {
        const auto ya = detail::y_block(ctx, s.Y, a);
        const RealMatrix w = s.X + s.V[static_cast<std::size_t>(a)];
        const RealMatrix p = ctx.block(a).transpose() * ya;
        const RealMatrix gy = ya.transpose() * ya;
        const RealMatrix gw = w.transpose() * w;
        total += ctx.block_ones(a) - 2.0 * (p.array() * w.array()).sum() + (gy.array() * gw.array()).sum();
    }
    return total;
}

inline double relaxed_F(const ObjectiveContext& ctx, const RelaxedState& s) {
    return 0.5 * ctx.mu() * residual_sq_norm(ctx, s) + 0.5 * smooth_G(ctx, s) + specificity(ctx, s.Y, s.V);
}

/// Gradient of F with respect to X.
inline RealMatrix grad_X(const ObjectiveContext& ctx, const RelaxedState& s) {
    detail::check_state(ctx, s);
    const Index r = s.rank();
    RealMatrix g = RealMatrix::Zero(ctx.items(), r);
    for (int a = 0; a < ctx.class_count(); ++a) {
        const auto ya = detail::y_block(ctx, s.Y, a);
        const RealMatrix w = s.X + s.V[static_cast<std::size_t>(a)];
        // N_a^T Y_a = D_a^T Y_a - W_a Y_a^T Y_a
        g.noalias() -= ctx.mu() * (ctx.block(a).transpose() * ya);
        g.noalias() += ctx.mu() * (w * (ya.transpose() * ya));
    }
    g.colwise() += 0.5 * ctx.u();
    return g;
}

/// Gradient of F with respect to V^(a).
inline RealMatrix grad_V(const ObjectiveContext& ctx, const RelaxedState& s, int a) {
    detail::check_state(ctx, s);
    ctx.partition().check(a);
    const auto p = detail::data_usage_products(ctx, s.Y);
    const auto& pa = p[static_cast<std::size_t>(a)];
    const auto ya = detail::y_block(ctx, s.Y, a);
    const RealMatrix w = s.X + s.V[static_cast<std::size_t>(a)];
    RealMatrix g = -ctx.mu() * (pa - w * (ya.transpose() * ya));
    g.colwise() += 0.5 * ctx.u();
    // grad_V S = D^T Y + (1 - 2 D_a)^T Y_a
    g += detail::sum_of(p, ctx.items(), s.rank()) - 2.0 * pa;
    g.rowwise() += ya.colwise().sum();
    return g;
}

/// Gradient of F with respect to Y^(a) (rows of class a only).
inline RealMatrix grad_Y(const ObjectiveContext& ctx, const RelaxedState& s, int a) {
    detail::check_state(ctx, s);
    ctx.partition().check(a);
    const Index r = s.rank();
    const auto ya = detail::y_block(ctx, s.Y, a);
    const auto& va = s.V[static_cast<std::size_t>(a)];
    const RealMatrix w = s.X + va;
    const RealMatrix v_all = detail::sum_of(s.V, ctx.items(), r);

    // -mu N_a W_a + D_a (sum_{b != a} V_b) + (1 - D_a) V_a
    //   = D_a (-mu W_a + sum_b V_b - 2 V_a) + mu Y_a W_a^T W_a + 1 |V_a,s|
    RealMatrix g = ctx.block(a) * (-ctx.mu() * w + v_all - 2.0 * va);
    g.noalias() += ctx.mu() * (ya * (w.transpose() * w));
    g.rowwise() += va.colwise().sum();

    const RealVector usage = s.Y.colwise().sum().transpose();
    const double denom = usage.sum() + static_cast<double>(r);
    Eigen::RowVectorXd log_term(r);
    for (Index k = 0; k < r; ++k) log_term(k) = -0.5 * (std::log((usage(k) + 1.0) / denom) - 1.0);
    g.rowwise() += log_term;
    return g;
}

/// Gradient with respect to the whole Y, class blocks stacked.
inline RealMatrix grad_Y(const ObjectiveContext& ctx, const RelaxedState& s) {
    RealMatrix g(s.Y.rows(), s.Y.cols());
    for (int a = 0; a < ctx.class_count(); ++a)
        g.middleRows(ctx.partition().offset(a), ctx.partition().size(a)) = grad_Y(ctx, s, a);
    return g;
}

struct LipschitzModuli {
    double X = 0.0;
    std::vector<double> V;        // per class
    std::vector<double> Y_class;  // per class
    double Y = 0.0;               // Euclidean norm of Y_class
};

/// Moduli below this are replaced by it, keeping step sizes finite.
inline constexpr double kModulusFloor = 1e-8;

inline LipschitzModuli lipschitz_moduli(const ObjectiveContext& ctx, const RelaxedState& s, bool guard = true) {
    detail::check_state(ctx, s);
    const double mu = ctx.mu();
    auto fix = [guard](double m) { return guard && m <= 0.0 ? kModulusFloor : m; };
    LipschitzModuli out;
    // ||Y Y^T||_F = ||Y^T Y||_F
    out.X = fix(mu * (s.Y.transpose() * s.Y).norm());
    double sq = 0.0;
    for (int a = 0; a < ctx.class_count(); ++a) {
        const auto ya = detail::y_block(ctx, s.Y, a);
        out.V.push_back(fix(mu * (ya.transpose() * ya).norm()));
        const RealMatrix w = s.X + s.V[static_cast<std::size_t>(a)];
        const double my = mu * (w.transpose() * w).norm() + static_cast<double>(ctx.partition().size(a));
        out.Y_class.push_back(fix(my));
        sq += my * my;
    }
    out.Y = fix(std::sqrt(sq));
    return out;
}

} // namespace csalt
