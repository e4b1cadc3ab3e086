#include "csalt/csalt.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace csalt;
using namespace csalt::testkit;

namespace {

BinaryMatrix column(std::initializer_list<int> bits) {
    BinaryMatrix out(static_cast<Index>(bits.size()), 1);
    Index i = 0;
    for (int b : bits) out.set(i++, 0, b != 0);
    return out;
}

} // namespace

TEST(EnforceClassSpecific, Example) {
    // X = (1,0,0,0); V_0 = (1,1,1,0); V_1 = (0,1,0,1)
    // item 0 overlaps X, item 1 is set in both classes
    const auto x = column({1, 0, 0, 0});
    const auto v = enforce_class_specific(x, {column({1, 1, 1, 0}), column({0, 1, 0, 1})});
    EXPECT_EQ(v[0], column({0, 0, 1, 0}));
    EXPECT_EQ(v[1], column({0, 0, 0, 1}));
    EXPECT_TRUE(is_class_specific(x, v));
}

TEST(EnforceClassSpecific, ExhaustiveSmallCases) {
    // every X, V_0, V_1, V_2 over two items and one column
    for (int bits = 0; bits < (1 << 8); ++bits) {
        const auto x = column({bits & 1, (bits >> 1) & 1});
        std::vector<BinaryMatrix> v;
        for (int a = 0; a < 3; ++a) v.push_back(column({(bits >> (2 + 2 * a)) & 1, (bits >> (3 + 2 * a)) & 1}));
        const auto fixed = enforce_class_specific(x, v);
        EXPECT_TRUE(is_class_specific(x, fixed));
        // only entries that broke a condition are cleared
        for (Index i = 0; i < 2; ++i) {
            bool all = true;
            for (const auto& b : v) all = all && b(i, 0);
            const bool clear = x(i, 0) || all;
            for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(fixed[a](i, 0), v[a](i, 0) && !clear);
        }
        if (is_class_specific(x, v)) EXPECT_EQ(fixed, v);
    }
}

TEST(IsClassSpecific, DetectsEachViolation) {
    EXPECT_FALSE(is_class_specific(column({1, 0}), {column({1, 0}), column({0, 0})}));
    EXPECT_FALSE(is_class_specific(column({0, 0}), {column({0, 1}), column({0, 1})}));
    EXPECT_TRUE(is_class_specific(column({1, 0}), {column({0, 1}), column({0, 0})}));
    // a single class can never have an alteration
    EXPECT_FALSE(is_class_specific(column({0, 0}), {column({0, 1})}));
}

TEST(RemoveTrivial, DropsSingleRowAndSingleItemColumns) {
    const auto part = ClassPartition::from_block_sizes({2, 2});
    FactorModel m = FactorModel::zeros(4, part, 4);
    // column 0: two rows, two items -> kept
    m.Y.set(0, 0, true);
    m.Y.set(2, 0, true);
    m.X.set(0, 0, true);
    m.X.set(1, 0, true);
    // column 1: one row -> dropped
    m.Y.set(1, 1, true);
    m.X.set(0, 1, true);
    m.X.set(1, 1, true);
    // column 2: two rows, one item in X but a second via V_1 -> kept
    m.Y.set(0, 2, true);
    m.Y.set(3, 2, true);
    m.X.set(2, 2, true);
    m.V[1].set(3, 2, true);
    // column 3: two rows, one item -> dropped
    m.Y.set(0, 3, true);
    m.Y.set(1, 3, true);
    m.X.set(3, 3, true);
    const FactorModel out = remove_trivial(m);
    ASSERT_EQ(out.rank(), 2);
    EXPECT_EQ(out.X.bits().col(0), m.X.bits().col(0));
    EXPECT_EQ(out.V[1].bits().col(1), m.V[1].bits().col(2));

    // per-class effective ranks: column 0 has one row per class, so it only
    // counts where a class has two rows
    EXPECT_EQ(class_ranks(out), (std::vector<Index>{0, 0}));
    EXPECT_FALSE(nontrivial_in_class(out, 1, 0));
    EXPECT_FALSE(nontrivial_in_class(out, 1, 1));
}

TEST(ClassRanks, DenseColumnCountsEverywhere) {
    const auto part = ClassPartition::from_block_sizes({3, 2});
    FactorModel m = FactorModel::zeros(3, part, 1);
    m.X.bits().setOnes();
    m.Y.bits().setOnes();
    EXPECT_EQ(class_ranks(m), (std::vector<Index>{1, 1}));
    EXPECT_EQ(class_ranks(FactorModel::zeros(3, part, 0)), (std::vector<Index>{0, 0}));
}

TEST(IncreaseRank, KeepsOldColumnsAndDrawsNewOnes) {
    Rng rng(1);
    RelaxedState s0;
    auto s1 = increase_rank(s0, 6, 5, 2, 3, rng);
    EXPECT_EQ(s1.rank(), 3);
    EXPECT_EQ(s1.V.size(), 2u);
    EXPECT_LE(s1.V[0].maxCoeff(), 0.1);
    EXPECT_GE(s1.X.minCoeff(), 0.0);
    EXPECT_LE(s1.Y.maxCoeff(), 1.0);
    auto s2 = increase_rank(s1, 6, 5, 2, 3, rng);
    EXPECT_EQ(s2.rank(), 6);
    EXPECT_EQ(RealMatrix(s2.X.leftCols(3)), s1.X);
    EXPECT_EQ(RealMatrix(s2.V[1].leftCols(3)), s1.V[1]);
    EXPECT_EQ(RealMatrix(s2.Y.leftCols(3)), s1.Y);
    auto frozen = increase_rank(s0, 6, 5, 2, 3, rng, false);
    EXPECT_EQ(frozen.V[0].norm(), 0.0);
}

TEST(ColumnFilter, DropAndExpand) {
    const SparseBinaryMatrix d(2, 4, {{0, 1}, {1, 3}});
    const auto f = drop_empty_columns(d);
    EXPECT_EQ(f.kept, (std::vector<Index>{1, 3}));
    EXPECT_EQ(f.data, SparseBinaryMatrix(2, 2, {{0, 0}, {1, 1}}));
    const auto part = ClassPartition::from_block_sizes({2});
    FactorModel m = FactorModel::zeros(2, part, 1);
    m.X.set(1, 0, true);
    m.Y.set(1, 0, true);
    const auto full = expand_items(m, f);
    EXPECT_EQ(full.items(), 4);
    EXPECT_TRUE(full.X(3, 0));
    EXPECT_EQ(full.X.count(), 1u);
    EXPECT_EQ(boolean_rss(d, full), 1u);
}

TEST(RoundModel, PicksTheCheapestGridPoint) {
    Rng rng(5);
    const auto data = random_sparse(rng, 20, 12, 0.3);
    const auto part = even_partition(20, 2);
    const ObjectiveContext ctx(data, part);
    const auto s = random_state(rng, 12, 20, 2, 3, 0.0, 1.0);
    const auto rounded = round_model(ctx, s);
    EXPECT_TRUE(is_class_specific(rounded.model.X, rounded.model.V));
    // compare with a direct sweep over the grid
    double best = std::numeric_limits<double>::infinity();
    for (double t1 : CsaltConfig::threshold_grid())
        for (double t2 : CsaltConfig::threshold_grid()) {
            FactorModel m;
            m.partition = part;
            m.X = theta(s.X, t1);
            std::vector<BinaryMatrix> v;
            for (const auto& va : s.V) v.push_back(theta(va, t1));
            m.V = enforce_class_specific(m.X, v);
            m.Y = theta(s.Y, t2);
            best = std::min(best, ref_description_length(data, m));
        }
    EXPECT_NEAR(rounded.f_before_removal, best, 1e-9 * std::abs(best));
    EXPECT_NEAR(rounded.f, description_length(ctx, rounded.model), 1e-12);
    EXPECT_EQ(rounded.rss, residual_boolean(ctx, rounded.model).total);
    EXPECT_EQ(remove_trivial(rounded.model), rounded.model);
}

TEST(Factorize, SmallPlantedInstance) {
    // two disjoint blocks plus a class-specific alteration
    const auto part = ClassPartition::from_block_sizes({20, 20});
    FactorModel t = FactorModel::zeros(16, part, 2);
    for (Index i = 0; i < 6; ++i) t.X.set(i, 0, true);
    for (Index i = 8; i < 14; ++i) t.X.set(i, 1, true);
    t.V[0].set(6, 0, true);
    t.V[0].set(7, 0, true);
    for (Index j = 0; j < 40; ++j) t.Y.set(j, j % 2, true);
    BinaryMatrix d(40, 16);
    for (int a = 0; a < 2; ++a)
        d.bits().middleRows(part.offset(a), part.size(a)) =
            boolean_product(class_block(std::as_const(t.Y), part, a), t.class_patterns(a)).bits();
    const auto filter = drop_empty_columns(SparseBinaryMatrix::from_dense(d));
    const ObjectiveContext ctx(filter.data, part);
    CsaltConfig cfg;
    cfg.delta_r = 4;
    cfg.palm.max_iterations = 2000;
    cfg.palm.window = 100;
    cfg.seed = 3;
    std::ostringstream log;
    cfg.log = &log;
    const auto res = factorize(ctx, cfg);
    EXPECT_TRUE(is_class_specific(res.model.X, res.model.V));
    EXPECT_EQ(res.rss, 0u);
    EXPECT_FALSE(res.stages.empty());
    EXPECT_NE(log.str().find("rank 4: iterations="), std::string::npos);
    EXPECT_NEAR(res.f, description_length(ctx, res.model), 1e-9);
}

TEST(Factorize, MaxRankCapsTheEscalation) {
    Rng rng(6);
    const auto data = random_sparse(rng, 30, 20, 0.5);
    const ObjectiveContext ctx(data, even_partition(30, 2));
    CsaltConfig cfg;
    cfg.delta_r = 2;
    cfg.max_rank = 4;
    cfg.palm.max_iterations = 5;
    cfg.palm.window = 5;
    const auto res = factorize(ctx, cfg);
    EXPECT_LE(res.stages.size(), 2u);
    EXPECT_LE(res.stages.back().rank_tried, 4);
}

TEST(FactorizeUnsupervised, AlterationsStayEmpty) {
    Rng rng(7);
    const auto data = random_sparse(rng, 20, 15, 0.3);
    const ObjectiveContext ctx(data, even_partition(20, 2));
    CsaltConfig cfg;
    cfg.delta_r = 3;
    cfg.max_rank = 6;
    cfg.palm.max_iterations = 50;
    cfg.palm.window = 10;
    const auto res = factorize_unsupervised(ctx, cfg);
    for (const auto& v : res.model.V) EXPECT_EQ(v.count(), 0u);
    for (const auto& v : res.relaxed.V) EXPECT_EQ(v.norm(), 0.0);
}

TEST(CsaltConfig, GridAndValidation) {
    const auto grid = CsaltConfig::threshold_grid();
    ASSERT_EQ(grid.size(), 21u);
    EXPECT_DOUBLE_EQ(grid.front(), 0.0);
    EXPECT_NEAR(grid.back(), 1.0, 1e-15);
    CsaltConfig cfg;
    cfg.max_rank = 5;
    EXPECT_THROW(cfg.validate(), InvalidInput);
}
