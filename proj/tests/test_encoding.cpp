#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace idfalign;

namespace {

std::vector<LeafPath> all_paths(std::uint32_t levels)
{
    std::vector<LeafPath> out;
    for (std::size_t leaf = 0; leaf < (std::size_t{1} << levels); ++leaf)
        out.push_back(path_from_leaf_index(leaf, levels + 1));
    return out;
}

std::size_t common_prefix(const LeafPath& a, const LeafPath& b)
{
    std::size_t n = 0;
    while (n < a.size() && a[n] == b[n])
        ++n;
    return n;
}

} // namespace

TEST(IdfValue, WorkedExample)
{
    const LeafPath david{1, 1, 1}, daniel{1, 1, 2}, denis{1, 2, 1};
    EXPECT_EQ(idf_value(david, 10), 111.0);
    EXPECT_EQ(idf_value(daniel, 10), 112.0);
    EXPECT_EQ(idf_value(denis, 10), 121.0);
    EXPECT_EQ(std::abs(idf_value(david, 10) - idf_value(daniel, 10)), 1.0);
    EXPECT_EQ(std::abs(idf_value(david, 10) - idf_value(denis, 10)), 10.0);
}

TEST(IdfValue, MatchesPowerSum)
{
    std::mt19937_64 rng(1);
    for (std::uint32_t k : {2u, 3u, 7u, 10u, 30u})
        for (std::uint32_t levels = 1; levels <= 10; ++levels)
            for (const LeafPath& p : all_paths(levels)) {
                double ref = 0;
                for (std::size_t i = 0; i < p.size(); ++i)
                    ref += p[i] * std::pow(double(k), double(levels - 1 - i));
                ASSERT_EQ(idf_value(p, k), ref);
            }
}

TEST(IdfValue, Errors)
{
    EXPECT_THROW(idf_value(LeafPath{}, 10), std::invalid_argument);
    EXPECT_THROW(idf_value(LeafPath{1}, 1), std::invalid_argument);
}

TEST(IdfRange, Values)
{
    EXPECT_EQ(idf_range(3, 10), (std::pair<double, double>{100, 222}));
    EXPECT_EQ(idf_range(1, 10), (std::pair<double, double>{1, 2}));
    EXPECT_EQ(idf_range(2, 10), (std::pair<double, double>{10, 22}));
    EXPECT_EQ(idf_range(3, IdfParams{10, IdfRangeMode::Achievable}), (std::pair<double, double>{111, 222}));
    EXPECT_THROW(idf_range(0, 10), std::invalid_argument);
    EXPECT_THROW(idf_range(3, 1), std::invalid_argument);
}

TEST(IdfRange, BoundsAreAllOnesAndAllTwos)
{
    for (std::uint32_t k : {2u, 3u, 10u, 30u})
        for (std::uint32_t levels = 1; levels <= 10; ++levels) {
            const auto [lo, hi] = idf_range(levels, k);
            EXPECT_EQ(hi, idf_value(LeafPath(levels, 2), k));
            EXPECT_EQ(idf_range(levels, IdfParams{k, IdfRangeMode::Achievable}).first,
                      idf_value(LeafPath(levels, 1), k));
            EXPECT_EQ(lo, std::pow(double(k), double(levels - 1)));
        }
}

TEST(NormalizeIdf, WorkedExample)
{
    EXPECT_NEAR(normalize_idf(111, idf_range(3, 10)), 0.090164, 1e-6);
    EXPECT_EQ(normalize_idf(100, {100, 222}), 0.0);
    EXPECT_EQ(normalize_idf(222, {100, 222}), 1.0);
}

TEST(NormalizeIdf, Errors)
{
    EXPECT_THROW(normalize_idf(5, {5, 5}), std::invalid_argument);
    EXPECT_THROW(normalize_idf(5, {6, 5}), std::invalid_argument);
    EXPECT_THROW(normalize_idf(99, {100, 222}), std::invalid_argument);
    EXPECT_THROW(normalize_idf(223, {100, 222}), std::invalid_argument);
}

TEST(IdfProperty, InjectiveExhaustive)
{
    for (std::uint32_t k : {2u, 3u, 10u, 30u})
        for (std::uint32_t levels = 1; levels <= 8; ++levels) {
            std::set<double> seen;
            for (const LeafPath& p : all_paths(levels))
                seen.insert(idf_value(p, k));
            EXPECT_EQ(seen.size(), std::size_t{1} << levels) << "k=" << k << " L=" << levels;
        }
}

TEST(IdfProperty, IntimacyMonotoneExhaustive)
{
    for (std::uint32_t k : {3u, 10u, 30u})
        for (std::uint32_t levels = 1; levels <= 7; ++levels) {
            const auto paths = all_paths(levels);
            std::vector<double> v;
            for (const auto& p : paths)
                v.push_back(idf_value(p, k));
            for (std::size_t a = 0; a < paths.size(); ++a)
                for (std::size_t b = 0; b < paths.size(); ++b)
                    for (std::size_t c = 0; c < paths.size(); ++c) {
                        if (b == a || c == a)
                            continue;
                        if (common_prefix(paths[a], paths[b]) > common_prefix(paths[a], paths[c]))
                            ASSERT_LT(std::abs(v[a] - v[b]), std::abs(v[a] - v[c]))
                                << "k=" << k << " L=" << levels << " a=" << a << " b=" << b << " c=" << c;
                    }
        }
}

TEST(IdfProperty, NormalizedValuesInUnitInterval)
{
    for (std::uint32_t k : {2u, 3u, 10u, 30u})
        for (std::uint32_t levels = 1; levels <= 10; ++levels) {
            const auto range = idf_range(levels, k);
            const auto achievable = idf_range(levels, IdfParams{k, IdfRangeMode::Achievable});
            for (const LeafPath& p : all_paths(levels)) {
                const double n = normalize_idf(idf_value(p, k), range);
                // With one level the conventional minimum k^0 = 1 is the left leaf itself.
                if (levels >= 2)
                    EXPECT_GT(n, 0.0);
                else
                    EXPECT_GE(n, 0.0);
                EXPECT_LE(n, 1.0);
                const double m = normalize_idf(idf_value(p, k), achievable);
                EXPECT_GE(m, 0.0);
                EXPECT_LE(m, 1.0);
            }
        }
}

TEST(Lbf, OneHotBlocks)
{
    EXPECT_EQ(encode_lbf(0, 4), (std::vector<double>{1, 0, 0, 0}));
    EXPECT_EQ(encode_lbf(3, 4), (std::vector<double>{0, 0, 0, 1}));
    EXPECT_EQ(encode_lbf(5, 64).size(), 64u);
    EXPECT_THROW(encode_lbf(4, 4), std::invalid_argument);
}

TEST(Lbf, EncoderBlocksSumToOneProperty)
{
    std::mt19937_64 rng(3);
    for (std::uint32_t depth = 2; depth <= 8; ++depth) {
        const std::size_t block = DecisionTree::leaf_count_for(depth);
        std::uniform_int_distribution<std::uint32_t> leaf(0, static_cast<std::uint32_t>(block - 1));
        std::vector<std::uint32_t> leaves(37);
        for (auto& v : leaves)
            v = leaf(rng);
        const EncodedFeature f = LeafEncoder(EncodingKind::LBF, depth, {}).encode(leaves);
        const std::vector<double> dense = f.to_dense();
        ASSERT_EQ(dense.size(), 37 * block);
        double total = 0;
        for (std::size_t b = 0; b < 37; ++b) {
            double s = 0;
            for (std::size_t j = 0; j < block; ++j) {
                const double v = dense[b * block + j];
                EXPECT_TRUE(v == 0.0 || v == 1.0);
                s += v;
            }
            EXPECT_EQ(s, 1.0);
            EXPECT_EQ(dense[b * block + leaves[b]], 1.0);
            total += s;
        }
        EXPECT_EQ(total, 37.0);
    }
}

TEST(Index, ScaledLeafIndex)
{
    EXPECT_EQ(encode_index(0, 64), 0.0);
    EXPECT_EQ(encode_index(63, 64), 1.0);
    // Equidistant neighbours: the index baseline carries no tree structure.
    const double a = encode_index(1, 64), b = encode_index(2, 64), c = encode_index(3, 64);
    EXPECT_NEAR(b - a, c - b, 1e-15);
    // IDF separates cousins (leaves 1, 2) from siblings (leaves 2, 3) at depth 3.
    const double i1 = idf_value(path_from_leaf_index(1, 3), 10);
    const double i2 = idf_value(path_from_leaf_index(2, 3), 10);
    const double i3 = idf_value(path_from_leaf_index(3, 3), 10);
    EXPECT_NE(i2 - i1, i3 - i2);
    EXPECT_THROW(encode_index(64, 64), std::invalid_argument);
}

TEST(Dimension, WorkedNumbers)
{
    EXPECT_EQ(feature_dimension(EncodingKind::IDF, 68, 10, 7), 680u);
    EXPECT_EQ(feature_dimension(EncodingKind::LBF, 68, 10, 7), 43520u);
    EXPECT_EQ(feature_dimension(EncodingKind::Index, 68, 10, 7), 680u);
    EXPECT_EQ(feature_dimension(EncodingKind::LBF, 68, 10, 7) / feature_dimension(EncodingKind::IDF, 68, 10, 7), 64u);
}

TEST(Dimension, FormulaProperty)
{
    for (std::size_t l : {1u, 5u, 68u})
        for (std::size_t t : {1u, 3u, 10u})
            for (std::uint32_t d = 2; d <= 9; ++d) {
                std::vector<std::uint32_t> leaves(l * t, 0);
                for (auto kind : {EncodingKind::IDF, EncodingKind::LBF, EncodingKind::Index}) {
                    const EncodedFeature f = LeafEncoder(kind, d, {}).encode(leaves);
                    EXPECT_EQ(f.dimension, feature_dimension(kind, l, t, d));
                    EXPECT_EQ(f.to_dense().size(), f.dimension);
                }
                EXPECT_EQ(feature_dimension(EncodingKind::LBF, l, t, d), l * t * (std::size_t{1} << (d - 1)));
            }
}

TEST(LeafEncoder, TableMatchesDirectPipeline)
{
    for (std::uint32_t depth = 2; depth <= 8; ++depth)
        for (auto mode : {IdfRangeMode::Conventional, IdfRangeMode::Achievable}) {
            const IdfParams p{10, mode};
            const LeafEncoder enc(EncodingKind::IDF, depth, p);
            for (std::size_t leaf = 0; leaf < DecisionTree::leaf_count_for(depth); ++leaf)
                EXPECT_EQ(enc.scalar(leaf),
                          normalize_idf(idf_value(path_from_leaf_index(leaf, depth), 10), idf_range(depth - 1, p)));
        }
}

TEST(BuildFeatureVector, SingleTreeMatchesStepByStepPipeline)
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> u(0, 255);
    Image img(20, 20, std::uint8_t{0});
    for (auto& p : img.pixels)
        p = static_cast<std::uint8_t>(u(rng));

    CascadeConfig config;
    config.set_stages(1);
    config.landmarks = 1;
    config.forest.trees = 1;
    config.forest.depth = 4;
    StageModel stage;
    Rng crng(1);
    stage.candidates = {sample_candidates(crng, 0.3, 10)};
    DecisionTree tree;
    tree.depth = 4;
    std::uniform_int_distribution<std::uint32_t> cand(0, 9);
    std::uniform_int_distribution<int> thr(-60, 60);
    for (int i = 0; i < 7; ++i) {
        std::uint32_t a = cand(rng), b = cand(rng);
        if (a == b)
            b = (a + 1) % 10;
        tree.nodes.push_back(SplitNode{{a, b}, thr(rng)});
    }
    tree.leaves.assign(8, Vec2{});
    stage.forests = {Forest{0, {tree}}};

    const Shape shape(std::vector<Vec2>{{10, 10}});
    const SimilarityTransform t{15.0, 0.4, {10, 10}};
    const EncodedFeature f = build_feature_vector(stage, config, img, shape, t, EncodingKind::IDF);
    ASSERT_EQ(f.dimension, 1u);

    const LeafPath path = route(tree, img, shape, t, stage.candidates[0], 0);
    const double expected = normalize_idf(idf_value(path, 10), idf_range(3, 10));
    EXPECT_EQ(f.values[0], expected);

    EXPECT_THROW(build_feature_vector(stage, config, img, shape, t, EncodingKind::LBF), std::invalid_argument);
    config.encoding = EncodingKind::LBF;
    const EncodedFeature g = build_feature_vector(stage, config, img, shape, t, EncodingKind::LBF);
    EXPECT_EQ(g.dimension, 8u);
    EXPECT_EQ(g.indices, (std::vector<std::uint32_t>{static_cast<std::uint32_t>(leaf_index_from_path(path))}));
}

TEST(EncodingKind, ParseNames)
{
    for (auto k : {EncodingKind::IDF, EncodingKind::LBF, EncodingKind::Index})
        EXPECT_EQ(parse_encoding(to_string(k)), k);
    EXPECT_THROW(parse_encoding("pca"), std::invalid_argument);
}
