#pragma once

#include "idfalign/geometry.hpp"
#include "idfalign/pixel_features.hpp"
#include "idfalign/random.hpp"

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

/// Internal node test: pixel_diff(pair) < threshold goes left.
struct SplitNode
{
    PixelPair pair{};
    std::int32_t threshold = 255;

    friend bool operator==(SplitNode, SplitNode) = default;
};

/// Complete binary regression tree stored in heap order. Node i has children
/// 2i+1 and 2i+2; leaf j sits at heap position internal_count() + j, so leaves
/// are numbered left to right.
struct DecisionTree
{
    std::uint32_t depth = 2;
    std::vector<SplitNode> nodes;
    std::vector<Vec2> leaves;

    static std::size_t leaf_count_for(std::uint32_t depth) { return std::size_t{1} << (depth - 1); }
    std::size_t leaf_count() const { return leaf_count_for(depth); }
    std::size_t internal_count() const { return leaf_count() - 1; }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct Forest
{
    std::uint32_t landmark_index = 0;
    std::vector<DecisionTree> trees;

    friend bool operator==(const Forest&, const Forest&) = default;
};

struct ForestTrainConfig
{
    std::uint32_t depth = 7;
    std::uint32_t trees = 11;
    std::uint32_t candidates_per_node = 50;
    std::uint32_t thresholds_per_candidate = 1;
    std::uint32_t min_samples_per_node = 2;
    double bagging_fraction = 0.8;

    void validate() const
    {
        if (depth < 2 || depth > 24)
            throw std::invalid_argument("tree depth must be in [2, 24]");
        if (trees == 0 || candidates_per_node == 0 || thresholds_per_candidate == 0 || min_samples_per_node == 0)
            throw std::invalid_argument("forest config counts must be positive");
        if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0))
            throw std::invalid_argument("bagging fraction must be in (0, 1]");
    }

    friend bool operator==(const ForestTrainConfig&, const ForestTrainConfig&) = default;
};

/// Anything that can report candidate intensities for a batch of samples.
template <typename S>
concept IntensitySource = requires(const S& s, std::size_t i) {
    { s.sample_count() } -> std::convertible_to<std::size_t>;
    { s.candidate_count() } -> std::convertible_to<std::size_t>;
    { s.intensity(i, i) } -> std::convertible_to<int>;
};

/// Computes intensities on demand from images; the reference view used by
/// tests and small problems. The cascade uses a precomputed IntensityTable.
struct PixelSampleView
{
    struct Sample
    {
        const Image* image = nullptr;
        const Shape* shape = nullptr;
        SimilarityTransform transform;
    };

    std::vector<Sample> samples;
    std::size_t landmark_index = 0;
    const CandidateSet* candidates = nullptr;

    std::size_t sample_count() const { return samples.size(); }
    std::size_t candidate_count() const { return candidates->size(); }
    int intensity(std::size_t i, std::size_t c) const
    {
        const Sample& s = samples[i];
        return candidate_intensity(*s.image, *s.shape, landmark_index, *candidates, c, s.transform);
    }
};

namespace detail {

struct MomentSums
{
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0;

    void add(Vec2 v)
    {
        n += 1;
        sx += v.x;
        sy += v.y;
        sxx += v.x * v.x;
        syy += v.y * v.y;
    }
    // n * trace(covariance), population convention.
    double scatter() const
    {
        if (n == 0)
            return 0.0;
        return std::max(0.0, (sxx - sx * sx / n) + (syy - sy * sy / n));
    }
};

} // namespace detail

/// Trace of the population covariance of a set of 2D targets; 0 when empty.
inline double target_variance(std::span<const Vec2> targets)
{
    if (targets.empty())
        return 0.0;
    detail::MomentSums m;
    for (Vec2 v : targets)
        m.add(v);
    return m.scatter() / m.n;
}

/// Size-weighted variance of a split:
/// |L|/(|L|+|R|) H(L) + |R|/(|L|+|R|) H(R).
inline double split_score(std::span<const Vec2> left, std::span<const Vec2> right)
{
    const double total = static_cast<double>(left.size() + right.size());
    if (total == 0)
        throw std::invalid_argument("split_score: both sides are empty");
    return (static_cast<double>(left.size()) * target_variance(left) +
            static_cast<double>(right.size()) * target_variance(right)) /
           total;
}

/// Record of the proposals examined at one internal node during training.
struct SplitTrace
{
    std::size_t node = 0;
    std::vector<std::size_t> samples;
    std::vector<SplitNode> proposals;
    std::vector<double> scores;
    /// Index into proposals, or -1 for a pass-through node.
    std::ptrdiff_t chosen = -1;
};

/// Root-to-leaf path with values 1 (left) and 2 (right).
using LeafPath = std::vector<std::uint8_t>;

inline std::size_t leaf_index_from_path(std::span<const std::uint8_t> path)
{
    std::size_t leaf = 0;
    for (std::uint8_t v : path)
        leaf = (leaf << 1) | (v == 2 ? 1u : 0u);
    return leaf;
}

inline LeafPath path_from_leaf_index(std::size_t leaf, std::uint32_t depth)
{
    LeafPath path(depth - 1);
    for (std::size_t i = 0; i < path.size(); ++i)
        path[path.size() - 1 - i] = ((leaf >> i) & 1u) ? 2 : 1;
    return path;
}

/// Leaf reached when each internal node evaluates `feature(pair)`.
template <typename FeatureFn>
std::size_t route_leaf(const DecisionTree& tree, FeatureFn&& feature)
{
    const std::size_t internal = tree.internal_count();
    std::size_t node = 0;
    while (node < internal) {
        const SplitNode& s = tree.nodes[node];
        node = 2 * node + (feature(s.pair) < s.threshold ? 1 : 2);
    }
    return node - internal;
}

template <typename FeatureFn>
LeafPath route_path(const DecisionTree& tree, FeatureFn&& feature)
{
    return path_from_leaf_index(route_leaf(tree, feature), tree.depth);
}

inline LeafPath route(const DecisionTree& tree, const Image& image, const Shape& shape,
                      const SimilarityTransform& transform, const CandidateSet& candidates,
                      std::size_t landmark_index)
{
    return route_path(tree, [&](PixelPair p) {
        return pixel_diff(image, shape, landmark_index, p, candidates, transform);
    });
}

inline Vec2 forest_predict(const Forest& forest, const Image& image, const Shape& shape,
                           const SimilarityTransform& transform, const CandidateSet& candidates)
{
    if (forest.trees.empty())
        throw std::invalid_argument("forest_predict: empty forest");
    Vec2 sum{};
    for (const DecisionTree& tree : forest.trees) {
        const std::size_t leaf = route_leaf(tree, [&](PixelPair p) {
            return pixel_diff(image, shape, forest.landmark_index, p, candidates, transform);
        });
        sum = sum + tree.leaves[leaf];
    }
    return (1.0 / static_cast<double>(forest.trees.size())) * sum;
}

/// Trains one complete tree on the residual targets of `source`'s samples.
template <IntensitySource Source, typename URBG>
DecisionTree train_tree(const Source& source, std::span<const Vec2> targets, const ForestTrainConfig& config,
                        URBG& rng, std::vector<SplitTrace>* trace = nullptr)
{
    config.validate();
    const std::size_t n = source.sample_count();
    if (n == 0)
        throw std::invalid_argument("train_tree: empty sample set");
    if (targets.size() != n)
        throw std::invalid_argument("train_tree: target count does not match sample count");
    const std::size_t cands = source.candidate_count();
    if (cands < 2)
        throw std::invalid_argument("train_tree: need at least two candidate pixels");

    DecisionTree tree;
    tree.depth = config.depth;
    tree.nodes.assign(tree.internal_count(), SplitNode{});
    tree.leaves.assign(tree.leaf_count(), Vec2{});

    std::vector<std::size_t> bag(n);
    std::iota(bag.begin(), bag.end(), std::size_t{0});
    if (config.bagging_fraction < 1.0) {
        const auto m = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(config.bagging_fraction * static_cast<double>(n))));
        for (std::size_t i = 0; i < m && i + 1 < n; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(bag[i], bag[pick(rng)]);
        }
        bag.resize(m);
        std::sort(bag.begin(), bag.end());
    }

    const std::size_t internal = tree.internal_count();
    std::vector<std::vector<std::size_t>> members(internal + tree.leaf_count());
    members[0] = std::move(bag);

    std::uniform_int_distribution<std::uint32_t> pick_first(0, static_cast<std::uint32_t>(cands - 1));
    std::uniform_int_distribution<std::uint32_t> pick_second(0, static_cast<std::uint32_t>(cands - 2));
    std::vector<int> features;
    const std::size_t min_samples = std::max<std::size_t>(2, config.min_samples_per_node);

    for (std::size_t node = 0; node < internal; ++node) {
        const std::vector<std::size_t>& here = members[node];
        SplitTrace local;
        local.node = node;
        if (trace)
            local.samples = here;

        std::ptrdiff_t best = -1;
        if (here.size() >= min_samples) {
            detail::MomentSums all;
            for (std::size_t s : here)
                all.add(targets[s]);
            const double total_score = all.scatter() / all.n;

            double best_score = 0.0;
            features.resize(here.size());
            for (std::uint32_t c = 0; c < config.candidates_per_node; ++c) {
                PixelPair pair;
                pair.first = pick_first(rng);
                pair.second = pick_second(rng);
                if (pair.second >= pair.first)
                    ++pair.second;
                int lo = 255, hi = -255;
                for (std::size_t k = 0; k < here.size(); ++k) {
                    features[k] = source.intensity(here[k], pair.first) - source.intensity(here[k], pair.second);
                    lo = std::min(lo, features[k]);
                    hi = std::max(hi, features[k]);
                }
                for (std::uint32_t t = 0; t < config.thresholds_per_candidate; ++t) {
                    std::uniform_int_distribution<int> pick_threshold(lo, hi);
                    const SplitNode proposal{pair, pick_threshold(rng)};
                    detail::MomentSums left, right;
                    for (std::size_t k = 0; k < here.size(); ++k)
                        (features[k] < proposal.threshold ? left : right).add(targets[here[k]]);
                    const double score = (left.scatter() + right.scatter()) / all.n;
                    local.proposals.push_back(proposal);
                    local.scores.push_back(score);
                    if (best < 0 || score < best_score) {
                        best = static_cast<std::ptrdiff_t>(local.proposals.size() - 1);
                        best_score = score;
                    }
                }
            }
            // Zero-gain splits are treated as degenerate.
            if (best >= 0 && !(best_score < total_score - 1e-12 * total_score))
                best = -1;
        }

        SplitNode chosen;
        if (best >= 0) {
            chosen = local.proposals[static_cast<std::size_t>(best)];
        } else {
            // Pass-through: a pair whose training differences never reach 255,
            // so every sample at this node goes left.
            chosen = {PixelPair{0, 1}, 255};
            for (std::uint32_t a = 0; a + 1 < cands; ++a) {
                const PixelPair p{a, a + 1};
                const bool ok = std::all_of(here.begin(), here.end(), [&](std::size_t s) {
                    return source.intensity(s, p.first) - source.intensity(s, p.second) < 255;
                });
                if (ok) {
                    chosen.pair = p;
                    break;
                }
            }
        }
        tree.nodes[node] = chosen;

        std::vector<std::size_t>& left = members[2 * node + 1];
        std::vector<std::size_t>& right = members[2 * node + 2];
        for (std::size_t s : here) {
            const int f = source.intensity(s, chosen.pair.first) - source.intensity(s, chosen.pair.second);
            (f < chosen.threshold ? left : right).push_back(s);
        }
        members[node].clear();
        members[node].shrink_to_fit();

        if (trace) {
            local.chosen = best;
            trace->push_back(std::move(local));
        }
    }

    for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        const std::vector<std::size_t>& here = members[internal + leaf];
        if (here.empty())
            continue;
        Vec2 sum{};
        for (std::size_t s : here)
            sum = sum + targets[s];
        tree.leaves[leaf] = (1.0 / static_cast<double>(here.size())) * sum;
    }
    return tree;
}

/// Trains `config.trees` trees for one landmark. Tree j draws from the stream
/// derived from (seed, stage, landmark, j), so results do not depend on the
/// order in which landmarks or trees are trained.
template <IntensitySource Source>
Forest train_forest(const Source& source, std::span<const Vec2> targets, const ForestTrainConfig& config,
                    std::uint64_t seed, std::uint32_t stage, std::uint32_t landmark)
{
    Forest forest;
    forest.landmark_index = landmark;
    forest.trees.reserve(config.trees);
    for (std::uint32_t t = 0; t < config.trees; ++t) {
        Rng rng = make_rng(seed, SeedTag::Tree, {stage, landmark, t});
        forest.trees.push_back(train_tree(source, targets, config, rng));
    }
    return forest;
}

} // namespace idfalign
