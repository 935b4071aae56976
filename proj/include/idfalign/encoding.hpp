#pragma once

#include "idfalign/forest.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace idfalign {

enum class EncodingKind : std::uint32_t { IDF = 0, LBF = 1, Index = 2 };

inline std::string to_string(EncodingKind kind)
{
    switch (kind) {
    case EncodingKind::IDF: return "idf";
    case EncodingKind::LBF: return "lbf";
    case EncodingKind::Index: return "index";
    }
    return "unknown";
}

inline EncodingKind parse_encoding(const std::string& name)
{
    if (name == "idf" || name == "IDF")
        return EncodingKind::IDF;
    if (name == "lbf" || name == "LBF")
        return EncodingKind::LBF;
    if (name == "index" || name == "Index")
        return EncodingKind::Index;
    throw std::invalid_argument("unknown encoding '" + name + "'");
}

/// Which lower bound normalize_idf uses.
///   Conventional: k^(L-1), the lower bound of the textbook [100, 222] range.
///   Achievable:   the all-left path value, the smallest value a leaf can take.
enum class IdfRangeMode : std::uint32_t { Conventional = 0, Achievable = 1 };

/// Magnitude k per generation; sibling path values are fixed at 1 and 2.
struct IdfParams
{
    std::uint32_t k = 10;
    IdfRangeMode range_mode = IdfRangeMode::Conventional;

    static constexpr std::uint8_t kLeftValue = 1;
    static constexpr std::uint8_t kRightValue = 2;

    friend bool operator==(const IdfParams&, const IdfParams&) = default;
};

/// sum_i path[i] * k^(L-1-i): the root-adjacent choice is the most significant digit.
inline double idf_value(std::span<const std::uint8_t> path, std::uint32_t k)
{
    if (path.empty())
        throw std::invalid_argument("idf_value: empty path");
    if (k < 2)
        throw std::invalid_argument("idf_value: magnitude k must be at least 2");
    double value = 0.0;
    for (std::uint8_t v : path)
        value = value * static_cast<double>(k) + static_cast<double>(v);
    return value;
}

/// (k^(L-1), 2 (k^L - 1) / (k - 1)).
inline std::pair<double, double> idf_range(std::uint32_t levels, std::uint32_t k)
{
    if (levels < 1)
        throw std::invalid_argument("idf_range: need at least one level");
    if (k < 2)
        throw std::invalid_argument("idf_range: magnitude k must be at least 2");
    const double kd = static_cast<double>(k);
    const double top = std::pow(kd, static_cast<double>(levels));
    return {top / kd, 2.0 * (top - 1.0) / (kd - 1.0)};
}

inline std::pair<double, double> idf_range(std::uint32_t levels, const IdfParams& params)
{
    auto range = idf_range(levels, params.k);
    if (params.range_mode == IdfRangeMode::Achievable)
        range.first = range.second / 2.0; // all-1 path: (k^L - 1) / (k - 1)
    return range;
}

inline double normalize_idf(double value, std::pair<double, double> range)
{
    const auto [lo, hi] = range;
    if (!(hi > lo))
        throw std::invalid_argument("normalize_idf: empty range");
    if (value < lo || value > hi)
        throw std::invalid_argument("normalize_idf: value " + std::to_string(value) + " outside range");
    return (value - lo) / (hi - lo);
}

/// One-hot block of length leaves_per_tree.
inline std::vector<double> encode_lbf(std::size_t leaf_index, std::size_t leaves_per_tree)
{
    if (leaf_index >= leaves_per_tree)
        throw std::invalid_argument("encode_lbf: leaf index " + std::to_string(leaf_index) + " out of range");
    std::vector<double> block(leaves_per_tree, 0.0);
    block[leaf_index] = 1.0;
    return block;
}

/// Leaf index scaled to [0, 1].
inline double encode_index(std::size_t leaf_index, std::size_t leaves_per_tree)
{
    if (leaves_per_tree < 2)
        throw std::invalid_argument("encode_index: need at least two leaves");
    if (leaf_index >= leaves_per_tree)
        throw std::invalid_argument("encode_index: leaf index out of range");
    return static_cast<double>(leaf_index) / static_cast<double>(leaves_per_tree - 1);
}

/// Dimension of the global feature vector for l forests of t trees of depth d.
inline std::size_t feature_dimension(EncodingKind kind, std::size_t landmarks, std::size_t trees,
                                     std::uint32_t depth)
{
    const std::size_t per_tree = kind == EncodingKind::LBF ? DecisionTree::leaf_count_for(depth) : 1;
    return landmarks * trees * per_tree;
}

/// Global feature vector. Dense encodings (IDF, index) leave `indices`
/// empty; LBF stores only the active positions, whose values are all 1.
struct EncodedFeature
{
    EncodingKind kind = EncodingKind::IDF;
    std::size_t dimension = 0;
    std::vector<double> values;
    std::vector<std::uint32_t> indices;

    bool sparse() const { return !indices.empty(); }

    std::vector<double> to_dense() const
    {
        if (!sparse())
            return values;
        std::vector<double> out(dimension, 0.0);
        for (std::size_t i = 0; i < indices.size(); ++i)
            out[indices[i]] = values[i];
        return out;
    }
};

/// Per-tree lookup from leaf index to encoded scalar, so that encoding a
/// routed sample is a table read.
class LeafEncoder
{
public:
    LeafEncoder(EncodingKind kind, std::uint32_t depth, const IdfParams& idf) : kind_(kind), depth_(depth)
    {
        const std::size_t leaves = DecisionTree::leaf_count_for(depth);
        if (kind == EncodingKind::LBF)
            return;
        table_.resize(leaves);
        const auto range = idf_range(depth - 1, idf);
        for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
            if (kind == EncodingKind::IDF) {
                const LeafPath path = path_from_leaf_index(leaf, depth);
                table_[leaf] = normalize_idf(idf_value(path, idf.k), range);
            } else {
                table_[leaf] = encode_index(leaf, leaves);
            }
        }
    }

    EncodingKind kind() const { return kind_; }
    std::uint32_t depth() const { return depth_; }
    double scalar(std::size_t leaf) const { return table_[leaf]; }

    /// Builds the feature from one leaf index per tree, ordered by landmark then tree.
    EncodedFeature encode(std::span<const std::uint32_t> leaves) const
    {
        EncodedFeature f;
        f.kind = kind_;
        if (kind_ == EncodingKind::LBF) {
            const std::size_t block = DecisionTree::leaf_count_for(depth_);
            f.dimension = leaves.size() * block;
            f.indices.resize(leaves.size());
            f.values.assign(leaves.size(), 1.0);
            for (std::size_t b = 0; b < leaves.size(); ++b)
                f.indices[b] = static_cast<std::uint32_t>(b * block + leaves[b]);
        } else {
            f.dimension = leaves.size();
            f.values.resize(leaves.size());
            for (std::size_t b = 0; b < leaves.size(); ++b)
                f.values[b] = table_[leaves[b]];
        }
        return f;
    }

private:
    EncodingKind kind_;
    std::uint32_t depth_;
    std::vector<double> table_;
};

} // namespace idfalign
