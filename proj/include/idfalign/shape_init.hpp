#pragma once

#include "idfalign/geometry.hpp"
#include "idfalign/random.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

struct ShapeCluster
{
    Shape centroid;
    std::vector<std::size_t> member_indices;
};

/// Representative starting shapes, in the normalized frame.
struct InitSet
{
    std::vector<Shape> shapes;
    std::vector<std::uint32_t> cluster_ids;
    /// Dataset index each shape was taken from.
    std::vector<std::uint32_t> source_indices;

    std::size_t size() const { return shapes.size(); }
};

namespace detail {

inline double squared_distance(const Shape& a, const Shape& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec2 v = a[i] - b[i];
        d += v.x * v.x + v.y * v.y;
    }
    return d;
}

inline Shape mean_of(std::span<const Shape> shapes, std::span<const std::size_t> members)
{
    Shape mean(shapes[members.front()].size());
    for (std::size_t m : members)
        for (std::size_t i = 0; i < mean.size(); ++i)
            mean[i] = mean[i] + shapes[m][i];
    const double inv = 1.0 / static_cast<double>(members.size());
    for (auto& p : mean.points)
        p = inv * p;
    return mean;
}

} // namespace detail

/// Lloyd's algorithm on flattened shape vectors with k-means++ seeding.
/// An empty cluster is reseeded with the point farthest from its own
/// centroid. When `objective_trace` is given, the within-cluster sum of
/// squares after every iteration is appended to it.
template <typename URBG>
std::vector<ShapeCluster> kmeans_shapes(std::span<const Shape> shapes, std::size_t k, std::size_t max_iters,
                                        URBG& rng, std::vector<double>* objective_trace = nullptr)
{
    if (k < 1)
        throw std::invalid_argument("kmeans_shapes: k must be at least 1");
    if (shapes.size() < k)
        throw std::invalid_argument("kmeans_shapes: " + std::to_string(shapes.size()) +
                                    " shapes cannot form " + std::to_string(k) + " clusters");
    const std::size_t n = shapes.size();
    for (const Shape& s : shapes)
        if (s.size() != shapes.front().size())
            throw std::invalid_argument("kmeans_shapes: landmark count mismatch");

    // k-means++ seeding.
    std::vector<Shape> centroids;
    centroids.reserve(k);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centroids.push_back(shapes[first(rng)]);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], detail::squared_distance(shapes[i], centroids.back()));
            total += nearest[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            double target = unit(rng) * total;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0 && nearest[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        centroids.push_back(shapes[chosen]);
    }

    std::vector<std::size_t> assignment(n, k);
    std::vector<double> dist(n, 0.0);
    for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iters); ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = detail::squared_distance(shapes[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
            dist[i] = best_d;
        }

        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t i = 0; i < n; ++i)
            members[assignment[i]].push_back(i);
        for (std::size_t c = 0; c < k; ++c) {
            if (!members[c].empty())
                continue;
            // Farthest point from its centroid, among clusters that can spare one.
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (members[assignment[i]].size() > 1 && (far == n || dist[i] > dist[far]))
                    far = i;
            auto& donor = members[assignment[far]];
            donor.erase(std::find(donor.begin(), donor.end(), far));
            assignment[far] = c;
            dist[far] = 0.0;
            members[c].push_back(far);
            changed = true;
        }
        for (std::size_t c = 0; c < k; ++c)
            centroids[c] = detail::mean_of(shapes, members[c]);

        if (objective_trace) {
            double obj = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                obj += detail::squared_distance(shapes[i], centroids[assignment[i]]);
            objective_trace->push_back(obj);
        }
        if (!changed)
            break;
    }

    std::vector<ShapeCluster> clusters(k);
    for (std::size_t c = 0; c < k; ++c)
        clusters[c].centroid = centroids[c];
    for (std::size_t i = 0; i < n; ++i)
        clusters[assignment[i]].member_indices.push_back(i);
    return clusters;
}

/// Per-cluster quotas proportional to cluster size (largest remainder, at
/// least one each, never more than the cluster holds).
inline std::vector<std::size_t> cluster_quotas(std::span<const ShapeCluster> clusters, std::size_t count)
{
    const std::size_t k = clusters.size();
    if (count < k)
        throw std::invalid_argument("select_initializations: count " + std::to_string(count) +
                                    " is smaller than the cluster count " + std::to_string(k));
    std::size_t total_members = 0;
    for (const auto& c : clusters) {
        if (c.member_indices.empty())
            throw std::invalid_argument("select_initializations: empty cluster");
        total_members += c.member_indices.size();
    }
    if (count > total_members)
        throw std::invalid_argument("select_initializations: count exceeds the number of shapes");

    std::vector<std::size_t> quota(k);
    std::vector<double> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double ideal = static_cast<double>(count) * static_cast<double>(clusters[c].member_indices.size()) /
                             static_cast<double>(total_members);
        quota[c] = std::clamp<std::size_t>(static_cast<std::size_t>(ideal), 1, clusters[c].member_indices.size());
        remainder[c] = ideal - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    while (assigned < count) {
        for (std::size_t c : order) {
            if (assigned == count)
                break;
            if (quota[c] < clusters[c].member_indices.size()) {
                ++quota[c];
                ++assigned;
            }
        }
    }
    while (assigned > count) {
        for (auto it = order.rbegin(); it != order.rend() && assigned > count; ++it) {
            if (quota[*it] > 1) {
                --quota[*it];
                --assigned;
            }
        }
    }
    return quota;
}

/// Picks `count` exemplars: within each cluster, the members nearest to the
/// centroid (ties by dataset index), with quotas from cluster_quotas.
inline InitSet select_initializations(std::span<const ShapeCluster> clusters, std::span<const Shape> shapes,
                                      std::size_t count)
{
    const std::vector<std::size_t> quota = cluster_quotas(clusters, count);
    InitSet out;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t m : clusters[c].member_indices) {
            if (m >= shapes.size())
                throw std::invalid_argument("select_initializations: member index out of range");
            ranked.emplace_back(detail::squared_distance(shapes[m], clusters[c].centroid), m);
        }
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t j = 0; j < quota[c]; ++j) {
            out.shapes.push_back(shapes[ranked[j].second]);
            out.cluster_ids.push_back(static_cast<std::uint32_t>(c));
            out.source_indices.push_back(static_cast<std::uint32_t>(ranked[j].second));
        }
    }
    return out;
}

struct InitConfig
{
    std::size_t clusters = 7;
    std::size_t count = 50;
    std::size_t max_iters = 100;
};

/// Clusters normalized shapes and selects exemplars. Cluster and exemplar
/// counts are capped at the number of shapes available.
inline InitSet build_init_set(std::span<const Shape> normalized_shapes, const InitConfig& config, std::uint64_t seed)
{
    if (normalized_shapes.empty())
        throw std::invalid_argument("build_init_set: no shapes");
    const std::size_t k = std::min(config.clusters, normalized_shapes.size());
    const std::size_t count = std::max(k, std::min(config.count, normalized_shapes.size()));
    Rng rng = make_rng(seed, SeedTag::KMeans);
    const auto clusters = kmeans_shapes(normalized_shapes, k, config.max_iters, rng);
    return select_initializations(clusters, normalized_shapes, count);
}

} // namespace idfalign
