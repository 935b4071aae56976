#pragma once

#include "idfalign/dataset.hpp"
#include "idfalign/encoding.hpp"
#include "idfalign/forest.hpp"
#include "idfalign/geometry.hpp"
#include "idfalign/parallel.hpp"
#include "idfalign/pixel_features.hpp"
#include "idfalign/random.hpp"
#include "idfalign/shape_init.hpp"
#include "idfalign/solver.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

struct CascadeConfig
{
    std::uint32_t stages = 7;
    std::uint32_t landmarks = 68;
    ForestTrainConfig forest{};
    IdfParams idf{};
    EncodingKind encoding = EncodingKind::IDF;
    RadiusSchedule radii = RadiusSchedule::standard(7);
    double ridge_lambda = 1.0;
    std::uint32_t candidates = kDefaultCandidateCount;
    /// Training instances per sample: the mean shape plus (n - 1) exemplars.
    std::uint32_t train_inits_per_sample = 5;
    std::uint64_t seed = 0;
    /// Metric used for the recorded per-stage training error.
    NormalizationKind error_norm = NormalizationKind::BoxDiagonal;

    /// Sets the stage count and the matching standard radius schedule.
    void set_stages(std::uint32_t t)
    {
        stages = t;
        radii = RadiusSchedule::standard(t);
    }

    void validate() const
    {
        if (landmarks == 0)
            throw std::invalid_argument("cascade config: landmark count must be positive");
        if (radii.size() != stages)
            throw std::invalid_argument("cascade config: radius schedule has " + std::to_string(radii.size()) +
                                        " entries for " + std::to_string(stages) + " stages");
        forest.validate();
        if (idf.k < 2)
            throw std::invalid_argument("cascade config: IDF magnitude k must be at least 2");
        if (candidates < 2)
            throw std::invalid_argument("cascade config: need at least two candidate pixels");
        if (train_inits_per_sample == 0)
            throw std::invalid_argument("cascade config: train_inits_per_sample must be positive");
        if (!(ridge_lambda >= 0.0))
            throw std::invalid_argument("cascade config: ridge lambda must be non-negative");
    }

    friend bool operator==(const CascadeConfig&, const CascadeConfig&) = default;
};

struct StageModel
{
    std::vector<CandidateSet> candidates; // one per landmark
    std::vector<Forest> forests;          // one per landmark
    LinearModel regressor;                // Phi -> normalized 2l-vector increment
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct CascadeModel
{
    CascadeConfig config;
    Shape mean_shape; // normalized frame
    InitSet init;
    std::vector<StageModel> stages;
    std::uint32_t format_version = kModelFormatVersion;

    /// Throws when the model is not internally consistent.
    void validate() const
    {
        config.validate();
        const std::size_t l = config.landmarks;
        if (mean_shape.size() != l || !mean_shape.all_finite())
            throw std::runtime_error("model: mean shape does not match landmark count");
        if (stages.size() != config.stages)
            throw std::runtime_error("model: stage count mismatch");
        const auto dim = static_cast<Eigen::Index>(
            feature_dimension(config.encoding, l, config.forest.trees, config.forest.depth));
        for (const StageModel& s : stages) {
            if (s.candidates.size() != l || s.forests.size() != l)
                throw std::runtime_error("model: stage does not cover every landmark");
            for (std::size_t j = 0; j < l; ++j) {
                if (s.candidates[j].size() < 2)
                    throw std::runtime_error("model: candidate set too small");
                if (s.forests[j].trees.size() != config.forest.trees)
                    throw std::runtime_error("model: tree count mismatch");
                for (const DecisionTree& t : s.forests[j].trees) {
                    if (t.depth != config.forest.depth || t.nodes.size() != t.internal_count() ||
                        t.leaves.size() != t.leaf_count())
                        throw std::runtime_error("model: malformed tree");
                    for (const SplitNode& n : t.nodes)
                        if (n.pair.first >= s.candidates[j].size() || n.pair.second >= s.candidates[j].size())
                            throw std::runtime_error("model: split references a missing candidate");
                }
            }
            if (s.regressor.feature_dim() != dim || s.regressor.target_dim() != static_cast<Eigen::Index>(2 * l) ||
                s.regressor.bias.size() != static_cast<Eigen::Index>(2 * l))
                throw std::runtime_error("model: regressor dimensions do not match the encoding");
        }
        for (const Shape& s : init.shapes)
            if (s.size() != l)
                throw std::runtime_error("model: initialization shape has wrong landmark count");
    }
};

// ---------------------------------------------------------------------------
// Shared per-stage arithmetic. Training and fitting both go through these,
// which is what makes a trained stage reproduce bit-exactly at fit time.

/// Similarity carrying the mean-shape normalized frame onto the current estimate.
inline SimilarityTransform pose_transform(const Shape& mean_shape, const Shape& current)
{
    return estimate_similarity(mean_shape, current);
}

/// current += transform(delta), with delta laid out (x0, y0, x1, y1, ...).
inline void apply_increment(Shape& current, const SimilarityTransform& transform, std::span<const double> delta)
{
    for (std::size_t i = 0; i < current.size(); ++i)
        current[i] = current[i] + transform.apply_vector({delta[2 * i], delta[2 * i + 1]});
}

/// Leaf reached in every tree, ordered landmark-major then tree.
inline void route_all(const StageModel& stage, const Image& image, const Shape& shape,
                      const SimilarityTransform& transform, std::span<std::uint32_t> leaves)
{
    const ScaledRotation map = transform.linear();
    std::size_t slot = 0;
    for (std::size_t j = 0; j < stage.forests.size(); ++j) {
        const CandidateSet& cands = stage.candidates[j];
        for (const DecisionTree& tree : stage.forests[j].trees) {
            leaves[slot++] = static_cast<std::uint32_t>(route_leaf(tree, [&](PixelPair p) {
                return pixel_diff(image, shape, j, p, cands, map);
            }));
        }
    }
}

/// Global feature vector for one stage: per landmark, per tree, one
/// normalized IDF scalar, one LBF one-hot block, or one scaled leaf index.
inline EncodedFeature build_feature_vector(const StageModel& stage, const CascadeConfig& config, const Image& image,
                                           const Shape& shape, const SimilarityTransform& transform,
                                           EncodingKind kind)
{
    if (kind != config.encoding)
        throw std::invalid_argument("build_feature_vector: model was trained with " + to_string(config.encoding) +
                                    " encoding, not " + to_string(kind));
    if (stage.forests.size() != shape.size())
        throw std::invalid_argument("build_feature_vector: landmark count mismatch");
    std::vector<std::uint32_t> leaves(stage.forests.size() * config.forest.trees);
    route_all(stage, image, shape, transform, leaves);
    return LeafEncoder(kind, config.forest.depth, config.idf).encode(leaves);
}

/// One cascade step at fit time.
inline void apply_stage(const StageModel& stage, const CascadeConfig& config, const LeafEncoder& encoder,
                        const Shape& mean_shape, const Image& image, Shape& current,
                        std::vector<std::uint32_t>& leaves)
{
    const SimilarityTransform t = pose_transform(mean_shape, current);
    leaves.resize(stage.forests.size() * config.forest.trees);
    route_all(stage, image, current, t, leaves);
    const std::vector<double> delta = predict(stage.regressor, encoder.encode(leaves));
    apply_increment(current, t, delta);
}

// ---------------------------------------------------------------------------
// Training

struct TrainingInstance
{
    std::size_t sample = 0;
    Shape current; // image frame
};

/// Instance 0 of each sample starts from the mean shape; the rest start from
/// exemplars drawn from `init` (skipping the sample's own shape when possible),
/// all placed into the sample's box.
inline std::vector<TrainingInstance> make_training_instances(std::span<const AnnotatedSample> dataset,
                                                              const InitSet& init, const Shape& mean_shape,
                                                              const CascadeConfig& config)
{
    std::vector<TrainingInstance> out;
    out.reserve(dataset.size() * config.train_inits_per_sample);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out.push_back({i, denormalize_from_box(mean_shape, dataset[i].box)});
        if (config.train_inits_per_sample <= 1 || init.size() == 0)
            continue;
        std::vector<std::size_t> pool;
        for (std::size_t k = 0; k < init.size(); ++k)
            if (k >= init.source_indices.size() || init.source_indices[k] != i)
                pool.push_back(k);
        if (pool.empty())
            for (std::size_t k = 0; k < init.size(); ++k)
                pool.push_back(k);
        Rng rng = make_rng(config.seed, SeedTag::Instances, {i});
        // Distinct picks while the pool allows it, then cycle.
        for (std::size_t r = 0; r + 1 < config.train_inits_per_sample; ++r) {
            const std::size_t slot = r % pool.size();
            if (r < pool.size()) {
                std::uniform_int_distribution<std::size_t> pick(slot, pool.size() - 1);
                std::swap(pool[slot], pool[pick(rng)]);
            }
            out.push_back({i, denormalize_from_box(init.shapes[pool[slot]], dataset[i].box)});
        }
    }
    return out;
}

inline double mean_instance_error(std::span<const AnnotatedSample> dataset, std::span<const TrainingInstance> instances,
                                  NormalizationKind norm)
{
    double total = 0.0;
    for (const TrainingInstance& inst : instances)
        total += alignment_error(inst.current, dataset[inst.sample].truth, norm);
    return instances.empty() ? 0.0 : total / static_cast<double>(instances.size());
}

/// Trains stage `stage_index` on the current instance shapes and advances
/// every instance by the stage's prediction.
inline StageModel train_stage(std::span<const AnnotatedSample> dataset, std::span<TrainingInstance> instances,
                              const Shape& mean_shape, const CascadeConfig& config, std::uint32_t stage_index,
                              const ExecutionOptions& exec = {})
{
    config.validate();
    const std::size_t n = instances.size();
    const std::size_t l = config.landmarks;
    const std::size_t trees = config.forest.trees;
    if (n == 0)
        throw std::invalid_argument("train_stage: no training instances");

    // Pose of each instance and its residual in the mean-shape frame.
    std::vector<SimilarityTransform> poses(n);
    Matrix targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * l));
    parallel_for(n, exec, [&](std::size_t i) {
        const TrainingInstance& inst = instances[i];
        poses[i] = pose_transform(mean_shape, inst.current);
        const SimilarityTransform back = poses[i].inverse();
        const Shape& truth = dataset[inst.sample].truth;
        for (std::size_t j = 0; j < l; ++j) {
            const Vec2 r = back.apply_vector(truth[j] - inst.current[j]);
            targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j)) = r.x;
            targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j + 1)) = r.y;
        }
    });

    StageModel stage;
    stage.candidates.resize(l);
    stage.forests.resize(l);
    std::vector<std::uint32_t> leaves(n * l * trees);

    parallel_for(l, exec, [&](std::size_t j) {
        Rng crng = make_rng(config.seed, SeedTag::Candidates, {stage_index, j});
        CandidateSet cands = sample_candidates(crng, config.radii[stage_index], config.candidates);
        cands.landmark_index = static_cast<std::uint32_t>(j);
        cands.stage_index = stage_index;

        IntensityTable table(n, cands.size());
        std::vector<Vec2> residuals(n);
        for (std::size_t i = 0; i < n; ++i) {
            const TrainingInstance& inst = instances[i];
            table.fill_row(i, *dataset[inst.sample].image, inst.current, j, cands, poses[i]);
            residuals[i] = {targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j)),
                            targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j + 1))};
        }
        Forest forest = train_forest(table, residuals, config.forest, config.seed, stage_index,
                                     static_cast<std::uint32_t>(j));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < trees; ++t)
                leaves[(i * l + j) * trees + t] = static_cast<std::uint32_t>(route_leaf(
                    forest.trees[t], [&](PixelPair p) { return table.intensity(i, p.first) - table.intensity(i, p.second); }));
        stage.candidates[j] = std::move(cands);
        stage.forests[j] = std::move(forest);
    });

    const LeafEncoder encoder(config.encoding, config.forest.depth, config.idf);
    std::vector<EncodedFeature> features(n);
    for (std::size_t i = 0; i < n; ++i)
        features[i] = encoder.encode(std::span<const std::uint32_t>(leaves).subspan(i * l * trees, l * trees));

    const RidgeConfig ridge{config.ridge_lambda};
    const std::size_t dim = feature_dimension(config.encoding, l, trees, config.forest.depth);
    if (config.encoding == EncodingKind::LBF) {
        std::vector<Eigen::Triplet<double>> nz;
        nz.reserve(n * l * trees);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < features[i].indices.size(); ++a)
                nz.emplace_back(static_cast<int>(i), static_cast<int>(features[i].indices[a]), features[i].values[a]);
        SparseMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
        x.setFromTriplets(nz.begin(), nz.end());
        stage.regressor = fit_ridge(x, targets, ridge);
    } else {
        Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < dim; ++c)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = features[i].values[c];
        stage.regressor = fit_ridge(x, targets, ridge);
    }

    parallel_for(n, exec, [&](std::size_t i) {
        const std::vector<double> delta = predict(stage.regressor, features[i]);
        apply_increment(instances[i].current, poses[i], delta);
    });
    return stage;
}

struct TrainResult
{
    CascadeModel model;
    /// Mean training error before any stage (index 0) and after each stage.
    std::vector<double> stage_errors;
};

inline void validate_dataset(std::span<const AnnotatedSample> dataset, std::size_t landmarks)
{
    if (dataset.empty())
        throw std::invalid_argument("empty training dataset");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const AnnotatedSample& s = dataset[i];
        if (!s.image || s.image->empty())
            throw std::invalid_argument("sample " + std::to_string(i) + " has no image");
        if (s.truth.size() != landmarks)
            throw std::invalid_argument("sample " + std::to_string(i) + " has " + std::to_string(s.truth.size()) +
                                        " landmarks, expected " + std::to_string(landmarks));
        if (!s.truth.all_finite())
            throw std::invalid_argument("sample " + std::to_string(i) + " has non-finite landmarks");
        if (!s.box.valid())
            throw std::invalid_argument("sample " + std::to_string(i) + " has a degenerate bounding box");
    }
}

inline Shape dataset_mean_shape(std::span<const AnnotatedSample> dataset)
{
    std::vector<Shape> shapes;
    std::vector<BoundingBox> boxes;
    for (const auto& s : dataset) {
        shapes.push_back(s.truth);
        boxes.push_back(s.box);
    }
    return compute_mean_shape(shapes, boxes);
}

inline std::vector<Shape> normalized_truths(std::span<const AnnotatedSample> dataset)
{
    std::vector<Shape> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset)
        out.push_back(normalize_to_box(s.truth, s.box));
    return out;
}

inline TrainResult train_cascade(std::span<const AnnotatedSample> dataset, const InitSet& init,
                                 const CascadeConfig& config, const ExecutionOptions& exec = {})
{
    config.validate();
    validate_dataset(dataset, config.landmarks);
    for (const Shape& s : init.shapes)
        if (s.size() != config.landmarks)
            throw std::invalid_argument("initialization shape has the wrong landmark count");

    TrainResult result;
    CascadeModel& model = result.model;
    model.config = config;
    model.mean_shape = dataset_mean_shape(dataset);
    model.init = init;

    std::vector<TrainingInstance> instances = make_training_instances(dataset, init, model.mean_shape, config);
    result.stage_errors.push_back(mean_instance_error(dataset, instances, config.error_norm));
    for (std::uint32_t t = 0; t < config.stages; ++t) {
        model.stages.push_back(train_stage(dataset, instances, model.mean_shape, config, t, exec));
        result.stage_errors.push_back(mean_instance_error(dataset, instances, config.error_norm));
    }
    return result;
}

/// Convenience: k-means exemplars from the dataset, then train_cascade.
inline TrainResult train_cascade(std::span<const AnnotatedSample> dataset, const CascadeConfig& config,
                                 const InitConfig& init_config = {}, const ExecutionOptions& exec = {})
{
    validate_dataset(dataset, config.landmarks);
    const InitSet init = build_init_set(normalized_truths(dataset), init_config, config.seed);
    return train_cascade(dataset, init, config, exec);
}

// ---------------------------------------------------------------------------
// Fitting

/// Shapes after 0, 1, ..., min(stage_limit, T) stages, starting from `initial`.
inline std::vector<Shape> fit_trajectory(const CascadeModel& model, const Image& image, const Shape& initial,
                                         std::size_t stage_limit = static_cast<std::size_t>(-1))
{
    const LeafEncoder encoder(model.config.encoding, model.config.forest.depth, model.config.idf);
    std::vector<Shape> out;
    out.push_back(initial);
    Shape current = initial;
    std::vector<std::uint32_t> leaves;
    const std::size_t last = std::min(stage_limit, model.stages.size());
    for (std::size_t t = 0; t < last; ++t) {
        apply_stage(model.stages[t], model.config, encoder, model.mean_shape, image, current, leaves);
        out.push_back(current);
    }
    return out;
}

inline Shape fit_from(const CascadeModel& model, const Image& image, const Shape& initial,
                      std::size_t stage_limit = static_cast<std::size_t>(-1))
{
    const LeafEncoder encoder(model.config.encoding, model.config.forest.depth, model.config.idf);
    Shape current = initial;
    std::vector<std::uint32_t> leaves;
    const std::size_t last = std::min(stage_limit, model.stages.size());
    for (std::size_t t = 0; t < last; ++t)
        apply_stage(model.stages[t], model.config, encoder, model.mean_shape, image, current, leaves);
    return current;
}

inline Shape coordinate_median(std::span<const Shape> shapes)
{
    Shape out(shapes.front().size());
    std::vector<double> xs(shapes.size()), ys(shapes.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t s = 0; s < shapes.size(); ++s) {
            xs[s] = shapes[s][i].x;
            ys[s] = shapes[s][i].y;
        }
        std::sort(xs.begin(), xs.end());
        std::sort(ys.begin(), ys.end());
        const std::size_t m = xs.size() / 2;
        if (xs.size() % 2 == 1)
            out[i] = {xs[m], ys[m]};
        else
            out[i] = {0.5 * (xs[m - 1] + xs[m]), 0.5 * (ys[m - 1] + ys[m])};
    }
    return out;
}

/// Runs the cascade from the mean shape placed in `box`. With multi_init,
/// runs from every stored initialization shape and returns the
/// coordinate-wise median.
inline Shape fit(const CascadeModel& model, const Image& image, const BoundingBox& box, bool multi_init = false,
                 std::size_t stage_limit = static_cast<std::size_t>(-1))
{
    if (model.mean_shape.size() != model.config.landmarks || model.stages.size() != model.config.stages)
        throw std::runtime_error("fit: model is untrained or corrupt");
    if (!box.valid())
        throw std::invalid_argument("fit: degenerate bounding box");
    if (!multi_init || model.init.size() == 0)
        return fit_from(model, image, denormalize_from_box(model.mean_shape, box), stage_limit);
    std::vector<Shape> runs;
    runs.reserve(model.init.size());
    for (const Shape& s : model.init.shapes)
        runs.push_back(fit_from(model, image, denormalize_from_box(s, box), stage_limit));
    return coordinate_median(runs);
}

// ---------------------------------------------------------------------------
// Size accounting

struct DimensionReport
{
    std::size_t feature_dim = 0;
    /// Regression weights over all stages, excluding biases.
    std::size_t linear_weight_count = 0;
    std::size_t linear_parameter_count = 0; // weights + biases
    std::size_t forest_node_count = 0;      // internal nodes + leaves over all stages
    std::size_t parameter_count = 0;
    std::size_t estimated_bytes = 0; // exact serialized size
};

/// Serialized size of the config block, in bytes.
inline std::size_t config_block_bytes(const CascadeConfig& c)
{
    // 12 u32 fields + 2 f64 + u64 seed + u32 norm + u32 radius count + radii
    return 12 * 4 + 2 * 8 + 8 + 4 + 4 + 8 * c.radii.size();
}

inline DimensionReport report_dimensions(const CascadeConfig& config, std::size_t init_shape_count = 0)
{
    const std::size_t l = config.landmarks;
    const std::size_t t = config.forest.trees;
    const std::size_t leaves = DecisionTree::leaf_count_for(config.forest.depth);
    const std::size_t internal = leaves - 1;
    const std::size_t T = config.stages;
    const std::size_t q = 2 * l;

    DimensionReport r;
    r.feature_dim = feature_dimension(config.encoding, l, t, config.forest.depth);
    r.linear_weight_count = T * r.feature_dim * q;
    r.linear_parameter_count = T * (r.feature_dim + 1) * q;
    r.forest_node_count = T * l * t * (internal + leaves);
    r.parameter_count = r.linear_parameter_count + r.forest_node_count;

    std::size_t bytes = 4 + 4 + config_block_bytes(config);
    bytes += 4 + 16 * l;                              // mean shape
    bytes += 4 + init_shape_count * (8 + 16 * l);     // init shapes
    const std::size_t per_tree = internal * 12 + leaves * 16;
    const std::size_t per_landmark = 4 + 8 + 4 + 16 * config.candidates + t * per_tree;
    const std::size_t linear = 8 + 8 * r.feature_dim * q + 8 * q;
    bytes += T * (l * per_landmark + linear);
    r.estimated_bytes = bytes;
    return r;
}

} // namespace idfalign
