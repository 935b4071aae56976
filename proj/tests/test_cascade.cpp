#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace idfalign;

namespace {

std::vector<AnnotatedSample> synth(std::size_t n, std::size_t landmarks, std::uint64_t seed, std::size_t offset = 0)
{
    SyntheticConfig c;
    c.samples = n;
    c.landmark_count = landmarks;
    c.seed = seed;
    std::vector<AnnotatedSample> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(generate_synthetic_sample(c, offset + i));
    return out;
}

CascadeConfig small_config(EncodingKind kind = EncodingKind::IDF, std::uint32_t stages = 3)
{
    CascadeConfig c;
    c.set_stages(stages);
    c.landmarks = 12;
    c.forest.trees = 3;
    c.forest.depth = 4;
    c.forest.candidates_per_node = 20;
    c.candidates = 40;
    c.train_inits_per_sample = 2;
    c.encoding = kind;
    c.seed = 11;
    return c;
}

const InitConfig kInit{3, 10, 50};

struct Trained
{
    std::vector<AnnotatedSample> data;
    TrainResult result;
};

const Trained& trained(EncodingKind kind)
{
    static std::map<EncodingKind, Trained> cache;
    auto it = cache.find(kind);
    if (it == cache.end()) {
        Trained t;
        t.data = synth(40, 12, 3);
        t.result = train_cascade(t.data, small_config(kind), kInit, ExecutionOptions{1});
        it = cache.emplace(kind, std::move(t)).first;
    }
    return it->second;
}

/// Copy of `img` shifted by (dx, dy) on a larger canvas; the border repeats
/// edge pixels so clamped reads agree with the original.
Image shift_image(const Image& img, int dx, int dy, int pad)
{
    Image out(img.width + 2 * pad, img.height + 2 * pad, std::uint8_t{0});
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const int sx = std::clamp(x - dx, 0, img.width - 1);
            const int sy = std::clamp(y - dy, 0, img.height - 1);
            out.pixels[static_cast<std::size_t>(y) * out.width + x] = img.at(sx, sy);
        }
    return out;
}

} // namespace

TEST(TrainCascade, ZeroResidualsGiveZeroIncrements)
{
    SyntheticConfig c;
    c.samples = 12;
    c.landmark_count = 12;
    c.scale_jitter = c.rotation_jitter = c.translation_jitter = 0;
    c.landmark_noise = 0;
    auto data = generate_synthetic(c);
    // Every truth is the mean shape, so each mean-shape start has nothing left to correct.
    CascadeConfig config = small_config();
    config.train_inits_per_sample = 1;
    const TrainResult r = train_cascade(data, config, kInit);
    for (double e : r.stage_errors)
        EXPECT_LT(e, 1e-12);
    for (const StageModel& s : r.model.stages) {
        EXPECT_LT(s.regressor.weights.cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(s.regressor.bias.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(TrainCascade, TrainingErrorNonIncreasing)
{
    for (auto kind : {EncodingKind::IDF, EncodingKind::LBF}) {
        const auto& errors = trained(kind).result.stage_errors;
        ASSERT_EQ(errors.size(), 4u);
        for (std::size_t t = 1; t < errors.size(); ++t) {
            EXPECT_TRUE(std::isfinite(errors[t]));
            EXPECT_LE(errors[t], errors[t - 1]) << to_string(kind) << " stage " << t;
        }
        EXPECT_LT(errors.back(), errors.front());
    }
}

TEST(TrainCascade, ModelStructureMatchesConfig)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    EXPECT_NO_THROW(m.validate());
    ASSERT_EQ(m.stages.size(), 3u);
    for (std::size_t t = 0; t < 3; ++t) {
        const StageModel& s = m.stages[t];
        ASSERT_EQ(s.forests.size(), 12u);
        for (std::size_t j = 0; j < 12; ++j) {
            EXPECT_EQ(s.candidates[j].size(), 40u);
            EXPECT_EQ(s.candidates[j].radius, m.config.radii[t]);
            for (PixelOffset o : s.candidates[j].offsets)
                EXPECT_LE(o.dx * o.dx + o.dy * o.dy, m.config.radii[t] * m.config.radii[t] + 1e-12);
            ASSERT_EQ(s.forests[j].trees.size(), 3u);
            for (const DecisionTree& tree : s.forests[j].trees)
                EXPECT_EQ(tree.depth, 4u);
        }
        EXPECT_EQ(s.regressor.feature_dim(), 36);
        EXPECT_EQ(s.regressor.target_dim(), 24);
    }
    EXPECT_EQ(m.init.size(), 10u);
}

TEST(TrainCascade, TwoStagesEqualComposedSingleStages)
{
    const auto data = synth(30, 12, 5);
    CascadeConfig config = small_config(EncodingKind::IDF, 2);
    const InitSet init = build_init_set(normalized_truths(data), kInit, config.seed);
    const TrainResult full = train_cascade(data, init, config);

    const Shape mean = dataset_mean_shape(data);
    auto instances = make_training_instances(data, init, mean, config);
    const auto starts = instances;
    CascadeModel manual;
    manual.config = config;
    manual.mean_shape = mean;
    manual.init = init;
    manual.stages.push_back(train_stage(data, instances, mean, config, 0));
    // Instances advanced by training match fitting with the one-stage prefix.
    CascadeModel prefix = manual;
    prefix.config.set_stages(1);
    for (std::size_t i = 0; i < instances.size(); ++i)
        ASSERT_EQ(fit_from(prefix, *data[starts[i].sample].image, starts[i].current), instances[i].current);
    manual.stages.push_back(train_stage(data, instances, mean, config, 1));

    EXPECT_EQ(serialize_model(manual), serialize_model(full.model));
    EXPECT_EQ(mean_instance_error(data, instances, config.error_norm), full.stage_errors.back());
}

TEST(TrainCascade, DeterministicAndThreadCountIndependent)
{
    const auto data = synth(30, 12, 7);
    const CascadeConfig config = small_config(EncodingKind::LBF, 2);
    const auto a = train_cascade(data, config, kInit, ExecutionOptions{1});
    const auto b = train_cascade(data, config, kInit, ExecutionOptions{1});
    const auto c = train_cascade(data, config, kInit, ExecutionOptions{4});
    EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
    EXPECT_EQ(serialize_model(a.model), serialize_model(c.model));
    EXPECT_EQ(a.stage_errors, c.stage_errors);
    CascadeConfig other = config;
    other.seed = 12;
    EXPECT_NE(serialize_model(train_cascade(data, other, kInit).model), serialize_model(a.model));
}

TEST(TrainCascade, Errors)
{
    auto data = synth(6, 12, 1);
    const CascadeConfig config = small_config();
    EXPECT_THROW(train_cascade(std::vector<AnnotatedSample>{}, config, kInit), std::invalid_argument);
    EXPECT_THROW(train_cascade(synth(6, 10, 1), config, kInit), std::invalid_argument);
    auto bad_box = data;
    bad_box[2].box.width = 0;
    EXPECT_THROW(train_cascade(bad_box, config, kInit), std::invalid_argument);
    auto nan_truth = data;
    nan_truth[1].truth[0].x = std::nan("");
    EXPECT_THROW(train_cascade(nan_truth, config, kInit), std::invalid_argument);
    CascadeConfig mismatched = config;
    mismatched.stages = 4; // schedule still has three radii
    EXPECT_THROW(train_cascade(data, mismatched, kInit), std::invalid_argument);
}

TEST(Fit, ZeroLinearStagesLeaveMeanShape)
{
    CascadeModel m = trained(EncodingKind::IDF).result.model;
    for (StageModel& s : m.stages) {
        s.regressor.weights.setZero();
        s.regressor.bias.setZero();
    }
    const auto& sample = trained(EncodingKind::IDF).data[0];
    const Shape start = denormalize_from_box(m.mean_shape, sample.box);
    for (const Shape& s : fit_trajectory(m, *sample.image, start))
        EXPECT_EQ(s, start);
    EXPECT_EQ(fit(m, *sample.image, sample.box), start);
}

TEST(Fit, TruncatedModelEqualsTrajectoryPrefix)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    const auto test = synth(5, 12, 3, 100);
    for (const auto& s : test) {
        const Shape start = denormalize_from_box(m.mean_shape, s.box);
        const auto traj = fit_trajectory(m, *s.image, start);
        ASSERT_EQ(traj.size(), 4u);
        for (std::size_t t = 0; t <= 3; ++t) {
            CascadeModel truncated = m;
            truncated.stages.resize(t);
            truncated.config.set_stages(static_cast<std::uint32_t>(t));
            EXPECT_EQ(fit(truncated, *s.image, s.box), traj[t]);
            EXPECT_EQ(fit(m, *s.image, s.box, false, t), traj[t]);
        }
    }
}

TEST(Fit, TranslationEquivariance)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    const auto test = synth(4, 12, 3, 200);
    for (const auto& s : test)
        for (auto [dx, dy] : {std::pair{7, -3}, std::pair{-11, 20}, std::pair{0, 5}}) {
            const Image moved = shift_image(*s.image, dx + 30, dy + 30, 30);
            BoundingBox box = s.box;
            box.x += dx + 30;
            box.y += dy + 30;
            const Shape a = fit(m, *s.image, s.box);
            const Shape b = fit(m, moved, box);
            for (std::size_t i = 0; i < a.size(); ++i) {
                EXPECT_NEAR(b[i].x - a[i].x, dx + 30, 1e-9);
                EXPECT_NEAR(b[i].y - a[i].y, dy + 30, 1e-9);
            }
        }
}

TEST(Fit, GeneralizesOnHeldOutSamples)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    const auto test = synth(20, 12, 3, 500);
    double base = 0, fitted = 0;
    for (const auto& s : test) {
        base += alignment_error(denormalize_from_box(m.mean_shape, s.box), s.truth, NormalizationKind::BoxDiagonal);
        fitted += alignment_error(fit(m, *s.image, s.box), s.truth, NormalizationKind::BoxDiagonal);
    }
    EXPECT_LT(fitted, base);
}

TEST(Fit, MultiInitIsMedianOfRuns)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    const auto& s = trained(EncodingKind::IDF).data[5];
    std::vector<Shape> runs;
    for (const Shape& init : m.init.shapes)
        runs.push_back(fit_from(m, *s.image, denormalize_from_box(init, s.box)));
    const Shape median = fit(m, *s.image, s.box, true);
    EXPECT_EQ(median, coordinate_median(runs));
    for (std::size_t i = 0; i < median.size(); ++i) {
        std::vector<double> xs;
        for (const auto& r : runs)
            xs.push_back(r[i].x);
        std::sort(xs.begin(), xs.end());
        EXPECT_EQ(median[i].x, xs.size() % 2 ? xs[xs.size() / 2] : 0.5 * (xs[xs.size() / 2 - 1] + xs[xs.size() / 2]));
    }
}

TEST(Fit, Errors)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    const auto& s = trained(EncodingKind::IDF).data[0];
    EXPECT_THROW(fit(m, *s.image, BoundingBox{0, 0, 0, 10}), std::invalid_argument);
    EXPECT_THROW(fit(CascadeModel{}, *s.image, s.box), std::runtime_error);
    CascadeModel missing = m;
    missing.stages.pop_back();
    EXPECT_THROW(fit(missing, *s.image, s.box), std::runtime_error);
}

TEST(CoordinateMedian, OddAndEven)
{
    const std::vector<Shape> odd{Shape(std::vector<Vec2>{{1, 9}}), Shape(std::vector<Vec2>{{5, 2}}),
                                 Shape(std::vector<Vec2>{{3, 4}})};
    EXPECT_EQ(coordinate_median(odd)[0], (Vec2{3, 4}));
    const std::vector<Shape> even{Shape(std::vector<Vec2>{{1, 0}}), Shape(std::vector<Vec2>{{4, 10}})};
    EXPECT_EQ(coordinate_median(even)[0], (Vec2{2.5, 5}));
}

TEST(Serialization, BitExactRoundTripBothEncodings)
{
    for (auto kind : {EncodingKind::IDF, EncodingKind::LBF}) {
        const auto& t = trained(kind);
        const CascadeModel& m = t.result.model;
        const std::string bytes = serialize_model(m);
        EXPECT_EQ(bytes.substr(0, 4), "IDF1");
        EXPECT_EQ(bytes.size(), report_dimensions(m.config, m.init.size()).estimated_bytes);
        const CascadeModel back = deserialize_model(bytes);
        EXPECT_EQ(serialize_model(back), bytes);
        EXPECT_EQ(back.config, m.config);
        for (std::size_t i = 0; i < 10; ++i) {
            const auto& s = t.data[i];
            EXPECT_EQ(fit(back, *s.image, s.box), fit(m, *s.image, s.box));
            EXPECT_EQ(fit(back, *s.image, s.box, true), fit(m, *s.image, s.box, true));
        }
    }
}

TEST(Serialization, CorruptInputsRejected)
{
    const std::string bytes = serialize_model(trained(EncodingKind::IDF).result.model);
    EXPECT_THROW(deserialize_model(""), std::runtime_error);
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 1)), std::runtime_error);
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() / 2)), std::runtime_error);
    EXPECT_THROW(deserialize_model(bytes + "x"), std::runtime_error);
    std::string magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(deserialize_model(magic), std::runtime_error);
    std::string version = bytes;
    version[4] = 9;
    EXPECT_THROW(deserialize_model(version), std::runtime_error);
    // Landmark count is the second config field.
    std::string landmarks = bytes;
    landmarks[12] = 13;
    EXPECT_THROW(deserialize_model(landmarks), std::runtime_error);
}

TEST(Serialization, ZeroStageModel)
{
    const auto data = synth(10, 12, 9);
    const TrainResult r = train_cascade(data, small_config(EncodingKind::IDF, 0), kInit);
    EXPECT_EQ(r.stage_errors.size(), 1u);
    const CascadeModel back = deserialize_model(serialize_model(r.model));
    EXPECT_EQ(fit(back, *data[0].image, data[0].box), denormalize_from_box(r.model.mean_shape, data[0].box));
}

TEST(Validate, DetectsInconsistentModels)
{
    const CascadeModel& m = trained(EncodingKind::IDF).result.model;
    CascadeModel a = m;
    a.stages[1].forests.pop_back();
    EXPECT_THROW(a.validate(), std::runtime_error);
    CascadeModel b = m;
    b.stages[0].regressor.weights.conservativeResize(10, 24);
    EXPECT_THROW(b.validate(), std::runtime_error);
    CascadeModel c = m;
    c.stages[2].forests[0].trees[0].nodes[0].pair.first = 999;
    EXPECT_THROW(c.validate(), std::runtime_error);
    CascadeModel d = m;
    d.mean_shape.points.pop_back();
    EXPECT_THROW(d.validate(), std::runtime_error);
    CascadeModel e = m;
    e.config.encoding = EncodingKind::LBF;
    EXPECT_THROW(e.validate(), std::runtime_error);
    EXPECT_THROW(serialize_model(e), std::runtime_error);
}

TEST(ReportDimensions, WorkedNumbers)
{
    CascadeConfig c;
    c.forest.trees = 10;
    const auto idf = report_dimensions(c);
    c.encoding = EncodingKind::LBF;
    const auto lbf = report_dimensions(c);
    EXPECT_EQ(idf.feature_dim, 680u);
    EXPECT_EQ(lbf.feature_dim, 43520u);
    EXPECT_EQ(lbf.linear_weight_count, 64 * idf.linear_weight_count);
    EXPECT_EQ(idf.linear_parameter_count, 7u * 681u * 136u);
    EXPECT_EQ(idf.forest_node_count, 7u * 68u * 10u * 127u);
    EXPECT_EQ(idf.parameter_count, idf.linear_parameter_count + idf.forest_node_count);

    CascadeConfig tiny;
    tiny.set_stages(1);
    tiny.landmarks = 1;
    tiny.forest.trees = 1;
    tiny.forest.depth = 2;
    tiny.encoding = EncodingKind::LBF;
    EXPECT_EQ(report_dimensions(tiny).feature_dim, 2u);
}

TEST(ReportDimensions, LbfIsIdfTimesLeafCountProperty)
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::uint32_t> small(1, 12), depth(2, 10);
    for (int trial = 0; trial < 200; ++trial) {
        CascadeConfig c;
        c.set_stages(small(rng));
        c.landmarks = small(rng) * 6;
        c.forest.trees = small(rng);
        c.forest.depth = depth(rng);
        const auto idf = report_dimensions(c);
        c.encoding = EncodingKind::LBF;
        const auto lbf = report_dimensions(c);
        EXPECT_EQ(idf.feature_dim << (c.forest.depth - 1), lbf.feature_dim);
        EXPECT_EQ(idf.linear_weight_count << (c.forest.depth - 1), lbf.linear_weight_count);
    }
}
