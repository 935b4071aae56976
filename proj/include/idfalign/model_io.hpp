#pragma once

// Binary model format, all integers and floats little-endian:
//
//   "IDF1"                     magic, 4 bytes
//   u32 format_version         currently 1
//   config block:
//     u32 stages, landmarks, trees, depth, candidates_per_node,
//         thresholds_per_candidate, min_samples_per_node, idf_k,
//         idf_range_mode, encoding, candidates, train_inits_per_sample
//     f64 bagging_fraction, ridge_lambda
//     u64 seed
//     u32 error_norm
//     u32 radius_count, f64[radius_count] radii
//   mean shape:   u32 l, f64[2l] (x0, y0, x1, y1, ...)
//   init shapes:  u32 count, then per shape u32 cluster_id, u32 source_index, f64[2l]
//   per stage, per landmark:
//     u32 landmark_index, f64 radius, u32 C, f64[2C] candidate offsets (dx, dy)
//     per tree: internal nodes in heap order as (u32 first, u32 second, i32 threshold),
//               then leaves left to right as (f64 dx, f64 dy)
//   per stage, linear model:
//     u32 rows, u32 cols, f64[rows*cols] weights row-major, f64[cols] bias

#include "idfalign/cascade.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

inline constexpr char kModelMagic[4] = {'I', 'D', 'F', '1'};

namespace detail {

class ByteWriter
{
public:
    template <typename T>
    void put(T v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void u32(std::size_t v)
    {
        if (v > 0xffffffffu)
            throw std::length_error("model value exceeds 32 bits");
        put(static_cast<std::uint32_t>(v));
    }
    void f64(double v) { put(v); }
    void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    std::string& buffer() { return buf_; }

private:
    std::string buf_;
};

class ByteReader
{
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    double f64() { return get<double>(); }
    void raw(void* out, std::size_t n)
    {
        need(n);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    /// Throws unless `count` items of `item_bytes` each are still available.
    void need_items(std::size_t count, std::size_t item_bytes) const
    {
        if (item_bytes != 0 && count > remaining() / item_bytes)
            throw std::runtime_error("model file truncated or corrupt");
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (n > remaining())
            throw std::runtime_error("model file truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline void write_shape(ByteWriter& w, const Shape& s)
{
    for (Vec2 p : s.points) {
        w.f64(p.x);
        w.f64(p.y);
    }
}

inline Shape read_shape(ByteReader& r, std::size_t l)
{
    r.need_items(l, 16);
    Shape s(l);
    for (auto& p : s.points) {
        p.x = r.f64();
        p.y = r.f64();
    }
    return s;
}

} // namespace detail

inline std::string serialize_model(const CascadeModel& model)
{
    model.validate();
    const CascadeConfig& c = model.config;
    detail::ByteWriter w;
    w.raw(kModelMagic, 4);
    w.u32(model.format_version);

    w.u32(c.stages);
    w.u32(c.landmarks);
    w.u32(c.forest.trees);
    w.u32(c.forest.depth);
    w.u32(c.forest.candidates_per_node);
    w.u32(c.forest.thresholds_per_candidate);
    w.u32(c.forest.min_samples_per_node);
    w.u32(c.idf.k);
    w.u32(static_cast<std::uint32_t>(c.idf.range_mode));
    w.u32(static_cast<std::uint32_t>(c.encoding));
    w.u32(c.candidates);
    w.u32(c.train_inits_per_sample);
    w.f64(c.forest.bagging_fraction);
    w.f64(c.ridge_lambda);
    w.put<std::uint64_t>(c.seed);
    w.u32(static_cast<std::uint32_t>(c.error_norm));
    w.u32(c.radii.size());
    for (double r : c.radii.values())
        w.f64(r);

    w.u32(model.mean_shape.size());
    detail::write_shape(w, model.mean_shape);

    w.u32(model.init.size());
    for (std::size_t i = 0; i < model.init.size(); ++i) {
        w.u32(i < model.init.cluster_ids.size() ? model.init.cluster_ids[i] : 0);
        w.u32(i < model.init.source_indices.size() ? model.init.source_indices[i] : 0);
        detail::write_shape(w, model.init.shapes[i]);
    }

    for (const StageModel& stage : model.stages) {
        for (std::size_t j = 0; j < c.landmarks; ++j) {
            const CandidateSet& cs = stage.candidates[j];
            w.u32(cs.landmark_index);
            w.f64(cs.radius);
            w.u32(cs.size());
            for (PixelOffset o : cs.offsets) {
                w.f64(o.dx);
                w.f64(o.dy);
            }
            for (const DecisionTree& tree : stage.forests[j].trees) {
                for (const SplitNode& n : tree.nodes) {
                    w.u32(n.pair.first);
                    w.u32(n.pair.second);
                    w.put<std::int32_t>(n.threshold);
                }
                for (Vec2 leaf : tree.leaves) {
                    w.f64(leaf.x);
                    w.f64(leaf.y);
                }
            }
        }
        const LinearModel& lm = stage.regressor;
        w.u32(static_cast<std::size_t>(lm.weights.rows()));
        w.u32(static_cast<std::size_t>(lm.weights.cols()));
        w.raw(lm.weights.data(), sizeof(double) * static_cast<std::size_t>(lm.weights.size()));
        w.raw(lm.bias.data(), sizeof(double) * static_cast<std::size_t>(lm.bias.size()));
    }
    return std::move(w.buffer());
}

inline CascadeModel deserialize_model(std::string_view bytes)
{
    detail::ByteReader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0)
        throw std::runtime_error("not a model file (bad magic)");
    CascadeModel model;
    model.format_version = r.u32();
    if (model.format_version != kModelFormatVersion)
        throw std::runtime_error("unsupported model format version " + std::to_string(model.format_version));

    CascadeConfig& c = model.config;
    c.stages = r.u32();
    c.landmarks = r.u32();
    c.forest.trees = r.u32();
    c.forest.depth = r.u32();
    c.forest.candidates_per_node = r.u32();
    c.forest.thresholds_per_candidate = r.u32();
    c.forest.min_samples_per_node = r.u32();
    c.idf.k = r.u32();
    const std::uint32_t range_mode = r.u32();
    const std::uint32_t encoding = r.u32();
    if (range_mode > 1 || encoding > 2)
        throw std::runtime_error("model file corrupt: unknown enum value");
    c.idf.range_mode = static_cast<IdfRangeMode>(range_mode);
    c.encoding = static_cast<EncodingKind>(encoding);
    c.candidates = r.u32();
    c.train_inits_per_sample = r.u32();
    c.forest.bagging_fraction = r.f64();
    c.ridge_lambda = r.f64();
    c.seed = r.get<std::uint64_t>();
    const std::uint32_t norm = r.u32();
    if (norm > 2)
        throw std::runtime_error("model file corrupt: unknown normalization");
    c.error_norm = static_cast<NormalizationKind>(norm);
    const std::uint32_t radius_count = r.u32();
    r.need_items(radius_count, 8);
    std::vector<double> radii(radius_count);
    for (double& v : radii)
        v = r.f64();
    try {
        c.radii = RadiusSchedule(std::move(radii));
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("model file corrupt: ") + e.what());
    }

    const std::size_t l = r.u32();
    if (l != c.landmarks)
        throw std::runtime_error("model file corrupt: mean shape size mismatch");
    model.mean_shape = detail::read_shape(r, l);

    const std::size_t inits = r.u32();
    r.need_items(inits, 8 + 16 * l);
    for (std::size_t i = 0; i < inits; ++i) {
        model.init.cluster_ids.push_back(r.u32());
        model.init.source_indices.push_back(r.u32());
        model.init.shapes.push_back(detail::read_shape(r, l));
    }

    const std::size_t internal = DecisionTree::leaf_count_for(c.forest.depth) - 1;
    const std::size_t leaves = internal + 1;
    for (std::size_t t = 0; t < c.stages; ++t) {
        StageModel stage;
        stage.candidates.resize(l);
        stage.forests.resize(l);
        for (std::size_t j = 0; j < l; ++j) {
            CandidateSet& cs = stage.candidates[j];
            cs.landmark_index = r.u32();
            cs.stage_index = static_cast<std::uint32_t>(t);
            cs.radius = r.f64();
            const std::size_t count = r.u32();
            r.need_items(count, 16);
            cs.offsets.resize(count);
            for (PixelOffset& o : cs.offsets) {
                o.dx = r.f64();
                o.dy = r.f64();
            }
            Forest& f = stage.forests[j];
            f.landmark_index = cs.landmark_index;
            r.need_items(c.forest.trees, internal * 12 + leaves * 16);
            f.trees.resize(c.forest.trees);
            for (DecisionTree& tree : f.trees) {
                tree.depth = c.forest.depth;
                tree.nodes.resize(internal);
                for (SplitNode& n : tree.nodes) {
                    n.pair.first = r.u32();
                    n.pair.second = r.u32();
                    n.threshold = r.get<std::int32_t>();
                }
                tree.leaves.resize(leaves);
                for (Vec2& v : tree.leaves) {
                    v.x = r.f64();
                    v.y = r.f64();
                }
            }
        }
        const std::size_t rows = r.u32();
        const std::size_t cols = r.u32();
        r.need_items(rows * cols + cols, 8);
        stage.regressor.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        r.raw(stage.regressor.weights.data(), 8 * rows * cols);
        stage.regressor.bias.resize(static_cast<Eigen::Index>(cols));
        r.raw(stage.regressor.bias.data(), 8 * cols);
        model.stages.push_back(std::move(stage));
    }
    if (r.remaining() != 0)
        throw std::runtime_error("model file corrupt: trailing bytes");
    model.validate();
    return model;
}

inline void save_model(const std::string& path, const CascadeModel& model)
{
    const std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("failed writing model '" + path + "'");
}

inline CascadeModel load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open model '" + path + "'");
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return deserialize_model(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

} // namespace idfalign
