#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

/// A 2D point or displacement. Used both for landmark positions and for
/// residual vectors.
struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Ordered landmark coordinates of one face. Image frame (pixels) or the
/// box-normalized frame, depending on context.
struct Shape
{
    std::vector<Vec2> points;

    Shape() = default;
    explicit Shape(std::size_t landmark_count) : points(landmark_count) {}
    explicit Shape(std::vector<Vec2> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    Vec2& operator[](std::size_t i) { return points[i]; }
    const Vec2& operator[](std::size_t i) const { return points[i]; }

    bool all_finite() const
    {
        return std::all_of(points.begin(), points.end(),
                           [](Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); });
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

struct BoundingBox
{
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
    double height = 0.0;

    bool valid() const
    {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(width) && std::isfinite(height) &&
               width > 0.0 && height > 0.0;
    }
    Vec2 center() const { return {x + 0.5 * width, y + 0.5 * height}; }
    double diagonal() const { return std::hypot(width, height); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// The linear part of a similarity, s * R(theta), as a 2x2 [c -s; s c].
struct ScaledRotation
{
    double c = 1.0;
    double s = 0.0;

    ScaledRotation() = default;
    ScaledRotation(double scale, double rotation) : c(std::cos(rotation) * scale), s(std::sin(rotation) * scale) {}

    Vec2 operator()(Vec2 v) const { return {c * v.x - s * v.y, s * v.x + c * v.y}; }
};

/// x -> scale * R(rotation) * x + translation.
struct SimilarityTransform
{
    double scale = 1.0;
    double rotation = 0.0;
    Vec2 translation{};

    static SimilarityTransform identity() { return {}; }

    /// Rotates and scales a displacement; translation is not applied.
    Vec2 apply_vector(Vec2 v) const { return linear()(v); }

    ScaledRotation linear() const { return {scale, rotation}; }

    Vec2 apply(Vec2 p) const { return apply_vector(p) + translation; }

    Shape apply(const Shape& shape) const
    {
        Shape out(shape.size());
        for (std::size_t i = 0; i < shape.size(); ++i)
            out[i] = apply(shape[i]);
        return out;
    }

    SimilarityTransform inverse() const
    {
        SimilarityTransform inv;
        inv.scale = 1.0 / scale;
        inv.rotation = -rotation;
        const Vec2 t = inv.apply_vector(translation);
        inv.translation = {-t.x, -t.y};
        return inv;
    }

    /// (this * other)(x) == this->apply(other.apply(x)).
    SimilarityTransform compose(const SimilarityTransform& other) const
    {
        SimilarityTransform out;
        out.scale = scale * other.scale;
        out.rotation = rotation + other.rotation;
        out.translation = apply(other.translation);
        return out;
    }
};

enum class NormalizationKind { InterOcular, InterPupil, BoxDiagonal };

inline std::string to_string(NormalizationKind kind)
{
    switch (kind) {
    case NormalizationKind::InterOcular: return "inter-ocular";
    case NormalizationKind::InterPupil: return "inter-pupil";
    case NormalizationKind::BoxDiagonal: return "box-diagonal";
    }
    return "unknown";
}

inline NormalizationKind parse_normalization(const std::string& name)
{
    if (name == "inter-ocular" || name == "interocular" || name == "ocular")
        return NormalizationKind::InterOcular;
    if (name == "inter-pupil" || name == "interpupil" || name == "pupil")
        return NormalizationKind::InterPupil;
    if (name == "box-diagonal" || name == "box" || name == "diagonal")
        return NormalizationKind::BoxDiagonal;
    throw std::invalid_argument("unknown normalization '" + name + "'");
}

// Eye indices of the 68-point markup (0-based).
inline constexpr std::size_t kLeftEyeOuterCorner = 36;
inline constexpr std::size_t kRightEyeOuterCorner = 45;
inline constexpr std::size_t kLeftEyeFirst = 36;
inline constexpr std::size_t kRightEyeFirst = 42;
inline constexpr std::size_t kEyeRingSize = 6;

namespace detail {

inline void require_box(const BoundingBox& box)
{
    if (!box.valid())
        throw std::invalid_argument("degenerate bounding box (width and height must be positive)");
}

inline void require_same_size(const Shape& a, const Shape& b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("landmark count mismatch: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
}

inline Vec2 centroid(std::span<const Vec2> pts)
{
    Vec2 c{};
    for (Vec2 p : pts)
        c = c + p;
    return (1.0 / static_cast<double>(pts.size())) * c;
}

} // namespace detail

/// Maps box corners to (-1,-1) and (1,1).
inline Shape normalize_to_box(const Shape& shape, const BoundingBox& box)
{
    detail::require_box(box);
    const Vec2 c = box.center();
    const double sx = 2.0 / box.width;
    const double sy = 2.0 / box.height;
    Shape out(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i)
        out[i] = {(shape[i].x - c.x) * sx, (shape[i].y - c.y) * sy};
    return out;
}

/// Inverse of normalize_to_box: places a normalized-frame shape into `box`.
inline Shape denormalize_from_box(const Shape& shape, const BoundingBox& box)
{
    detail::require_box(box);
    const Vec2 c = box.center();
    const double hx = 0.5 * box.width;
    const double hy = 0.5 * box.height;
    Shape out(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i)
        out[i] = {shape[i].x * hx + c.x, shape[i].y * hy + c.y};
    return out;
}

inline Shape compute_mean_shape(std::span<const Shape> shapes, std::span<const BoundingBox> boxes)
{
    if (shapes.empty())
        throw std::invalid_argument("compute_mean_shape: empty input");
    if (shapes.size() != boxes.size())
        throw std::invalid_argument("compute_mean_shape: shape and box counts differ");
    const std::size_t l = shapes.front().size();
    Shape mean(l);
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        if (shapes[s].size() != l)
            throw std::invalid_argument("compute_mean_shape: landmark count mismatch at index " +
                                        std::to_string(s));
        const Shape n = normalize_to_box(shapes[s], boxes[s]);
        for (std::size_t i = 0; i < l; ++i)
            mean[i] = mean[i] + n[i];
    }
    const double inv = 1.0 / static_cast<double>(shapes.size());
    for (auto& p : mean.points)
        p = inv * p;
    return mean;
}

/// Least-squares similarity (no reflection) taking `from` onto `to`.
inline SimilarityTransform estimate_similarity(const Shape& from, const Shape& to)
{
    detail::require_same_size(from, to);
    if (from.size() < 2)
        throw std::invalid_argument("estimate_similarity: need at least two landmarks");
    const Vec2 cf = detail::centroid(from.points);
    const Vec2 ct = detail::centroid(to.points);
    double spread = 0.0, a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        const Vec2 f = from[i] - cf;
        const Vec2 t = to[i] - ct;
        spread += f.x * f.x + f.y * f.y;
        a += f.x * t.x + f.y * t.y;
        b += f.x * t.y - f.y * t.x;
    }
    if (!(spread > 0.0))
        throw std::invalid_argument("estimate_similarity: source points are all coincident");
    a /= spread;
    b /= spread;
    SimilarityTransform out;
    out.scale = std::hypot(a, b);
    if (!(out.scale > 0.0))
        throw std::invalid_argument("estimate_similarity: target points are all coincident");
    out.rotation = std::atan2(b, a);
    const Vec2 rc = out.apply_vector(cf);
    out.translation = ct - rc;
    return out;
}

/// Tight axis-aligned box around the points.
inline BoundingBox bounding_box(std::span<const Vec2> pts)
{
    if (pts.empty())
        throw std::invalid_argument("bounding_box: empty point set");
    double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
    for (Vec2 p : pts) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

/// Normalizing distance for alignment_error, computed from the ground truth.
inline double normalizing_distance(const Shape& truth, NormalizationKind norm)
{
    switch (norm) {
    case NormalizationKind::InterOcular:
    case NormalizationKind::InterPupil:
        if (truth.size() != 68)
            throw std::invalid_argument(to_string(norm) + " normalization requires 68 landmarks, got " +
                                        std::to_string(truth.size()));
        if (norm == NormalizationKind::InterOcular)
            return idfalign::norm(truth[kRightEyeOuterCorner] - truth[kLeftEyeOuterCorner]);
        return idfalign::norm(
            detail::centroid(std::span(truth.points).subspan(kRightEyeFirst, kEyeRingSize)) -
            detail::centroid(std::span(truth.points).subspan(kLeftEyeFirst, kEyeRingSize)));
    case NormalizationKind::BoxDiagonal: {
        const BoundingBox b = bounding_box(truth.points);
        return std::hypot(b.width, b.height);
    }
    }
    throw std::invalid_argument("unknown normalization kind");
}

/// Mean point-to-point distance divided by the normalizing distance of `truth`.
inline double alignment_error(const Shape& predicted, const Shape& truth, NormalizationKind norm)
{
    detail::require_same_size(predicted, truth);
    if (truth.size() == 0)
        throw std::invalid_argument("alignment_error: empty shapes");
    const double denom = normalizing_distance(truth, norm);
    if (!(denom > 0.0))
        throw std::invalid_argument("alignment_error: normalizing distance is zero");
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        total += idfalign::norm(predicted[i] - truth[i]);
    return total / static_cast<double>(truth.size()) / denom;
}

/// Per-landmark distances divided by the normalizing distance.
inline std::vector<double> landmark_errors(const Shape& predicted, const Shape& truth, NormalizationKind norm)
{
    detail::require_same_size(predicted, truth);
    const double denom = normalizing_distance(truth, norm);
    if (!(denom > 0.0))
        throw std::invalid_argument("landmark_errors: normalizing distance is zero");
    std::vector<double> out(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        out[i] = idfalign::norm(predicted[i] - truth[i]) / denom;
    return out;
}

} // namespace idfalign
