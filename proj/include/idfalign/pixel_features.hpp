#pragma once

#include "idfalign/geometry.hpp"
#include "idfalign/image.hpp"
#include "idfalign/random.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace idfalign {

/// Offset relative to one landmark, in the mean-shape normalized frame.
struct PixelOffset
{
    double dx = 0.0;
    double dy = 0.0;

    friend bool operator==(PixelOffset, PixelOffset) = default;
};

/// Candidate sampling locations around one landmark for one stage.
struct CandidateSet
{
    std::uint32_t landmark_index = 0;
    std::uint32_t stage_index = 0;
    double radius = 1.0;
    std::vector<PixelOffset> offsets;

    std::size_t size() const { return offsets.size(); }
    friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

struct PixelPair
{
    std::uint32_t first = 0;
    std::uint32_t second = 1;

    friend bool operator==(PixelPair, PixelPair) = default;
};

inline constexpr std::size_t kDefaultCandidateCount = 500;

/// Per-stage sampling radii as fractions of the normalized-frame half-extent.
class RadiusSchedule
{
public:
    RadiusSchedule() = default;
    explicit RadiusSchedule(std::vector<double> radii) : radii_(std::move(radii)) { validate(); }

    /// (0.30, 0.25, 0.20, 0.15, 0.12, 0.10, 0.08), truncated to `stages`;
    /// longer cascades repeat the last radius.
    static RadiusSchedule standard(std::size_t stages)
    {
        static constexpr double kBase[] = {0.30, 0.25, 0.20, 0.15, 0.12, 0.10, 0.08};
        std::vector<double> r;
        r.reserve(stages);
        for (std::size_t i = 0; i < stages; ++i)
            r.push_back(kBase[std::min<std::size_t>(i, std::size(kBase) - 1)]);
        return RadiusSchedule(std::move(r));
    }

    std::size_t size() const { return radii_.size(); }
    double operator[](std::size_t stage) const { return radii_.at(stage); }
    const std::vector<double>& values() const { return radii_; }

    friend bool operator==(const RadiusSchedule&, const RadiusSchedule&) = default;

private:
    void validate() const
    {
        for (std::size_t i = 0; i < radii_.size(); ++i) {
            if (!(radii_[i] > 0.0 && radii_[i] <= 1.0))
                throw std::invalid_argument("radius schedule values must lie in (0, 1]");
            if (i > 0 && radii_[i] > radii_[i - 1])
                throw std::invalid_argument("radius schedule must be non-increasing");
        }
    }

    std::vector<double> radii_;
};

/// Uniform samples in the disk of the given radius.
template <typename URBG>
CandidateSet sample_candidates(URBG& rng, double radius, std::size_t count)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("sample_candidates: radius must be positive");
    CandidateSet set;
    set.radius = radius;
    set.offsets.reserve(count);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < count; ++i) {
        const double r = radius * std::sqrt(unit(rng));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        double dx = r * std::cos(theta);
        double dy = r * std::sin(theta);
        // Guard against rounding pushing a boundary sample outside the disk.
        const double len = std::hypot(dx, dy);
        if (len > radius) {
            dx *= radius / len;
            dy *= radius / len;
        }
        set.offsets.push_back({dx, dy});
    }
    return set;
}

struct PixelCoord
{
    int x = 0;
    int y = 0;
};

/// Image position of a candidate: the offset is rotated and scaled by
/// `transform`, added to the landmark, rounded, then clamped to the image.
inline PixelCoord candidate_pixel(const Image& image, Vec2 landmark, PixelOffset offset, const ScaledRotation& map)
{
    const Vec2 p = landmark + map({offset.dx, offset.dy});
    auto clamp_round = [](double v, int hi) {
        if (!(v > 0.0)) // also maps NaN to 0
            return 0;
        if (v >= static_cast<double>(hi))
            return hi;
        return std::min(hi, static_cast<int>(std::lround(v)));
    };
    return {clamp_round(p.x, image.width - 1), clamp_round(p.y, image.height - 1)};
}

inline PixelCoord candidate_pixel(const Image& image, Vec2 landmark, PixelOffset offset,
                                  const SimilarityTransform& transform)
{
    return candidate_pixel(image, landmark, offset, transform.linear());
}

inline int candidate_intensity(const Image& image, const Shape& shape, std::size_t landmark_index,
                               const CandidateSet& candidates, std::size_t candidate, const ScaledRotation& map)
{
    const PixelCoord c = candidate_pixel(image, shape[landmark_index], candidates.offsets[candidate], map);
    return image.at(c.x, c.y);
}

inline int candidate_intensity(const Image& image, const Shape& shape, std::size_t landmark_index,
                               const CandidateSet& candidates, std::size_t candidate,
                               const SimilarityTransform& transform)
{
    return candidate_intensity(image, shape, landmark_index, candidates, candidate, transform.linear());
}

inline int pixel_diff(const Image& image, const Shape& shape, std::size_t landmark_index, PixelPair pair,
                      const CandidateSet& candidates, const ScaledRotation& map)
{
    return candidate_intensity(image, shape, landmark_index, candidates, pair.first, map) -
           candidate_intensity(image, shape, landmark_index, candidates, pair.second, map);
}

/// Pose-indexed pixel-difference feature, in [-255, 255].
inline int pixel_diff(const Image& image, const Shape& shape, std::size_t landmark_index, PixelPair pair,
                      const CandidateSet& candidates, const SimilarityTransform& transform)
{
    return pixel_diff(image, shape, landmark_index, pair, candidates, transform.linear());
}

/// Intensities of every candidate of one landmark for a batch of
/// (image, shape, transform) instances. Row i holds instance i.
class IntensityTable
{
public:
    IntensityTable() = default;
    IntensityTable(std::size_t instances, std::size_t candidates)
        : rows_(instances), cols_(candidates), data_(instances * candidates)
    {
    }

    std::size_t sample_count() const { return rows_; }
    std::size_t candidate_count() const { return cols_; }
    int intensity(std::size_t sample, std::size_t candidate) const { return data_[sample * cols_ + candidate]; }
    void set(std::size_t sample, std::size_t candidate, std::uint8_t v) { data_[sample * cols_ + candidate] = v; }

    void fill_row(std::size_t sample, const Image& image, const Shape& shape, std::size_t landmark_index,
                  const CandidateSet& candidates, const SimilarityTransform& transform)
    {
        const ScaledRotation map = transform.linear();
        for (std::size_t c = 0; c < cols_; ++c)
            set(sample, c,
                static_cast<std::uint8_t>(candidate_intensity(image, shape, landmark_index, candidates, c, map)));
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

} // namespace idfalign
