#pragma once

// Independent reference implementations used only by the tests. Each one is
// written the slow, obvious way so it shares no code path with the library.

#include "idfalign/idfalign.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using idfalign::Shape;
using idfalign::Vec2;

/// Population variance of one coordinate, two-pass.
inline double variance_1d(const std::vector<double>& v)
{
    if (v.empty())
        return 0.0;
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

/// Trace of the population covariance of a set of 2D vectors.
inline double covariance_trace(const std::vector<Vec2>& pts)
{
    std::vector<double> xs, ys;
    for (Vec2 p : pts) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    return variance_1d(xs) + variance_1d(ys);
}

/// Size-weighted child variance: (|L| var(L) + |R| var(R)) / (|L| + |R|).
inline double split_score(const std::vector<Vec2>& left, const std::vector<Vec2>& right)
{
    const double nl = static_cast<double>(left.size());
    const double nr = static_cast<double>(right.size());
    return (nl * covariance_trace(left) + nr * covariance_trace(right)) / (nl + nr);
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<std::vector<double>> gauss_solve(std::vector<std::vector<double>> a,
                                                    std::vector<std::vector<double>> b)
{
    const std::size_t n = a.size();
    const std::size_t m = b.front().size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col]))
                piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c)
                a[r][c] -= f * a[col][c];
            for (std::size_t c = 0; c < m; ++c)
                b[r][c] -= f * b[col][c];
        }
    }
    std::vector<std::vector<double>> x(n, std::vector<double>(m));
    for (std::size_t r = n; r-- > 0;) {
        for (std::size_t c = 0; c < m; ++c) {
            double v = b[r][c];
            for (std::size_t k = r + 1; k < n; ++k)
                v -= a[r][k] * x[k][c];
            x[r][c] = v / a[r][r];
        }
    }
    return x;
}

struct RidgeSolution
{
    std::vector<std::vector<double>> weights; // p x m
    std::vector<double> bias;                 // m
};

/// Ridge with an unpenalized intercept: centre X and Y, solve
/// (Xc^T Xc + lambda I) W = Xc^T Yc, bias = mean(Y) - mean(X) W.
inline RidgeSolution ridge(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
                           double lambda)
{
    const std::size_t n = x.size(), p = x.front().size(), m = y.front().size();
    std::vector<double> mx(p, 0.0), my(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            mx[j] += x[i][j] / static_cast<double>(n);
        for (std::size_t j = 0; j < m; ++j)
            my[j] += y[i][j] / static_cast<double>(n);
    }
    std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0)), b(p, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < p; ++r) {
            const double xr = x[i][r] - mx[r];
            for (std::size_t c = 0; c < p; ++c)
                a[r][c] += xr * (x[i][c] - mx[c]);
            for (std::size_t c = 0; c < m; ++c)
                b[r][c] += xr * (y[i][c] - my[c]);
        }
    for (std::size_t r = 0; r < p; ++r)
        a[r][r] += lambda;
    RidgeSolution s;
    s.weights = gauss_solve(a, b);
    s.bias = my;
    for (std::size_t c = 0; c < m; ++c)
        for (std::size_t r = 0; r < p; ++r)
            s.bias[c] -= mx[r] * s.weights[r][c];
    return s;
}

/// Similarity (no reflection) via Eigen's Umeyama, returned as
/// (scale, rotation angle, translation).
inline idfalign::SimilarityTransform umeyama(const Shape& from, const Shape& to)
{
    Eigen::Matrix2Xd src(2, from.size()), dst(2, to.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        src.col(static_cast<Eigen::Index>(i)) << from[i].x, from[i].y;
        dst.col(static_cast<Eigen::Index>(i)) << to[i].x, to[i].y;
    }
    const Eigen::Matrix3d t = Eigen::umeyama(src, dst, true);
    const Eigen::Matrix2d lin = t.topLeftCorner<2, 2>();
    idfalign::SimilarityTransform out;
    out.scale = std::sqrt(lin.determinant());
    out.rotation = std::atan2(lin(1, 0), lin(0, 0));
    out.translation = {t(0, 2), t(1, 2)};
    return out;
}

/// Wraps an angle difference into (-pi, pi].
inline double angle_diff(double a, double b)
{
    return std::remainder(a - b, 2.0 * M_PI);
}

inline Shape random_shape(std::mt19937_64& rng, std::size_t n, double lo = -50.0, double hi = 50.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Shape s(n);
    for (auto& p : s.points)
        p = {u(rng), u(rng)};
    return s;
}

} // namespace oracle
