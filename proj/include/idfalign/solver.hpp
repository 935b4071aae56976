#pragma once

#include "idfalign/encoding.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// y = W^T x + b, with W stored feature-major (one row per feature).
struct LinearModel
{
    Matrix weights; // feature_dim x target_dim
    Vector bias;    // target_dim

    Eigen::Index feature_dim() const { return weights.rows(); }
    Eigen::Index target_dim() const { return weights.cols(); }
};

struct RidgeConfig
{
    double lambda = 1.0;
};

namespace detail {

inline void require_finite(const Matrix& m, const char* what)
{
    if (!m.allFinite())
        throw std::invalid_argument(std::string("fit_ridge: non-finite entries in ") + what);
}

inline void require_finite(const SparseMatrix& m, const char* what)
{
    for (Eigen::Index i = 0; i < m.nonZeros(); ++i)
        if (!std::isfinite(m.valuePtr()[i]))
            throw std::invalid_argument(std::string("fit_ridge: non-finite entries in ") + what);
}

/// Solves (A + lambda I) Z = B for symmetric positive semi-definite A.
inline Matrix solve_regularized(Matrix a, const Matrix& b, double lambda)
{
    a.diagonal().array() += lambda;
    if (lambda > 0.0) {
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() == Eigen::Success)
            return llt.solve(b);
    }
    Eigen::LDLT<Matrix> ldlt(a);
    const Vector d = ldlt.vectorD();
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * scale)
        throw std::runtime_error("fit_ridge: normal equations are singular; use lambda > 0");
    return ldlt.solve(b);
}

/// Shared ridge path for dense and sparse designs. When p <= n the primal
/// system (Xc^T Xc + lambda I) W = Xc^T Yc is solved; otherwise the
/// equivalent dual system (Xc Xc^T + lambda I) A = Yc with W = Xc^T A.
template <typename Design>
LinearModel fit_ridge_impl(const Design& x, const Matrix& y, const RidgeConfig& config)
{
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (n < 1 || p < 1 || y.cols() < 1)
        throw std::invalid_argument("fit_ridge: empty design or targets");
    if (y.rows() != n)
        throw std::invalid_argument("fit_ridge: feature and target row counts differ");
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda))
        throw std::invalid_argument("fit_ridge: lambda must be a finite non-negative number");
    require_finite(x, "features");
    require_finite(y, "targets");

    const double inv_n = 1.0 / static_cast<double>(n);
    const Vector x_mean = (Vector::Ones(n).transpose() * x).transpose() * inv_n;
    const Vector y_mean = y.colwise().sum().transpose() * inv_n;
    const Matrix yc = y.rowwise() - y_mean.transpose();

    LinearModel model;
    if (p <= n) {
        // Xc^T Xc = X^T X - n m m^T ; Xc^T Yc = X^T Yc.
        Matrix gram = Matrix(x.transpose() * x);
        gram.noalias() -= static_cast<double>(n) * x_mean * x_mean.transpose();
        const Matrix rhs = x.transpose() * yc;
        model.weights = solve_regularized(std::move(gram), rhs, config.lambda);
    } else {
        // Xc Xc^T = H (X X^T) H with H the centering projector.
        Matrix kernel = Matrix(x * x.transpose());
        const Vector row_mean = kernel.rowwise().mean();
        const double all_mean = row_mean.mean();
        kernel.rowwise() -= row_mean.transpose();
        kernel.colwise() -= row_mean;
        kernel.array() += all_mean;
        const Matrix dual = solve_regularized(std::move(kernel), yc, config.lambda);
        model.weights = Matrix(x.transpose() * dual);
        model.weights.noalias() -= x_mean * dual.colwise().sum();
    }
    model.bias = y_mean - model.weights.transpose() * x_mean;
    return model;
}

} // namespace detail

/// Minimizes ||X W + 1 b^T - Y||^2 + lambda ||W||^2 with the bias unpenalized.
inline LinearModel fit_ridge(const Matrix& features, const Matrix& targets, const RidgeConfig& config)
{
    return detail::fit_ridge_impl(features, targets, config);
}

inline LinearModel fit_ridge(const SparseMatrix& features, const Matrix& targets, const RidgeConfig& config)
{
    return detail::fit_ridge_impl(features, targets, config);
}

inline void predict_into(const LinearModel& model, std::span<const double> features, std::span<double> out)
{
    if (static_cast<Eigen::Index>(features.size()) != model.feature_dim())
        throw std::invalid_argument("predict: feature length " + std::to_string(features.size()) +
                                    " does not match model dimension " + std::to_string(model.feature_dim()));
    const Eigen::Index q = model.target_dim();
    for (Eigen::Index j = 0; j < q; ++j)
        out[j] = model.bias[j];
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double v = features[i];
        const double* row = model.weights.data() + static_cast<Eigen::Index>(i) * q;
        for (Eigen::Index j = 0; j < q; ++j)
            out[j] += v * row[j];
    }
}

inline std::vector<double> predict(const LinearModel& model, std::span<const double> features)
{
    std::vector<double> out(static_cast<std::size_t>(model.target_dim()));
    predict_into(model, features, out);
    return out;
}

/// Sparse-aware prediction: only the active rows of W are touched for LBF.
inline std::vector<double> predict(const LinearModel& model, const EncodedFeature& feature)
{
    if (!feature.sparse())
        return predict(model, std::span<const double>(feature.values));
    if (static_cast<Eigen::Index>(feature.dimension) != model.feature_dim())
        throw std::invalid_argument("predict: feature dimension does not match model");
    const Eigen::Index q = model.target_dim();
    std::vector<double> out(model.bias.data(), model.bias.data() + q);
    for (std::size_t a = 0; a < feature.indices.size(); ++a) {
        const double v = feature.values[a];
        const double* row = model.weights.data() + static_cast<Eigen::Index>(feature.indices[a]) * q;
        for (Eigen::Index j = 0; j < q; ++j)
            out[static_cast<std::size_t>(j)] += v * row[j];
    }
    return out;
}

} // namespace idfalign
