#pragma once

// Generalized Wiener filter for a linear Gaussian measurement d = R s + n of a
// Gaussian field s ~ G(s, Phi) with noise n ~ G(n, N).
//
// Two algebraically equivalent routes to the posterior covariance are offered:
//
//   information form   D = (Phi^-1 + R^T N^-1 R)^-1
//   data-space form    D = Phi - Phi R^T (R Phi R^T + N)^-1 R Phi
//
// Only the data-space form survives the noiseless limit N -> 0, so a zero
// noise covariance is always routed there and rejected by the information form.

#include <dfi/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace dfi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Relative pivot tolerance of every symmetric factorization in the library.
inline constexpr double kPivotTolerance = 1e-12;

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// LDL^T factorization that refuses (throws E) when the smallest pivot is not
/// positive relative to the largest. Nothing is regularized.
template <class E>
Eigen::LDLT<Matrix> checked_ldlt(const Matrix& a, const char* what) {
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
        throw E(std::string(what) + ": factorization failed");
    }
    const Vector pivots = ldlt.vectorD();
    const double largest = pivots.cwiseAbs().maxCoeff();
    if (!(largest > 0.0) || !(pivots.minCoeff() > kPivotTolerance * largest)) {
        throw E(std::string(what) + ": matrix is not invertible (relative pivot below 1e-12)");
    }
    return ldlt;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Dense symmetric positive-semidefinite operator over a finite index set.
/// Construction validates symmetry (1e-12 relative) and semidefiniteness
/// (smallest eigenvalue >= -1e-10 * largest).
class CovOperator {
public:
    explicit CovOperator(Matrix entries) : entries_(std::move(entries)) { validate(); }

    static CovOperator zero(Index dim) { return CovOperator(Matrix::Zero(dim, dim), Unchecked{}); }
    static CovOperator identity(Index dim, double scale = 1.0) {
        if (!(scale >= 0.0)) throw InvalidArgument("CovOperator::identity: negative scale");
        return CovOperator(scale * Matrix::Identity(dim, dim), Unchecked{});
    }

    Index dim() const { return entries_.rows(); }
    const Matrix& matrix() const { return entries_; }
    double operator()(Index i, Index j) const { return entries_(i, j); }
    bool is_zero() const { return (entries_.array() == 0.0).all(); }

private:
    struct Unchecked {};
    CovOperator(Matrix entries, Unchecked) : entries_(std::move(entries)) {}

    void validate() const {
        if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
            throw InvalidArgument("CovOperator: matrix must be square with dim >= 1");
        }
        if (!entries_.allFinite()) throw NonFiniteValue("CovOperator: non-finite entry");
        const double scale = detail::max_abs(entries_);
        if (detail::max_abs(entries_ - entries_.transpose()) > 1e-12 * scale) {
            throw InvalidArgument("CovOperator: matrix is not symmetric");
        }
        if (scale == 0.0) return;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
        const Vector& ev = eig.eigenvalues();
        const double largest = std::max(ev.maxCoeff(), 0.0);
        if (ev.minCoeff() < -1e-10 * largest) {
            throw InvalidArgument("CovOperator: matrix is not positive semidefinite");
        }
    }

    Matrix entries_;
};

/// Linear measurement operator R (rows = data points, cols = field dimension).
class LinearResponse {
public:
    explicit LinearResponse(Matrix entries) : entries_(std::move(entries)) {
        if (entries_.rows() < 1 || entries_.cols() < 1) {
            throw InvalidArgument("LinearResponse: need at least one row and one column");
        }
        if (!entries_.allFinite()) throw NonFiniteValue("LinearResponse: non-finite entry");
    }

    /// Point evaluation of a field on `dim` nodes at node `index`.
    static LinearResponse point_evaluation(Index dim, Index index) {
        if (index < 0 || index >= dim) throw InvalidArgument("point_evaluation: index out of range");
        Matrix r = Matrix::Zero(1, dim);
        r(0, index) = 1.0;
        return LinearResponse(std::move(r));
    }

    Index rows() const { return entries_.rows(); }
    Index cols() const { return entries_.cols(); }
    const Matrix& matrix() const { return entries_; }

private:
    Matrix entries_;
};

struct GaussianPosterior {
    Vector mean;
    CovOperator cov;
};

namespace detail {

inline void check_shapes(const CovOperator& prior, const LinearResponse& response,
                         const CovOperator& noise) {
    if (response.cols() != prior.dim()) {
        throw InvalidArgument("response columns do not match prior dimension");
    }
    if (response.rows() != noise.dim()) {
        throw InvalidArgument("response rows do not match noise dimension");
    }
}

inline void check_data(const LinearResponse& response, const Vector& data) {
    if (data.size() != response.rows()) throw InvalidArgument("data length does not match response rows");
    if (!data.allFinite()) throw NonFiniteValue("data vector has non-finite entries");
}

}  // namespace detail

/// j = R^T N^-1 d
inline Vector information_source(const LinearResponse& response, const CovOperator& noise,
                                 const Vector& data) {
    if (response.rows() != noise.dim()) {
        throw InvalidArgument("response rows do not match noise dimension");
    }
    detail::check_data(response, data);
    const auto n_fact = detail::checked_ldlt<SingularNoise>(noise.matrix(), "noise covariance");
    return response.matrix().transpose() * n_fact.solve(data);
}

/// D = (Phi^-1 + R^T N^-1 R)^-1. Requires invertible Phi and N.
inline CovOperator propagator_information_form(const CovOperator& prior, const LinearResponse& response,
                                               const CovOperator& noise) {
    detail::check_shapes(prior, response, noise);
    const auto phi_fact = detail::checked_ldlt<SingularPrior>(prior.matrix(), "prior covariance");
    const auto n_fact = detail::checked_ldlt<SingularNoise>(noise.matrix(), "noise covariance");
    const Matrix& r = response.matrix();
    const Index dim = prior.dim();

    Matrix precision = phi_fact.solve(Matrix::Identity(dim, dim));
    precision.noalias() += r.transpose() * n_fact.solve(r);
    precision = detail::symmetrized(precision);

    const auto d_fact = detail::checked_ldlt<SingularPrior>(precision, "posterior precision");
    return CovOperator(detail::symmetrized(d_fact.solve(Matrix::Identity(dim, dim))));
}

/// D = Phi - Phi R^T (R Phi R^T + N)^-1 R Phi. Valid at N = 0 when R Phi R^T is invertible.
inline CovOperator propagator_data_space_form(const CovOperator& prior, const LinearResponse& response,
                                              const CovOperator& noise) {
    detail::check_shapes(prior, response, noise);
    const Matrix& phi = prior.matrix();
    const Matrix phi_rt = phi * response.matrix().transpose();
    const Matrix gram = detail::symmetrized(response.matrix() * phi_rt + noise.matrix());
    const auto g_fact = detail::checked_ldlt<SingularGram>(gram, "R Phi R^T + N");
    Matrix d = phi - phi_rt * g_fact.solve(phi_rt.transpose());
    return CovOperator(detail::symmetrized(d));
}

/// m = Phi R^T (R Phi R^T + N)^-1 d. At N = 0 the data are reproduced exactly (R m = d).
inline Vector wiener_mean(const CovOperator& prior, const LinearResponse& response, const CovOperator& noise,
                          const Vector& data) {
    detail::check_shapes(prior, response, noise);
    detail::check_data(response, data);
    const Matrix phi_rt = prior.matrix() * response.matrix().transpose();
    const Matrix gram = detail::symmetrized(response.matrix() * phi_rt + noise.matrix());
    const auto g_fact = detail::checked_ldlt<SingularGram>(gram, "R Phi R^T + N");
    return phi_rt * g_fact.solve(data);
}

/// Posterior mean and covariance. A zero noise covariance goes through the
/// data-space form; otherwise the information form D j is used.
inline GaussianPosterior wiener_posterior(const CovOperator& prior, const LinearResponse& response,
                                          const CovOperator& noise, const Vector& data) {
    if (noise.is_zero()) {
        return {wiener_mean(prior, response, noise, data), propagator_data_space_form(prior, response, noise)};
    }
    CovOperator d = propagator_information_form(prior, response, noise);
    Vector m = d.matrix() * information_source(response, noise, data);
    return {std::move(m), std::move(d)};
}

}  // namespace dfi
