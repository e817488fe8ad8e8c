#include <dfi/gaussian_core.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles/random_matrices.hpp"

using dfi::CovOperator;
using dfi::LinearResponse;
using dfi::Matrix;
using dfi::Vector;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

// Brute-force inverse through a full-pivot LU, independent of the LDL^T route.
Matrix brute_inverse(const Matrix& a) { return a.fullPivLu().inverse(); }

}  // namespace

TEST(InformationSource, IdentityResponseAndNoise) {
    const Vector j = dfi::information_source(LinearResponse(m1(1)), CovOperator(m1(1)), v1(2));
    EXPECT_DOUBLE_EQ(j(0), 2.0);
}

TEST(InformationSource, ZeroResponseAnnihilatesData) {
    const Vector j = dfi::information_source(LinearResponse(m1(0)), CovOperator(m1(3)), v1(5));
    EXPECT_DOUBLE_EQ(j(0), 0.0);
}

TEST(InformationSource, ScaledResponse) {
    const Matrix r = m1(2), n = m1(4);
    const Vector d = v1(1);
    const Vector expected = r.transpose() * brute_inverse(n) * d;
    const Vector j = dfi::information_source(LinearResponse(r), CovOperator(n), d);
    EXPECT_NEAR(j(0), 0.5, 1e-15);
    EXPECT_NEAR(j(0), expected(0), 1e-15);
}

TEST(InformationSource, SingularNoiseIsReported) {
    EXPECT_THROW(dfi::information_source(LinearResponse(m1(1)), CovOperator::zero(1), v1(1)), dfi::SingularNoise);
}

TEST(InformationForm, ScalarExamples) {
    EXPECT_DOUBLE_EQ(dfi::propagator_information_form(CovOperator(m1(1)), LinearResponse(m1(1)), CovOperator(m1(1)))(0, 0),
                     0.5);
    EXPECT_DOUBLE_EQ(dfi::propagator_information_form(CovOperator(m1(1)), LinearResponse(m1(0)), CovOperator(m1(1)))(0, 0),
                     1.0);
}

TEST(InformationForm, InvertsPosteriorPrecision) {
    std::mt19937_64 rng(11);
    const Matrix phi = oracles::random_spd(5, rng);
    const Matrix r = oracles::random_matrix(2, 5, rng);
    const Matrix n = oracles::random_spd(2, rng);
    const auto d = dfi::propagator_information_form(CovOperator(phi), LinearResponse(r), CovOperator(n));
    const Matrix precision = brute_inverse(phi) + r.transpose() * brute_inverse(n) * r;
    EXPECT_LE((d.matrix() * precision - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(InformationForm, RejectsZeroNoiseAndSingularPrior) {
    const CovOperator phi(Matrix::Identity(2, 2));
    const LinearResponse r(Matrix::Identity(2, 2));
    EXPECT_THROW(dfi::propagator_information_form(phi, r, CovOperator::zero(2)), dfi::SingularNoise);
    Matrix singular = Matrix::Zero(2, 2);
    singular(0, 0) = 1.0;
    EXPECT_THROW(dfi::propagator_information_form(CovOperator(singular), r, CovOperator::identity(2)), dfi::SingularPrior);
}

TEST(DataSpaceForm, NoiselessFullMeasurementLeavesNoUncertainty) {
    const auto d = dfi::propagator_data_space_form(CovOperator(m1(1)), LinearResponse(m1(1)), CovOperator::zero(1));
    EXPECT_DOUBLE_EQ(d(0, 0), 0.0);
}

TEST(DataSpaceForm, MatchesInformationFormOnScalar) {
    const auto d = dfi::propagator_data_space_form(CovOperator(m1(1)), LinearResponse(m1(1)), CovOperator(m1(1)));
    EXPECT_DOUBLE_EQ(d(0, 0), 0.5);
}

TEST(DataSpaceForm, AgreesWithInformationFormOnRandomInstance) {
    std::mt19937_64 rng(12);
    const CovOperator phi(oracles::random_spd(6, rng));
    const LinearResponse r(oracles::random_matrix(3, 6, rng));
    const CovOperator n(oracles::random_spd(3, rng));
    const auto info = dfi::propagator_information_form(phi, r, n);
    const auto data = dfi::propagator_data_space_form(phi, r, n);
    EXPECT_LE((info.matrix() - data.matrix()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DataSpaceForm, SingularGramIsReported) {
    EXPECT_THROW(dfi::propagator_data_space_form(CovOperator(m1(1)), LinearResponse(m1(0)), CovOperator::zero(1)),
                 dfi::SingularGram);
    EXPECT_THROW(dfi::wiener_mean(CovOperator(m1(1)), LinearResponse(m1(0)), CovOperator::zero(1), v1(1)),
                 dfi::SingularGram);
}

TEST(WienerMean, NoiselessFullMeasurementReproducesDatum) {
    const Vector m = dfi::wiener_mean(CovOperator(m1(1)), LinearResponse(m1(1)), CovOperator::zero(1), v1(3));
    EXPECT_DOUBLE_EQ(m(0), 3.0);
}

TEST(WienerMean, ZeroDataGivesZeroMean) {
    std::mt19937_64 rng(13);
    const CovOperator phi(oracles::random_spd(4, rng));
    const LinearResponse r(oracles::random_matrix(2, 4, rng));
    const CovOperator n(oracles::random_spd(2, rng));
    EXPECT_EQ(dfi::wiener_mean(phi, r, n, Vector::Zero(2)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(WienerMean, EqualsPropagatorTimesSource) {
    std::mt19937_64 rng(14);
    const CovOperator phi(oracles::random_spd(5, rng));
    const LinearResponse r(oracles::random_matrix(3, 5, rng));
    const CovOperator n(oracles::random_spd(3, rng));
    const Vector d = oracles::random_vector(3, rng);
    const Vector via_source =
        dfi::propagator_information_form(phi, r, n).matrix() * dfi::information_source(r, n, d);
    EXPECT_LE((dfi::wiener_mean(phi, r, n, d) - via_source).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(WienerPosterior, RoutesZeroNoiseThroughDataSpaceForm) {
    const auto post = dfi::wiener_posterior(CovOperator(m1(2)), LinearResponse(m1(1)), CovOperator::zero(1), v1(4));
    EXPECT_DOUBLE_EQ(post.mean(0), 4.0);
    EXPECT_DOUBLE_EQ(post.cov(0, 0), 0.0);
}

TEST(CovOperator, RejectsAsymmetricAndIndefiniteMatrices) {
    Matrix asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    EXPECT_THROW(CovOperator{asym}, dfi::InvalidArgument);
    Matrix indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    EXPECT_THROW(CovOperator{indefinite}, dfi::InvalidArgument);
    EXPECT_THROW(LinearResponse{Matrix(0, 3)}, dfi::InvalidArgument);
}

TEST(CovOperator, ShapeMismatchIsRejected) {
    const CovOperator phi(Matrix::Identity(3, 3));
    const LinearResponse r(Matrix::Ones(1, 2));
    EXPECT_THROW(dfi::propagator_data_space_form(phi, r, CovOperator::identity(1)), dfi::InvalidArgument);
}

// Property: the two algebraic forms agree, measurements never add variance.
TEST(GaussianCoreProperties, FormEquivalenceAndMonotoneUncertainty) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const int dim = 2 + static_cast<int>(rng() % 12);
        const int rows = 1 + static_cast<int>(rng() % dim);
        const Matrix phi = oracles::random_spd(dim, rng);
        const CovOperator prior(phi);
        const LinearResponse r(oracles::random_matrix(rows, dim, rng));
        const CovOperator n(oracles::random_spd(rows, rng));
        const Matrix info = dfi::propagator_information_form(prior, r, n).matrix();
        const Matrix data = dfi::propagator_data_space_form(prior, r, n).matrix();
        EXPECT_LE((info - data).cwiseAbs().maxCoeff(), 1e-8 * data.cwiseAbs().maxCoeff()) << "trial " << trial;

        Eigen::SelfAdjointEigenSolver<Matrix> gain(phi - data, Eigen::EigenvaluesOnly);
        EXPECT_GE(gain.eigenvalues().minCoeff(), -1e-10) << "trial " << trial;
    }
}

TEST(GaussianCoreProperties, NoiselessMeasurementInterpolatesData) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = 3 + static_cast<int>(rng() % 10);
        const int rows = 1 + static_cast<int>(rng() % (dim - 1));
        const CovOperator prior(oracles::random_spd(dim, rng));
        const Matrix r = oracles::random_matrix(rows, dim, rng);
        const Vector d = oracles::random_vector(rows, rng);
        const auto zero = CovOperator::zero(rows);
        const Vector m = dfi::wiener_mean(prior, LinearResponse(r), zero, d);
        const Matrix dpost = dfi::propagator_data_space_form(prior, LinearResponse(r), zero).matrix();
        EXPECT_LE((r * m - d).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
        EXPECT_LE((r * dpost * r.transpose()).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    }
}
