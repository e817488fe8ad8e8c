#include <dfi/mode_model.hpp>
#include <dfi/perturbation.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles/bridge_transfer.hpp"

using dfi::DiagramId;
using dfi::FeynmanWeights;
using dfi::ModeParams;
using dfi::QuadratureSpec;

namespace {

QuadratureSpec panels(std::size_t n) {
    QuadratureSpec q;
    q.n_panels = n;
    return q;
}

ModeParams params(double lam, double mu) { return {lam, mu, 1.0, 1.0}; }

const std::vector<DiagramId> kVanishing = {DiagramId::mean_tadpole_mm, DiagramId::mean_boson_loop,
                                           DiagramId::vanishing_lemma_g1, DiagramId::vanishing_lemma_g2,
                                           DiagramId::vanishing_lemma_g3};

}  // namespace

TEST(BosonicPropagator, Examples) {
    EXPECT_DOUBLE_EQ(dfi::bosonic_propagator(params(0, 0.3), 0.5, 0.5), 0.25);
    EXPECT_EQ(dfi::bosonic_propagator(params(1, 0.3), 1.0, 0.4), 0.0);
    const auto f = [](double a, double b) { return dfi::prior_kernel(1.0, a, b); };
    EXPECT_NEAR(dfi::bosonic_propagator(params(1, 0.3), 0.25, 0.75), f(0.25, 0.75) - f(0.25, 1) * f(0.75, 1) / f(1, 1),
                1e-14);
    EXPECT_THROW(dfi::bosonic_propagator(params(0, 0.3), 1.5, 0.5), dfi::OutOfWindow);
    EXPECT_THROW(dfi::bosonic_propagator(params(0, 0.3), 0.5, -0.1), dfi::OutOfWindow);
}

TEST(FermionicPropagator, Examples) {
    EXPECT_EQ(dfi::fermionic_propagator(0.0, 2.0, 1.0), 1.0);
    EXPECT_EQ(dfi::fermionic_propagator(0.7, 0.3, 0.3), 0.5);
    EXPECT_EQ(dfi::fermionic_propagator(0.7, 0.2, 0.3), 0.0);
    EXPECT_NEAR(dfi::fermionic_propagator(1.0, 1.0, 0.0), std::exp(1.0), 1e-15);
}

TEST(MeanCorrectionLambda0, Examples) {
    EXPECT_NEAR(dfi::mean_correction_lambda0(params(0, 0.3), 0.5), -0.1125, 1e-15);
    EXPECT_EQ(dfi::mean_correction_lambda0(params(0, 0.3), 0.0), 0.0);
    EXPECT_EQ(dfi::mean_correction_lambda0(params(0, 0.3), 1.0), 0.0);
    EXPECT_EQ(dfi::mean_correction_lambda0(params(0, 0.0), 0.5), 0.0);
    EXPECT_THROW(dfi::mean_correction_lambda0(params(0.5, 0.3), 0.5), dfi::RequiresLambdaZero);
    EXPECT_THROW(dfi::mean_correction_lambda0(params(0, 0.3), 1.2), dfi::OutOfWindow);
}

TEST(MeanCorrectionGeneral, MatchesClosedFormAtLambdaZero) {
    for (double t = 0.05; t < 1.0; t += 0.05) {
        EXPECT_NEAR(dfi::mean_correction_general(params(0, 0.3), t, panels(2048)),
                    dfi::mean_correction_lambda0(params(0, 0.3), t), 1e-8);
    }
    EXPECT_EQ(dfi::mean_correction_general(params(1, 0.3), 0.0, panels(256)), 0.0);
    EXPECT_THROW(dfi::mean_correction_general(params(1, 0.3), 1.01, panels(256)), dfi::OutOfWindow);
}

TEST(MeanCorrectionGeneral, ContinuousThroughLambdaZero) {
    for (int k = 1; k <= 9; ++k) {
        const double t = 0.1 * k;
        EXPECT_NEAR(dfi::mean_correction_general(params(1e-6, 0.3), t, panels(1024)),
                    dfi::mean_correction_lambda0(params(0, 0.3), t), 1e-4);
    }
}

TEST(MeanCorrectionGeneral, SimpsonSelfConvergence) {
    for (double lam : {-1.0, 1.0}) {
        const double v1 = dfi::mean_correction_general(params(lam, 0.3), 0.37, panels(32));
        const double v2 = dfi::mean_correction_general(params(lam, 0.3), 0.37, panels(64));
        const double v4 = dfi::mean_correction_general(params(lam, 0.3), 0.37, panels(128));
        const double observed = std::log2(std::abs(v1 - v2) / std::abs(v2 - v4));
        EXPECT_GE(observed, 3.0) << "lam " << lam;
    }
}

TEST(CovCorrectionGeneral, Examples) {
    EXPECT_EQ(dfi::cov_correction_general(params(0, 0.3), 0.5, 0.5, panels(256)), 0.0);
    EXPECT_EQ(dfi::cov_correction_general(params(1, 0.3), 0.0, 0.5, panels(256)), 0.0);
    EXPECT_EQ(dfi::cov_correction_general(params(1, 0.3), 0.5, 0.0, panels(256)), 0.0);
    EXPECT_LT(dfi::cov_correction_general(params(1, 0.3), 0.5, 0.5, panels(256)), -1e-3);
    const double a = dfi::cov_correction_general(params(1, 0.3), 0.3, 0.6, panels(512));
    const double b = dfi::cov_correction_general(params(1, 0.3), 0.6, 0.3, panels(512));
    EXPECT_NEAR(a, b, 1e-12);
}

TEST(DiagramValues, AppendixRegressionAtLambdaZero) {
    const auto p = params(0, 0.3);
    EXPECT_LE(std::abs(dfi::vanishing_diagram_value(DiagramId::mean_tadpole_mm, p, 0.5, panels(512))), 1e-6);
    EXPECT_LE(std::abs(dfi::vanishing_diagram_value(DiagramId::mean_boson_loop, p, 0.5, panels(512))), 1e-6);
    EXPECT_LE(std::abs(dfi::diagram_value(DiagramId::cov_tadpole, p, 0.5, panels(512), 0.3).value), 1e-6);
    EXPECT_NEAR(dfi::diagram_value(DiagramId::mean_fermion_loop, p, 0.5, panels(512)).value, -0.1125, 1e-8);
}

TEST(DiagramValues, ZeroCouplingGivesZero) {
    for (auto id : kVanishing) EXPECT_EQ(dfi::vanishing_diagram_value(id, params(1, 0), 0.4, panels(64), 0.7), 0.0);
    EXPECT_THROW(dfi::vanishing_diagram_value(DiagramId::mean_fermion_loop, params(0, 0.3), 0.5, panels(64)),
                 dfi::InvalidArgument);
    EXPECT_THROW(dfi::vanishing_diagram_value(DiagramId::cov_tadpole, params(0, 0.3), 0.5, panels(64)),
                 dfi::InvalidArgument);
}

TEST(PerturbationProperties, TotalDerivativeDiagramsVanish) {
    for (double lam : {-1.0, 0.0, 1.0}) {
        for (double mu : {0.1, 0.3}) {
            for (double t : {0.25, 0.5, 0.75}) {
                for (auto id : kVanishing) {
                    const auto r = dfi::diagram_value(id, params(lam, mu), t, panels(256), 0.6);
                    EXPECT_LE(std::abs(r.value), 5.0 * r.error_estimate + 1e-13)
                        << dfi::to_string(id) << " lam " << lam << " mu " << mu << " t " << t;
                }
            }
        }
    }
}

TEST(PerturbationProperties, MeanCorrectionIsNegative) {
    for (double lam : {-1.0, 0.0, 1.0}) {
        for (int k = 1; k < 20; ++k) {
            EXPECT_LE(dfi::mean_correction_general(params(lam, 0.3), 0.05 * k, panels(256)), 0.0)
                << "lam " << lam << " t " << 0.05 * k;
        }
    }
}

TEST(CorrectedMoments, Examples) {
    const dfi::TimeGrid grid(0.0, 1.0, 21);
    const auto free = dfi::closed_form_moments(params(1, 0.0), grid);
    const auto same = dfi::corrected_moments(params(1, 0.0), grid, panels(64));
    EXPECT_EQ((free.mean - same.mean).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((free.cov - same.cov).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(same.source, dfi::MomentSource::perturbative);

    const auto wiener = dfi::corrected_moments(params(0, 0.3), grid, panels(512));
    EXPECT_NEAR(wiener.mean(10), 0.3875, 1e-8);

    const auto curved = dfi::corrected_moments(params(1, 0.3), grid, panels(256));
    const auto curved_free = dfi::closed_form_moments(params(1, 0.3), grid);
    for (dfi::Index i = 1; i < 20; ++i) EXPECT_LT(curved.mean(i), curved_free.mean(i));

    EXPECT_THROW(dfi::corrected_moments(params(0, 0.3), dfi::TimeGrid(0.0, 2.0, 21), panels(64)), dfi::OutOfWindow);
}

TEST(FermionicInverseCheck, FirstOrderResidual) {
    EXPECT_LE(dfi::fermionic_inverse_check(0.0, dfi::TimeGrid(0.0, 1.0, 200)), 0.05);
    EXPECT_LE(dfi::fermionic_inverse_check(1.0, dfi::TimeGrid(0.0, 1.0, 400)), 0.025);
    for (std::size_t n : {50u, 100u, 200u, 400u}) {
        for (double lam : {-2.0, 1.0, 3.0}) {
            EXPECT_LE(dfi::fermionic_inverse_check(lam, dfi::TimeGrid(0.0, 1.0, n)), 10.0 / static_cast<double>(n));
        }
    }
    const double coarse = dfi::fermionic_inverse_check(1.0, dfi::TimeGrid(0.0, 1.0, 201));
    const double fine = dfi::fermionic_inverse_check(1.0, dfi::TimeGrid(0.0, 1.0, 401));
    EXPECT_NEAR(coarse / fine, 2.0, 0.05);
}

TEST(FermionicInverseCheck, EqualTimeValueIsLatticeAverage) {
    // forward lattice: 0, backward lattice: 1
    EXPECT_EQ(dfi::fermionic_propagator(0.4, 0.6, 0.6), 0.5 * (0.0 + 1.0));
}

// The corrections with vertex factors read off the discretized path density
// reproduce the exact diffusion bridge to O(mu^2).
TEST(PathMeasureWeights, AgreeWithTransferMatrixBridge) {
    const std::vector<double> times = {0.25, 0.5, 0.75};
    for (double lam : {-1.0, 0.0, 1.0}) {
        const auto p = params(lam, 0.3);
        oracles::BridgeTransfer bridge;
        bridge.lam = lam;
        bridge.mu = 0.3;
        const auto exact = bridge.moments(times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double t = times[k];
            const double perturbative = dfi::posterior_mean_mode(p, t) +
                                        dfi::mean_correction_general(p, t, panels(256), FeynmanWeights::path_measure());
            EXPECT_NEAR(perturbative, exact[k].mean, 0.01) << "lam " << lam << " t " << t;
            const double var = dfi::equal_time_uncertainty(p, t) +
                               dfi::cov_correction_general(p, t, t, panels(256), FeynmanWeights::path_measure());
            EXPECT_NEAR(var, exact[k].variance, 0.005) << "lam " << lam << " t " << t;
        }
    }
}

TEST(PathMeasureWeights, TransferMatrixReproducesLinearBridge) {
    const std::vector<double> times = {0.25, 0.5, 0.75};
    oracles::BridgeTransfer bridge;
    bridge.lam = 1.0;
    const auto exact = bridge.moments(times);
    for (std::size_t k = 0; k < times.size(); ++k) {
        EXPECT_NEAR(exact[k].mean, dfi::posterior_mean_mode(params(1, 0), times[k]), 2e-3);
        EXPECT_NEAR(exact[k].variance, dfi::equal_time_uncertainty(params(1, 0), times[k]), 2e-3);
    }
}
