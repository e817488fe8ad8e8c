#pragma once

// First-order (in mu) corrections to the posterior of the mode
//
//     d eps / dt = lam * eps + mu * eps^2 / 2 + xi,   eps(0) = 0,   eps(t_obs) = datum,
//
// on the window [0, t_obs], expanded around the linear theory with
//
//   bosonic propagator    D^b(t,t') = f(t,t') - f(t,t_obs) f(t',t_obs) / f(t_obs,t_obs)
//   fermionic propagator  D^f(t,t') = theta(t - t') e^{lam (t - t')},  theta(0) = 1/2
//   classical field       m(t)      = f(t,t_obs) / f(t_obs,t_obs) * datum
//
// After integration by parts the derivative parts of the three-boson vertex
// drop out (see the vanishing_lemma diagrams), leaving
//
//   <eps_t>    += -mu Int ds D^b(t,s) [ (w_b/2) lam (m(s)^2 + D^b(s,s)) + w_f D^f(s,s) ]
//   <eps eps'> += -w_b mu lam Int ds D^b(t,s) m(s) D^b(s,t')
//
// with vertex factors w_b (three bosons) and w_f (boson-fermion-fermion).

#include <dfi/errors.hpp>
#include <dfi/gaussian_core.hpp>
#include <dfi/mode_model.hpp>
#include <dfi/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

namespace dfi {

/// Vertex factors of the first-order diagrams.
struct FeynmanWeights {
    double boson_vertex = 6.0;
    double fermion_vertex = 6.0;

    /// Fully symmetrized 3! factors on both vertices (the default).
    static constexpr FeynmanWeights combinatorial() { return {6.0, 6.0}; }

    /// Factors read off the midpoint-discretized path density itself:
    /// the cubic term mu*lam/2 * Int eps^3 gives 3, and the log-Jacobian
    /// mu/2 * Int eps contracted with theta(0) = 1/2 gives 1.
    static constexpr FeynmanWeights path_measure() { return {3.0, 1.0}; }
};

enum class DiagramId {
    mean_tadpole_mm,
    mean_boson_loop,
    mean_fermion_loop,
    cov_tadpole,
    vanishing_lemma_g1,
    vanishing_lemma_g2,
    vanishing_lemma_g3,
};

inline const char* to_string(DiagramId id) {
    switch (id) {
        case DiagramId::mean_tadpole_mm: return "mean_tadpole_mm";
        case DiagramId::mean_boson_loop: return "mean_boson_loop";
        case DiagramId::mean_fermion_loop: return "mean_fermion_loop";
        case DiagramId::cov_tadpole: return "cov_tadpole";
        case DiagramId::vanishing_lemma_g1: return "vanishing_lemma_g1";
        case DiagramId::vanishing_lemma_g2: return "vanishing_lemma_g2";
        case DiagramId::vanishing_lemma_g3: return "vanishing_lemma_g3";
    }
    return "unknown";
}

namespace detail {

inline void require_window(const ModeParams& p, double t, const char* what) {
    if (!(t >= 0.0) || !(t <= p.t_obs)) {
        throw OutOfWindow(std::string(what) + ": time " + std::to_string(t) + " outside [0, t_obs]");
    }
}

/// Free-theory ingredients with f(t_obs, t_obs) evaluated once.
class FreeTheory {
public:
    explicit FreeTheory(const ModeParams& p) : p_(p), f_oo_(prior_kernel(p.lam, p.t_obs, p.t_obs)) {
        p.validate();
    }

    double mean(double s) const { return prior_kernel(p_.lam, s, p_.t_obs) / f_oo_ * p_.datum; }
    double mean_dt(double s) const { return prior_kernel_dtp(p_.lam, p_.t_obs, s) / f_oo_ * p_.datum; }

    double boson(double t, double s) const {
        return prior_kernel(p_.lam, t, s) -
               prior_kernel(p_.lam, t, p_.t_obs) * prior_kernel(p_.lam, s, p_.t_obs) / f_oo_;
    }

    /// d D^b(t, s) / ds, theta(0) = 1/2 at s = t.
    double boson_ds(double t, double s) const {
        return prior_kernel_dtp(p_.lam, t, s) -
               prior_kernel(p_.lam, t, p_.t_obs) * prior_kernel_dtp(p_.lam, p_.t_obs, s) / f_oo_;
    }

    const ModeParams& params() const { return p_; }

private:
    ModeParams p_;
    double f_oo_;
};

}  // namespace detail

/// Bosonic propagator on the window; coincides with posterior_cov_mode there.
inline double bosonic_propagator(const ModeParams& p, double t, double tp) {
    detail::require_window(p, t, "bosonic_propagator");
    detail::require_window(p, tp, "bosonic_propagator");
    return posterior_cov_mode(p, t, tp);
}

/// theta(t - t') e^{lam (t - t')} with theta(0) = 1/2.
inline double fermionic_propagator(double lam, double t, double tp) {
    if (t > tp) return std::exp(lam * (t - tp));
    if (t < tp) return 0.0;
    return 0.5;
}

/// Closed form of the fermion-loop correction at lam = 0:
/// -(w_f / 4) mu t (t_obs - t), i.e. -3/2 mu t (t_obs - t) for the default weights.
inline double mean_correction_lambda0(const ModeParams& p, double t,
                                      FeynmanWeights w = FeynmanWeights::combinatorial()) {
    p.validate();
    if (p.lam != 0.0) throw RequiresLambdaZero("mean_correction_lambda0: lam must be 0");
    detail::require_window(p, t, "mean_correction_lambda0");
    return -0.25 * w.fermion_vertex * p.mu * t * (p.t_obs - t);
}

/// First-order mean shift split by origin.
struct MeanCorrection {
    double bosonic = 0.0;
    double fermionic = 0.0;
    double total() const { return bosonic + fermionic; }
};

inline MeanCorrection mean_correction_parts(const ModeParams& p, double t, const QuadratureSpec& q,
                                            FeynmanWeights w = FeynmanWeights::combinatorial()) {
    detail::require_window(p, t, "mean_correction_general");
    const detail::FreeTheory free(p);
    MeanCorrection out;
    if (p.mu == 0.0) return out;
    if (p.lam != 0.0) {
        const auto boson_integrand = [&](double s) {
            const double m = free.mean(s);
            return free.boson(t, s) * (m * m + free.boson(s, s));
        };
        out.bosonic = -0.5 * w.boson_vertex * p.mu * p.lam * integrate(boson_integrand, 0.0, p.t_obs, q, {t});
    }
    const auto fermion_integrand = [&](double s) { return free.boson(t, s) * fermionic_propagator(p.lam, s, s); };
    out.fermionic = -w.fermion_vertex * p.mu * integrate(fermion_integrand, 0.0, p.t_obs, q, {t});
    return out;
}

/// First-order correction to the posterior mean at time t in [0, t_obs].
inline double mean_correction_general(const ModeParams& p, double t, const QuadratureSpec& q,
                                      FeynmanWeights w = FeynmanWeights::combinatorial()) {
    return mean_correction_parts(p, t, q, w).total();
}

/// First-order correction to the posterior covariance on [0, t_obs]^2.
/// Vanishes identically at lam = 0.
inline double cov_correction_general(const ModeParams& p, double t, double tp, const QuadratureSpec& q,
                                     FeynmanWeights w = FeynmanWeights::combinatorial()) {
    detail::require_window(p, t, "cov_correction_general");
    detail::require_window(p, tp, "cov_correction_general");
    if (p.lam == 0.0 || p.mu == 0.0) return 0.0;
    const detail::FreeTheory free(p);
    const auto integrand = [&](double s) { return free.boson(t, s) * free.mean(s) * free.boson(s, tp); };
    return -w.boson_vertex * p.mu * p.lam * integrate(integrand, 0.0, p.t_obs, q, {t, tp});
}

namespace detail {

inline QuadratureResult diagram_integral(DiagramId id, const ModeParams& p, double t, double tp,
                                         const QuadratureSpec& q, FeynmanWeights w) {
    require_window(p, t, to_string(id));
    require_window(p, tp, to_string(id));
    const FreeTheory free(p);
    const double mu = p.mu;
    const double t_obs = p.t_obs;

    // Boundary-term form Int ds [D^b(t,s) dG/ds + G(s) dD^b(t,s)/ds] for G(s) = g(s,s).
    const auto lemma = [&](auto g, auto dg) {
        const auto integrand = [&](double s) { return free.boson(t, s) * dg(s) + g(s) * free.boson_ds(t, s); };
        return integrate_with_error(integrand, 0.0, t_obs, q, {t, tp});
    };

    switch (id) {
        case DiagramId::mean_tadpole_mm: {
            const auto integrand = [&](double s) {
                const double m = free.mean(s);
                return mu * (2.0 * free.boson(t, s) * m * free.mean_dt(s) + m * m * free.boson_ds(t, s));
            };
            return integrate_with_error(integrand, 0.0, t_obs, q, {t});
        }
        case DiagramId::mean_boson_loop: {
            const auto integrand = [&](double s) {
                return mu * (2.0 * free.boson(t, s) * free.boson_ds(s, s) + free.boson(s, s) * free.boson_ds(t, s));
            };
            return integrate_with_error(integrand, 0.0, t_obs, q, {t});
        }
        case DiagramId::mean_fermion_loop: {
            const auto integrand = [&](double s) {
                return -w.fermion_vertex * mu * free.boson(t, s) * fermionic_propagator(p.lam, s, s);
            };
            return integrate_with_error(integrand, 0.0, t_obs, q, {t});
        }
        case DiagramId::cov_tadpole: {
            const auto integrand = [&](double s) {
                return -w.boson_vertex * mu * p.lam * free.boson(t, s) * free.mean(s) * free.boson(s, tp);
            };
            return integrate_with_error(integrand, 0.0, t_obs, q, {t, tp});
        }
        case DiagramId::vanishing_lemma_g1:
            return lemma([&](double s) { return mu * free.mean(s) * free.mean(s); },
                         [&](double s) { return 2.0 * mu * free.mean(s) * free.mean_dt(s); });
        case DiagramId::vanishing_lemma_g2:
            return lemma([&](double s) { return 0.5 * mu * free.boson(s, s); },
                         [&](double s) { return mu * free.boson_ds(s, s); });
        case DiagramId::vanishing_lemma_g3:
            return lemma([&](double s) { return mu * free.mean(s) * free.boson(s, tp); },
                         [&](double s) {
                             return mu * (free.mean_dt(s) * free.boson(s, tp) + free.mean(s) * free.boson_ds(tp, s));
                         });
    }
    throw InvalidArgument("diagram_integral: unknown diagram");
}

}  // namespace detail

/// Quadrature value of any first-order diagram with its Richardson error estimate.
/// `tp` is the second external time (cov_tadpole, vanishing_lemma_g3).
inline QuadratureResult diagram_value(DiagramId id, const ModeParams& p, double t, const QuadratureSpec& q,
                                      double tp, FeynmanWeights w = FeynmanWeights::combinatorial()) {
    return detail::diagram_integral(id, p, t, tp, q, w);
}

inline QuadratureResult diagram_value(DiagramId id, const ModeParams& p, double t, const QuadratureSpec& q) {
    return diagram_value(id, p, t, q, t);
}

/// Value of one of the diagrams that vanish by the boundary-term argument
/// (a total derivative of g(s,s) D^b(t,s), which is zero at s = 0 and s = t_obs).
inline double vanishing_diagram_value(DiagramId id, const ModeParams& p, double t, const QuadratureSpec& q,
                                      double tp) {
    switch (id) {
        case DiagramId::mean_tadpole_mm:
        case DiagramId::mean_boson_loop:
        case DiagramId::vanishing_lemma_g1:
        case DiagramId::vanishing_lemma_g2:
        case DiagramId::vanishing_lemma_g3: break;
        default: throw InvalidArgument(std::string("vanishing_diagram_value: ") + to_string(id) + " does not vanish");
    }
    return detail::diagram_integral(id, p, t, tp, q, FeynmanWeights::combinatorial()).value;
}

inline double vanishing_diagram_value(DiagramId id, const ModeParams& p, double t, const QuadratureSpec& q) {
    return vanishing_diagram_value(id, p, t, q, t);
}

/// Free moments plus first-order corrections on a grid inside [0, t_obs].
inline PosteriorMoments corrected_moments(const ModeParams& p, const TimeGrid& grid, const QuadratureSpec& q,
                                          FeynmanWeights w = FeynmanWeights::combinatorial()) {
    p.validate();
    if (grid.t1() > p.t_obs) throw OutOfWindow("corrected_moments: grid extends beyond t_obs");
    PosteriorMoments out = closed_form_moments(p, grid);
    out.source = MomentSource::perturbative;
    const auto n = static_cast<Index>(grid.size());
    for (Index i = 0; i < n; ++i) {
        const double ti = grid[static_cast<std::size_t>(i)];
        out.mean(i) += mean_correction_general(p, ti, q, w);
        for (Index j = 0; j <= i; ++j) {
            const double delta = cov_correction_general(p, ti, grid[static_cast<std::size_t>(j)], q, w);
            out.cov(i, j) += delta;
            if (i != j) out.cov(j, i) += delta;
        }
    }
    return out;
}

/// Applies the lattice operator (forward difference - lam) to the lattice
/// causal Green's function theta(i - j) e^{lam (t_i - t_j)}, whose equal-time
/// value is 0 under the forward difference, and returns max |h (L G) - 1|.
/// The residual is O(h).
///
/// The continuum equal-time value 1/2 is the average of the forward lattice
/// value 0 and the backward lattice value 1.
inline double fermionic_inverse_check(double lam, const TimeGrid& grid) {
    if (!std::isfinite(lam)) throw InvalidArgument("fermionic_inverse_check: lam must be finite");
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    const auto green = [&](std::size_t i, std::size_t j) {
        return i > j ? std::exp(lam * (grid[i] - grid[j])) : 0.0;
    };
    double residual = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double applied = (green(i + 1, j) - green(i, j)) - h * lam * green(i, j);
            residual = std::max(residual, std::abs(applied - (i == j ? 1.0 : 0.0)));
        }
    }
    return residual;
}

}  // namespace dfi
