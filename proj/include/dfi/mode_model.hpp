#pragma once

// Closed-form statistics of a single dynamical eigenmode
//
//     d eps / dt = lam * eps + xi,   eps(0) = 0,   <xi(t) xi(t')> = delta(t - t'),
//
// observed once, without noise, at t_obs (eps(t_obs) = datum).

#include <dfi/errors.hpp>
#include <dfi/gaussian_core.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dfi {

/// Parameters of the idealized one-mode system.
struct ModeParams {
    double lam = 0.0;    ///< Lyapunov exponent (1/time)
    double mu = 0.0;     ///< quadratic coupling of the drift lam*eps + mu*eps^2/2
    double t_obs = 1.0;  ///< time of the perfect measurement
    double datum = 1.0;  ///< measured value eps(t_obs)

    void validate() const {
        if (!std::isfinite(lam) || !std::isfinite(mu) || !std::isfinite(t_obs) || !std::isfinite(datum)) {
            throw InvalidArgument("ModeParams: all fields must be finite");
        }
        if (!(t_obs > 0.0)) throw InvalidArgument("ModeParams: t_obs must be positive");
    }
};

/// Uniform grid of n >= 2 points on [t0, t1], 0 <= t0 < t1.
class TimeGrid {
public:
    TimeGrid(double t0, double t1, std::size_t n) : t0_(t0), t1_(t1), n_(n) {
        if (!std::isfinite(t0) || !std::isfinite(t1)) throw InvalidArgument("TimeGrid: non-finite bounds");
        if (t0 < 0.0) throw InvalidArgument("TimeGrid: t0 must be >= 0");
        if (!(t1 > t0)) throw InvalidArgument("TimeGrid: t1 must exceed t0");
        if (n < 2) throw InvalidArgument("TimeGrid: need at least two points");
    }

    double t0() const { return t0_; }
    double t1() const { return t1_; }
    std::size_t size() const { return n_; }
    double spacing() const { return (t1_ - t0_) / static_cast<double>(n_ - 1); }

    double operator[](std::size_t i) const {
        if (i + 1 == n_) return t1_;
        return t0_ + ((t1_ - t0_) * static_cast<double>(i)) / static_cast<double>(n_ - 1);
    }

    std::vector<double> points() const {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = (*this)[i];
        return out;
    }

    /// Index of the node at time t (within 1e-9 of the spacing), else NotAGridNode.
    std::size_t index_of(double t) const {
        const double pos = (t - t0_) / spacing();
        const double nearest = std::round(pos);
        if (!(nearest >= 0.0) || nearest > static_cast<double>(n_ - 1) || std::abs(pos - nearest) > 1e-9) {
            throw NotAGridNode("time " + std::to_string(t) + " is not a grid node");
        }
        return static_cast<std::size_t>(nearest);
    }

    bool contains_node(double t) const {
        try {
            (void)index_of(t);
            return true;
        } catch (const NotAGridNode&) {
            return false;
        }
    }

private:
    double t0_;
    double t1_;
    std::size_t n_;
};

enum class MomentSource { closed_form, perturbative, oracle };

inline const char* to_string(MomentSource s) {
    switch (s) {
        case MomentSource::closed_form: return "closed_form";
        case MomentSource::perturbative: return "perturbative";
        case MomentSource::oracle: return "oracle";
    }
    return "unknown";
}

/// Mean and covariance of eps on a grid.
struct PosteriorMoments {
    TimeGrid grid;
    Vector mean;
    Matrix cov;
    MomentSource source = MomentSource::closed_form;
    std::optional<Vector> stderr_mean;  // oracle only

    double variance(std::size_t i) const { return cov(static_cast<Index>(i), static_cast<Index>(i)); }
};

namespace detail {

inline void require_nonnegative_times(double t, double tp, const char* what) {
    if (!(t >= 0.0) || !(tp >= 0.0)) throw InvalidArgument(std::string(what) + ": times must be >= 0");
}

}  // namespace detail

/// Prior correlation f_lam(t, t') = (e^{lam (t+t')} - e^{lam |t-t'|}) / (2 lam),
/// which is min(t, t') at lam = 0. Near lam = 0 a second-order expansion in lam
/// is used so the function is continuous through lam = 0.
inline double prior_kernel(double lam, double t, double tp) {
    detail::require_nonnegative_times(t, tp, "prior_kernel");
    const double lo = std::min(t, tp);
    const double sum = t + tp;
    if (std::abs(lam) * sum < 1e-6) {
        const double diff = std::abs(t - tp);
        return lo + lam * t * tp + lam * lam * (sum * sum * sum - diff * diff * diff) / 12.0;
    }
    return std::exp(lam * std::abs(t - tp)) * std::expm1(2.0 * lam * lo) / (2.0 * lam);
}

/// d f_lam(t, t') / d t'. The kink at t' = t takes the midpoint value, i.e. the
/// Heaviside step is read as theta(0) = 1/2.
inline double prior_kernel_dtp(double lam, double t, double tp) {
    detail::require_nonnegative_times(t, tp, "prior_kernel_dtp");
    const double sign = (t > tp) ? 1.0 : (t < tp ? -1.0 : 0.0);
    return 0.5 * (std::exp(lam * (t + tp)) + sign * std::exp(lam * std::abs(t - tp)));
}

/// Prior variance f_lam(t, t).
inline double prior_variance(double lam, double t) { return prior_kernel(lam, t, t); }

/// Posterior mean of the measured mode, f(t, t_obs) / f(t_obs, t_obs) * datum.
/// This is the linear (mu-free) theory; p.mu is ignored.
inline double posterior_mean_mode(const ModeParams& p, double t) {
    p.validate();
    detail::require_nonnegative_times(t, t, "posterior_mean_mode");
    if (t == p.t_obs) return p.datum;
    return prior_kernel(p.lam, t, p.t_obs) / prior_kernel(p.lam, p.t_obs, p.t_obs) * p.datum;
}

/// Time derivative of posterior_mean_mode.
inline double posterior_mean_mode_dt(const ModeParams& p, double t) {
    p.validate();
    return prior_kernel_dtp(p.lam, p.t_obs, t) / prior_kernel(p.lam, p.t_obs, p.t_obs) * p.datum;
}

/// Posterior covariance f(t,t') - f(t,t_obs) f(t',t_obs) / f(t_obs,t_obs) of the
/// linear theory. Exactly zero for times on opposite sides of t_obs.
inline double posterior_cov_mode(const ModeParams& p, double t, double tp) {
    p.validate();
    detail::require_nonnegative_times(t, tp, "posterior_cov_mode");
    if ((t < p.t_obs && tp > p.t_obs) || (tp < p.t_obs && t > p.t_obs)) return 0.0;
    const double f_oo = prior_kernel(p.lam, p.t_obs, p.t_obs);
    return prior_kernel(p.lam, t, tp) - prior_kernel(p.lam, t, p.t_obs) * prior_kernel(p.lam, tp, p.t_obs) / f_oo;
}

/// Posterior variance at time t (kernel composition, clipped at 0 against rounding).
inline double equal_time_uncertainty(const ModeParams& p, double t) {
    return std::max(0.0, posterior_cov_mode(p, t, t));
}

/// sqrt(posterior variance) / |posterior mean|.
inline double relative_uncertainty(const ModeParams& p, double t) {
    if (!(t > 0.0)) throw InvalidArgument("relative_uncertainty: t must be positive");
    const double mean = posterior_mean_mode(p, t);
    if (mean == 0.0) throw UndefinedRatio("relative_uncertainty: posterior mean is zero");
    return std::sqrt(equal_time_uncertainty(p, t)) / std::abs(mean);
}

/// Noise-free solution of d eps/dt = mu eps^2 / 2 from eps(t_i) = eps_i.
/// Empty once the trajectory has reached its singularity at t_i + 2 / (eps_i mu).
inline std::optional<double> free_nonlinear_solution(double eps_i, double mu, double t_i, double t) {
    if (!(t >= t_i)) throw InvalidArgument("free_nonlinear_solution: requires t >= t_i");
    const double denom = 1.0 - 0.5 * eps_i * mu * (t - t_i);
    if (!(denom > 0.0)) return std::nullopt;
    return eps_i / denom;
}

/// Singular time 2 / (eps_i mu) after t_i, if the trajectory blows up at all.
inline std::optional<double> blow_up_time(double eps_i, double mu) {
    if (!(eps_i * mu > 0.0)) return std::nullopt;
    return 2.0 / (eps_i * mu);
}

/// Closed-form posterior moments of the linear theory sampled on a grid.
inline PosteriorMoments closed_form_moments(const ModeParams& p, const TimeGrid& grid) {
    p.validate();
    const auto n = static_cast<Index>(grid.size());
    Vector mean(n);
    Matrix cov(n, n);
    for (Index i = 0; i < n; ++i) {
        const double ti = grid[static_cast<std::size_t>(i)];
        mean(i) = posterior_mean_mode(p, ti);
        for (Index j = 0; j <= i; ++j) {
            cov(i, j) = cov(j, i) = posterior_cov_mode(p, ti, grid[static_cast<std::size_t>(j)]);
        }
        cov(i, i) = std::max(0.0, cov(i, i));
    }
    return {grid, std::move(mean), std::move(cov), MomentSource::closed_form, std::nullopt};
}

/// Prior covariance matrix Phi_ij = f_lam(t_i, t_j) on a grid.
inline Matrix prior_kernel_matrix(double lam, const TimeGrid& grid) {
    const auto n = static_cast<Index>(grid.size());
    Matrix phi(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j <= i; ++j) {
            phi(i, j) = phi(j, i) =
                prior_kernel(lam, grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)]);
        }
    }
    return phi;
}

}  // namespace dfi
