#pragma once

// Brute-force posterior over discretized trajectories of
//
//     d eps / dt = lam * eps + mu * eps^2 / 2 + xi,   eps(0) = 0,   eps(t_obs) = datum.
//
// On a uniform grid with step dt and midpoint values eps_bar_k the path
// information (negative log density up to a constant) is
//
//   H = sum_k dt/2 * ((eps_{k+1} - eps_k)/dt - lam eps_bar_k - mu eps_bar_k^2 / 2)^2
//     + sum_k dt/2 * (lam + mu eps_bar_k)          [log-Jacobian term, optional]
//
// The second sum is -log|det dxi/deps| of the midpoint map from excitations to
// paths, to first order in dt. Dropping it gives the control posterior that
// ignores the functional determinant.

#include <dfi/errors.hpp>
#include <dfi/gaussian_core.hpp>
#include <dfi/mode_model.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

namespace dfi {

/// A trajectory on a uniform grid over [0, t_obs] with pinned endpoints.
struct DiscretePath {
    TimeGrid grid;
    std::vector<double> values;

    void validate(const ModeParams& p) const {
        if (values.size() != grid.size()) throw InvalidArgument("DiscretePath: values do not match grid");
        if (grid.t0() != 0.0 || grid.t1() != p.t_obs) {
            throw InvalidArgument("DiscretePath: grid must span [0, t_obs]");
        }
        if (values.front() != 0.0 || values.back() != p.datum) {
            throw InvalidArgument("DiscretePath: endpoints must be 0 and datum");
        }
    }
};

namespace detail {

/// Information carried by one grid segment [a, b] of length dt.
struct SegmentInformation {
    double lam;
    double mu;
    double dt;
    bool determinant;

    double operator()(double a, double b) const {
        const double mid = 0.5 * (a + b);
        const double residual = (b - a) / dt - lam * mid - 0.5 * mu * mid * mid;
        double value = 0.5 * dt * residual * residual;
        if (determinant) value += 0.5 * dt * (lam + mu * mid);
        return value;
    }
};

inline double path_information_raw(const std::vector<double>& x, const SegmentInformation& seg) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) total += seg(x[k], x[k + 1]);
    return total;
}

}  // namespace detail

inline double path_information(const DiscretePath& path, const ModeParams& p, bool include_determinant) {
    p.validate();
    path.validate(p);
    const detail::SegmentInformation seg{p.lam, p.mu, path.grid.spacing(), include_determinant};
    const double h = detail::path_information_raw(path.values, seg);
    if (!std::isfinite(h)) throw NonFiniteValue("path_information: non-finite value");
    return h;
}

/// Exact posterior of the linear theory on a grid: gaussian_core with
/// Phi_ij = f_lam(t_i, t_j), point evaluation at t_obs and zero noise.
inline PosteriorMoments exact_gaussian_posterior(const ModeParams& p, const TimeGrid& grid) {
    p.validate();
    if (p.mu != 0.0) throw InvalidArgument("exact_gaussian_posterior: requires mu = 0");
    const std::size_t obs = grid.index_of(p.t_obs);
    const auto n = static_cast<Index>(grid.size());
    const CovOperator prior(prior_kernel_matrix(p.lam, grid));
    const auto response = LinearResponse::point_evaluation(n, static_cast<Index>(obs));
    const auto noise = CovOperator::zero(1);
    Vector data(1);
    data(0) = p.datum;
    GaussianPosterior post = wiener_posterior(prior, response, noise, data);
    return {grid, std::move(post.mean), post.cov.matrix(), MomentSource::closed_form, std::nullopt};
}

struct OracleConfig {
    std::size_t n_steps = 200;        ///< grid segments on [0, t_obs]
    std::size_t n_samples = 100000;   ///< recorded states (after thinning)
    std::size_t burn_in = 20000;      ///< iterations discarded while the step size is tuned
    std::uint64_t seed = 1;
    bool include_determinant = true;
    double proposal_scale = 1.0;      ///< initial single-site step in units of sqrt(dt / 2)
    std::optional<double> clamp;      ///< max |eps|; defaults to 10 max(1, |datum|)
    std::size_t thin = 10;            ///< iterations per recorded state
    double redraw_probability = 0.1;  ///< chance an iteration redraws the whole bridge
    std::size_t max_lag = 64;         ///< lags kept for the autocorrelation window
    bool track_covariance = true;
    std::size_t n_chains = 1;         ///< chain c uses seed + c

    double effective_clamp(const ModeParams& p) const {
        return clamp.value_or(10.0 * std::max(1.0, std::abs(p.datum)));
    }

    void validate(const ModeParams& p) const {
        if (n_steps < 50) throw InvalidArgument("OracleConfig: n_steps must be >= 50");
        if (n_samples == 0) throw InvalidArgument("OracleConfig: n_samples must be > 0");
        if (!(proposal_scale > 0.0)) throw InvalidArgument("OracleConfig: proposal_scale must be positive");
        if (thin == 0) throw InvalidArgument("OracleConfig: thin must be >= 1");
        if (!(redraw_probability >= 0.0 && redraw_probability <= 1.0)) {
            throw InvalidArgument("OracleConfig: redraw_probability must lie in [0, 1]");
        }
        if (n_chains == 0) throw InvalidArgument("OracleConfig: n_chains must be >= 1");
        const double c = effective_clamp(p);
        if (!(c > std::abs(p.datum))) throw InvalidArgument("OracleConfig: clamp must exceed |datum|");
        const double dt = p.t_obs / static_cast<double>(n_steps);
        if (!(std::abs(p.lam) * dt < 2.0)) throw InvalidArgument("OracleConfig: |lam| dt must be < 2");
    }
};

/// Moments of a sampled path posterior.
struct PathEnsemble {
    OracleConfig config;
    ModeParams params;
    TimeGrid grid;
    Vector mean;
    Matrix cov;          ///< full covariance if tracked, otherwise diagonal only
    Vector stderr_mean;  ///< zero at the pinned endpoints
    Vector tau;          ///< integrated autocorrelation time per node, in recorded states
    double acceptance_rate = 0.0;
    double site_acceptance = 0.0;
    double redraw_acceptance = 0.0;
    double n_effective = 0.0;  ///< smallest effective sample size over interior nodes
    double site_step = 0.0;    ///< tuned single-site step
    std::size_t n_recorded = 0;

    PosteriorMoments as_moments() const {
        return {grid, mean, cov, MomentSource::oracle, stderr_mean};
    }
};

struct NodeMoments {
    double mean = 0.0;
    double variance = 0.0;
    double stderr_mean = 0.0;
};

inline NodeMoments ensemble_moments(const PathEnsemble& ens, double t) {
    const auto i = static_cast<Index>(ens.grid.index_of(t));
    return {ens.mean(i), ens.cov(i, i), ens.stderr_mean(i)};
}

namespace detail {

/// Deterministic uniform and normal variates on top of mt19937_64, independent
/// of the standard library's distribution implementations.
class Variates {
public:
    explicit Variates(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Exact sampler of the midpoint-discretized linear (mu = 0) bridge:
/// an AR(1) chain eps_{k+1} = a eps_k + s z_k conditioned on eps_N = datum.
class LinearBridge {
public:
    LinearBridge(double lam, double dt, std::size_t n_steps, double datum)
        : datum_(datum), weight_(n_steps + 1) {
        const double denom = 1.0 - 0.5 * lam * dt;
        a_ = (1.0 + 0.5 * lam * dt) / denom;
        s_ = std::sqrt(dt) / denom;
        std::vector<double> var(n_steps + 1, 0.0);
        for (std::size_t k = 0; k < n_steps; ++k) var[k + 1] = a_ * a_ * var[k] + s_ * s_;
        double a_pow = 1.0;
        for (std::size_t k = n_steps + 1; k-- > 0;) {
            weight_[k] = a_pow * var[k] / var[n_steps];
            a_pow *= a_;
        }
    }

    /// Conditional mean of the bridge at every node.
    std::vector<double> mean() const {
        std::vector<double> out(weight_.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = weight_[k] * datum_;
        out.front() = 0.0;
        out.back() = datum_;
        return out;
    }

    void draw(Variates& rng, std::vector<double>& out) const {
        const std::size_t n = weight_.size();
        out.resize(n);
        out[0] = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) out[k + 1] = a_ * out[k] + s_ * rng.normal();
        const double miss = datum_ - out[n - 1];
        for (std::size_t k = 1; k + 1 < n; ++k) out[k] += weight_[k] * miss;
        out[n - 1] = datum_;
    }

private:
    double datum_;
    double a_ = 1.0;
    double s_ = 0.0;
    std::vector<double> weight_;
};

/// Accumulated sums of one chain, centred on a fixed shift.
struct ChainSums {
    std::size_t n = 0;
    Vector sum;
    Vector sum_sq;
    Matrix outer;     // lower triangle of sum y y^T
    Matrix lag_sums;  // row k-1: sum_t y_t * y_{t-k}
    std::size_t site_proposals = 0;
    std::size_t site_accepted = 0;
    std::size_t redraw_proposals = 0;
    std::size_t redraw_accepted = 0;
    double site_step = 0.0;
};

/// Integrated autocorrelation time with Sokal's self-consistent window
/// (smallest M with M >= 5 tau(M)), floored at 1.
inline double integrated_autocorrelation(const ChainSums& s, Index node, std::size_t lags) {
    const double n = static_cast<double>(s.n);
    const double mean = s.sum(node) / n;
    const double var = s.sum_sq(node) / n - mean * mean;
    if (!(var > 0.0)) return 1.0;
    double tau = 1.0;
    for (std::size_t k = 1; k <= lags && k < s.n; ++k) {
        const double cov_k = s.lag_sums(static_cast<Index>(k - 1), node) / (n - static_cast<double>(k)) - mean * mean;
        tau += 2.0 * cov_k / var;
        if (static_cast<double>(k) >= 5.0 * tau) break;
    }
    return std::max(tau, 1.0);
}

class PathChain {
public:
    PathChain(const ModeParams& p, const OracleConfig& cfg, std::uint64_t seed, const std::vector<double>& shift)
        : p_(p),
          cfg_(cfg),
          dt_(p.t_obs / static_cast<double>(cfg.n_steps)),
          clamp_(cfg.effective_clamp(p)),
          full_{p.lam, p.mu, dt_, cfg.include_determinant},
          linear_{p.lam, 0.0, dt_, false},
          bridge_(p.lam, dt_, cfg.n_steps, p.datum),
          rng_(seed),
          shift_(Eigen::Map<const Vector>(shift.data(), static_cast<Index>(shift.size()))),
          lags_(lag_window(cfg)) {}

    /// Lags accumulated online: max_lag, capped at n_samples / 50.
    static std::size_t lag_window(const OracleConfig& cfg) {
        return std::max<std::size_t>(1, std::min(cfg.max_lag, cfg.n_samples / 50));
    }

    ChainSums run() {
        const std::size_t nodes = cfg_.n_steps + 1;
        std::size_t attempts = 0;
        do {
            if (++attempts > 10000) throw ChainDiverged("path oracle: no initial path inside the clamp");
            bridge_.draw(rng_, state_);
        } while (!inside_clamp(state_));
        if (!std::isfinite(residual_information(state_))) throw NonFiniteValue("path oracle: initial state has non-finite information");

        step_ = cfg_.proposal_scale * std::sqrt(0.5 * dt_);
        std::size_t window_proposals = 0;
        std::size_t window_accepted = 0;
        for (std::size_t it = 0; it < cfg_.burn_in; ++it) {
            const auto [site, accepted] = iterate();
            if (!site) continue;
            ++window_proposals;
            window_accepted += accepted ? 1 : 0;
            if (window_proposals == 500) {
                const double rate = static_cast<double>(window_accepted) / 500.0;
                if (rate < 0.3) step_ *= 0.8;
                if (rate > 0.5) step_ *= 1.25;
                window_proposals = window_accepted = 0;
            }
        }

        ChainSums s;
        const auto n = static_cast<Index>(nodes);
        s.sum = Vector::Zero(n);
        s.sum_sq = Vector::Zero(n);
        if (cfg_.track_covariance) s.outer = Matrix::Zero(n, n);
        s.lag_sums = Matrix::Zero(static_cast<Index>(lags_), n);
        Matrix ring = Matrix::Zero(static_cast<Index>(lags_), n);
        Vector y(n);

        for (std::size_t rec = 0; rec < cfg_.n_samples; ++rec) {
            for (std::size_t k = 0; k < cfg_.thin; ++k) {
                const auto [site, accepted] = iterate();
                if (site) {
                    ++s.site_proposals;
                    s.site_accepted += accepted ? 1 : 0;
                } else {
                    ++s.redraw_proposals;
                    s.redraw_accepted += accepted ? 1 : 0;
                }
            }
            for (Index i = 0; i < n; ++i) y(i) = state_[static_cast<std::size_t>(i)] - shift_(i);
            s.sum += y;
            s.sum_sq += y.cwiseProduct(y);
            if (cfg_.track_covariance) s.outer.selfadjointView<Eigen::Lower>().rankUpdate(y);
            const std::size_t available = std::min(rec, lags_);
            for (std::size_t k = 1; k <= available; ++k) {
                const auto slot = static_cast<Index>((rec - k) % lags_);
                s.lag_sums.row(static_cast<Index>(k - 1)) += y.transpose().cwiseProduct(ring.row(slot));
            }
            ring.row(static_cast<Index>(rec % lags_)) = y.transpose();
            ++s.n;
        }
        s.site_step = step_;
        return s;
    }

private:
    struct Outcome {
        bool site;
        bool accepted;
    };

    bool inside_clamp(const std::vector<double>& x) const {
        return std::all_of(x.begin(), x.end(), [&](double v) { return std::abs(v) <= clamp_; });
    }

    double residual_information(const std::vector<double>& x) const {
        return path_information_raw(x, full_) - path_information_raw(x, linear_);
    }

    Outcome iterate() {
        if (rng_.uniform() < cfg_.redraw_probability) return {false, redraw()};
        return {true, site_move()};
    }

    bool site_move() {
        const std::size_t j = 1 + rng_.index(cfg_.n_steps - 1);
        const double old = state_[j];
        const double proposed = old + step_ * rng_.normal();
        const double log_u = std::log(rng_.uniform());
        if (std::abs(proposed) > clamp_) return false;
        const double left = state_[j - 1];
        const double right = state_[j + 1];
        const double before = full_(left, old) + full_(old, right);
        const double after = full_(left, proposed) + full_(proposed, right);
        const double delta = after - before;
        if (!std::isfinite(delta)) throw NonFiniteValue("path oracle: non-finite information change");
        if (log_u < -delta) {
            state_[j] = proposed;
            return true;
        }
        return false;
    }

    // Independence proposal from the exact linear bridge; the acceptance ratio
    // only involves the non-Gaussian residual H - H_linear.
    bool redraw() {
        bridge_.draw(rng_, proposal_);
        const double log_u = std::log(rng_.uniform());
        if (!inside_clamp(proposal_)) return false;
        const double proposed_residual = residual_information(proposal_);
        if (!std::isfinite(proposed_residual)) throw NonFiniteValue("path oracle: non-finite information");
        if (log_u < residual_information(state_) - proposed_residual) {
            std::swap(state_, proposal_);
            return true;
        }
        return false;
    }

    ModeParams p_;
    OracleConfig cfg_;
    double dt_;
    double clamp_;
    SegmentInformation full_;
    SegmentInformation linear_;
    LinearBridge bridge_;
    Variates rng_;
    Vector shift_;
    std::size_t lags_;
    std::vector<double> state_;
    std::vector<double> proposal_;
    double step_ = 0.0;
};

}  // namespace detail

/// Metropolis sampling of the path posterior. Each iteration either redraws the
/// whole path from the exact linear bridge (independence proposal, probability
/// redraw_probability) or perturbs one random interior node. The single-site
/// step is tuned during burn-in towards 30-50% acceptance. States leaving
/// |eps| <= clamp are rejected, so the target is the clamped-domain posterior.
/// Identical configurations reproduce bit-identical ensembles.
inline PathEnsemble mcmc_sample_paths(const ModeParams& p, const OracleConfig& cfg) {
    p.validate();
    cfg.validate(p);
    const TimeGrid grid(0.0, p.t_obs, cfg.n_steps + 1);
    const double dt = grid.spacing();
    const std::vector<double> shift = detail::LinearBridge(p.lam, dt, cfg.n_steps, p.datum).mean();

    std::vector<detail::ChainSums> chains(cfg.n_chains);
    const std::size_t lags = detail::PathChain::lag_window(cfg);
    {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(cfg.n_chains);
        for (std::size_t c = 0; c < cfg.n_chains; ++c) {
            auto task = [&, c] {
                try {
                    detail::PathChain chain(p, cfg, cfg.seed + c, shift);
                    chains[c] = chain.run();
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            };
            if (cfg.n_chains == 1) {
                task();
            } else {
                workers.emplace_back(task);
            }
        }
        for (auto& w : workers) w.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    const auto n = static_cast<Index>(grid.size());
    PathEnsemble ens{cfg, p, grid, Vector::Zero(n), Matrix::Zero(n, n), Vector::Zero(n), Vector::Ones(n)};

    std::size_t total = 0, site_prop = 0, site_acc = 0, redraw_prop = 0, redraw_acc = 0;
    Vector sum = Vector::Zero(n);
    Vector sum_sq = Vector::Zero(n);
    Matrix outer = Matrix::Zero(n, n);
    Vector ess = Vector::Zero(n);
    double step = 0.0;
    for (const auto& s : chains) {
        total += s.n;
        site_prop += s.site_proposals;
        site_acc += s.site_accepted;
        redraw_prop += s.redraw_proposals;
        redraw_acc += s.redraw_accepted;
        sum += s.sum;
        sum_sq += s.sum_sq;
        if (cfg.track_covariance) outer += s.outer;
        for (Index i = 0; i < n; ++i) {
            ess(i) += static_cast<double>(s.n) / detail::integrated_autocorrelation(s, i, lags);
        }
        step += s.site_step / static_cast<double>(cfg.n_chains);
    }

    const double proposals = static_cast<double>(site_prop + redraw_prop);
    ens.acceptance_rate = proposals > 0 ? static_cast<double>(site_acc + redraw_acc) / proposals : 0.0;
    ens.site_acceptance = site_prop > 0 ? static_cast<double>(site_acc) / static_cast<double>(site_prop) : 0.0;
    ens.redraw_acceptance =
        redraw_prop > 0 ? static_cast<double>(redraw_acc) / static_cast<double>(redraw_prop) : 0.0;
    ens.site_step = step;
    ens.n_recorded = total;
    if (proposals > 0 && ens.acceptance_rate < 0.01) {
        throw ChainDiverged("path oracle: more than 99% of proposals rejected after tuning");
    }

    const double count = static_cast<double>(total);
    const Vector centred_mean = sum / count;
    const double bessel = total > 1 ? count / (count - 1.0) : 1.0;
    for (Index i = 0; i < n; ++i) ens.mean(i) = shift[static_cast<std::size_t>(i)] + centred_mean(i);
    if (cfg.track_covariance) {
        Matrix full = outer.selfadjointView<Eigen::Lower>();
        ens.cov = bessel * (full / count - centred_mean * centred_mean.transpose());
    } else {
        ens.cov.diagonal() = bessel * (sum_sq / count - centred_mean.cwiseProduct(centred_mean));
    }
    ens.cov.diagonal() = ens.cov.diagonal().cwiseMax(0.0);
    // pinned endpoints carry no spread at all
    ens.cov.row(0).setZero();
    ens.cov.col(0).setZero();
    ens.cov.row(n - 1).setZero();
    ens.cov.col(n - 1).setZero();

    double min_ess = count;
    for (Index i = 0; i < n; ++i) {
        const double var = ens.cov(i, i);
        ens.tau(i) = ess(i) > 0 ? count / ess(i) : 1.0;
        ens.stderr_mean(i) = var > 0.0 ? std::sqrt(var / ess(i)) : 0.0;
        if (i > 0 && i < n - 1) min_ess = std::min(min_ess, ess(i));
    }
    ens.n_effective = min_ess;
    return ens;
}

}  // namespace dfi
