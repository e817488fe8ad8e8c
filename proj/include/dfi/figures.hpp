#pragma once

// Tables behind the command-line front end: closed-form posteriors (Fig. 1
// style sweeps), first-order corrected moments (Fig. 2 style sweeps) and
// sampled path posteriors compared against theory.

#include <dfi/errors.hpp>
#include <dfi/mode_model.hpp>
#include <dfi/path_oracle.hpp>
#include <dfi/perturbation.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace dfi::figures {

/// Rows of numbers under named columns, ordered by lam then t.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/// 17 significant digits, so every double round-trips; nan and inf spelled out.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c > 0) out += ',';
        out += table.columns[c];
    }
    out += "\r\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) out += ',';
            out += format_number(row[c]);
        }
        out += "\r\n";
    }
    return out;
}

/// Uniform times on [0, t_max].
inline TimeGrid sweep_grid(double t_max, std::size_t n) {
    if (!(t_max > 0.0)) throw InvalidArgument("sweep grid: t_max must be positive");
    return TimeGrid(0.0, t_max, n);
}

/// Columns lam, t, prior_var, post_mean, post_var, rel_uncert for the linear
/// mode. rel_uncert is nan where the posterior mean vanishes.
inline Table posterior_table(const std::vector<double>& lams, const ModeParams& base, const TimeGrid& grid) {
    if (base.mu != 0.0) throw InvalidArgument("posterior: requires mu = 0");
    Table table{{"lam", "t", "prior_var", "post_mean", "post_var", "rel_uncert"}, {}};
    for (double lam : lams) {
        ModeParams p = base;
        p.lam = lam;
        p.validate();
        for (double t : grid.points()) {
            const double mean = posterior_mean_mode(p, t);
            const double var = equal_time_uncertainty(p, t);
            const double rel = mean == 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(var) / std::abs(mean);
            table.rows.push_back({lam, t, prior_variance(lam, t), mean, var, rel});
        }
    }
    return table;
}

/// Columns lam, t, free_mean, free_var, corrected_mean, corrected_var and,
/// with `bosonic_only`, the mean corrected by the boson diagrams alone.
inline Table corrected_table(const std::vector<double>& lams, const ModeParams& base, const TimeGrid& grid,
                             const QuadratureSpec& q, FeynmanWeights w, bool bosonic_only) {
    if (grid.t1() > base.t_obs) throw OutOfWindow("corrected moments: t_max exceeds t_obs");
    Table table{{"lam", "t", "free_mean", "free_var", "corrected_mean", "corrected_var"}, {}};
    if (bosonic_only) table.columns.push_back("bosonic_only_mean");
    for (double lam : lams) {
        ModeParams p = base;
        p.lam = lam;
        p.validate();
        for (double t : grid.points()) {
            const double free_mean = posterior_mean_mode(p, t);
            const double free_var = equal_time_uncertainty(p, t);
            const MeanCorrection shift = mean_correction_parts(p, t, q, w);
            const double var = free_var + cov_correction_general(p, t, t, q, w);
            std::vector<double> row{lam, t, free_mean, free_var, free_mean + shift.total(), var};
            if (bosonic_only) row.push_back(free_mean + shift.bosonic);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

/// Sampler diagnostics of one lam value.
struct OracleRun {
    double lam = 0.0;
    std::uint64_t seed = 0;
    double acceptance_rate = 0.0;
    double site_acceptance = 0.0;
    double redraw_acceptance = 0.0;
    double n_effective = 0.0;
    double max_tau = 0.0;
    std::size_t n_recorded = 0;
};

struct OracleTable {
    Table table;
    std::vector<OracleRun> runs;
};

/// Columns lam, t, mcmc_mean, mcmc_stderr, mcmc_var, theory_mean, z_score on
/// the sampler grid. theory_mean is the closed form for mu = 0 and the
/// first-order corrected mean otherwise.
inline OracleTable oracle_table(const std::vector<double>& lams, const ModeParams& base, const OracleConfig& cfg,
                                const QuadratureSpec& q, FeynmanWeights w) {
    OracleTable out{{{"lam", "t", "mcmc_mean", "mcmc_stderr", "mcmc_var", "theory_mean", "z_score"}, {}}, {}};
    for (double lam : lams) {
        ModeParams p = base;
        p.lam = lam;
        const PathEnsemble ens = mcmc_sample_paths(p, cfg);
        out.runs.push_back({lam, cfg.seed, ens.acceptance_rate, ens.site_acceptance, ens.redraw_acceptance,
                            ens.n_effective, ens.tau.maxCoeff(), ens.n_recorded});
        for (std::size_t i = 0; i < ens.grid.size(); ++i) {
            const double t = ens.grid[i];
            const auto k = static_cast<Index>(i);
            double theory = posterior_mean_mode(p, t);
            if (p.mu != 0.0) theory += mean_correction_general(p, t, q, w);
            const double diff = ens.mean(k) - theory;
            const double se = ens.stderr_mean(k);
            double z = 0.0;
            if (se > 0.0) {
                z = diff / se;
            } else if (diff != 0.0) {
                z = std::numeric_limits<double>::quiet_NaN();
            }
            out.table.rows.push_back({lam, t, ens.mean(k), se, ens.cov(k, k), theory, z});
        }
    }
    return out;
}

}  // namespace dfi::figures
