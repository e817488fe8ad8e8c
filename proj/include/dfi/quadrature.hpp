#pragma once

// Composite Newton-Cotes rules over [a, b] split at mandatory breakpoints.
//
// Integrands of the perturbative corrections are smooth except for kinks or
// jumps at a few known times. Every such time is made a panel boundary, and
// the end nodes of each sub-interval are evaluated one ulp inside it so that a
// jump contributes its one-sided limits rather than its midpoint value.

#include <dfi/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace dfi {

enum class QuadratureScheme { composite_trapezoid, composite_simpson };

struct QuadratureSpec {
    std::size_t n_panels = 512;
    QuadratureScheme scheme = QuadratureScheme::composite_simpson;
    std::vector<double> breakpoints;  ///< sorted; each becomes a panel boundary

    void validate() const {
        if (n_panels < 16) throw InvalidArgument("QuadratureSpec: n_panels must be >= 16");
        if (scheme == QuadratureScheme::composite_simpson && n_panels % 2 != 0) {
            throw InvalidArgument("QuadratureSpec: simpson needs an even n_panels");
        }
        if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) {
            throw InvalidArgument("QuadratureSpec: breakpoints must be sorted");
        }
    }

    /// Nominal convergence order of the scheme on smooth panels.
    int order() const { return scheme == QuadratureScheme::composite_simpson ? 4 : 2; }

    QuadratureSpec refined(std::size_t factor = 2) const {
        QuadratureSpec out = *this;
        out.n_panels *= factor;
        return out;
    }
};

namespace detail {

template <class F>
double newton_cotes(const F& f, double a, double b, std::size_t panels, QuadratureScheme scheme) {
    const double h = (b - a) / static_cast<double>(panels);
    const double fa = f(std::nextafter(a, b));
    const double fb = f(std::nextafter(b, a));
    double sum = 0.0;
    if (scheme == QuadratureScheme::composite_trapezoid) {
        sum = 0.5 * (fa + fb);
        for (std::size_t k = 1; k < panels; ++k) sum += f(a + h * static_cast<double>(k));
        return h * sum;
    }
    sum = fa + fb;
    for (std::size_t k = 1; k < panels; ++k) {
        sum += ((k % 2 == 1) ? 4.0 : 2.0) * f(a + h * static_cast<double>(k));
    }
    return h * sum / 3.0;
}

}  // namespace detail

/// Integral of f over [a, b]. Panel boundaries include every breakpoint of
/// `spec` and of `extra_breakpoints` that falls strictly inside (a, b); panels
/// are shared out in proportion to sub-interval length.
template <class F>
double integrate(const F& f, double a, double b, const QuadratureSpec& spec,
                 std::initializer_list<double> extra_breakpoints = {}) {
    spec.validate();
    if (!(b > a)) {
        if (a == b) return 0.0;
        throw InvalidArgument("integrate: requires a <= b");
    }
    std::vector<double> cuts{a, b};
    for (double c : spec.breakpoints) {
        if (c > a && c < b) cuts.push_back(c);
    }
    for (double c : extra_breakpoints) {
        if (c > a && c < b) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const bool simpson = spec.scheme == QuadratureScheme::composite_simpson;
    const double length = b - a;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        auto panels = static_cast<std::size_t>(
            std::llround(static_cast<double>(spec.n_panels) * (hi - lo) / length));
        panels = std::max<std::size_t>(panels, 2);
        if (simpson && panels % 2 != 0) ++panels;
        total += detail::newton_cotes(f, lo, hi, panels, spec.scheme);
    }
    return total;
}

/// Value together with a Richardson estimate of its discretization error,
/// obtained from a second evaluation at half the panel count.
struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

template <class F>
QuadratureResult integrate_with_error(const F& f, double a, double b, const QuadratureSpec& spec,
                                      std::initializer_list<double> extra_breakpoints = {}) {
    QuadratureSpec coarse = spec;
    coarse.n_panels = std::max<std::size_t>(16, spec.n_panels / 2);
    if (coarse.scheme == QuadratureScheme::composite_simpson && coarse.n_panels % 2 != 0) ++coarse.n_panels;
    const double fine = integrate(f, a, b, spec, extra_breakpoints);
    const double rough = integrate(f, a, b, coarse, extra_breakpoints);
    const double denom = std::pow(2.0, spec.order()) - 1.0;
    return {fine, std::abs(fine - rough) / denom};
}

}  // namespace dfi
