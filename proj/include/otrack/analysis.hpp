#pragma once

#include "otrack/scalar_params.hpp"
#include "otrack/sde_sim.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace otrack {

struct McOptions {
    int threads = 0;  // 0 = hardware concurrency
};

/// Pointwise Monte Carlo estimates of E||y_i(t) - y_0(t)||^2 with
/// per-trial-batch standard errors. Divergent trials are excluded from the
/// moments but counted.
struct MseSeries {
    std::vector<double> t;
    std::vector<std::vector<double>> mse;  // [step][follower]
    std::vector<std::vector<double>> se;
    int trials = 0;
    int divergent = 0;

    std::size_t n_followers() const { return mse.empty() ? 0 : mse.front().size(); }
};

MseSeries monte_carlo_mse(const Scenario& scenario, int trials, std::uint64_t seed,
                          double dt, double horizon, const McOptions& opts = {});

/// First and second moments of a scalar observer-error channel
/// delta_i(t) = (xhat_i0(t) - x0(t))(component), per follower.
struct MomentSeries {
    std::vector<double> t;
    std::vector<std::vector<double>> mean;       // [step][follower]
    std::vector<std::vector<double>> mean_se;
    std::vector<std::vector<double>> second;     // E[delta^2]
    std::vector<std::vector<double>> second_se;
    int trials = 0;
    int divergent = 0;
};

MomentSeries monte_carlo_delta_moments(const Scenario& scenario, int component,
                                       int trials, std::uint64_t seed, double dt,
                                       double horizon, const McOptions& opts = {});

/// Conservative limsup proxy: maximum of the estimates over the trailing
/// tail_fraction of the horizon, per follower.
std::vector<double> plateau_estimate(const MseSeries& series, double tail_fraction);

/// Smallest grid time after which every follower's estimate stays <= epsilon;
/// +infinity when the tail never settles.
double tracking_time_estimate(const MseSeries& series, double epsilon);

/// E[delta_i(t)] as displayed in the scalar star analysis:
/// e^{(a0 - k c0) t} (E[delta(0)] + q) - q with
/// q = k^2 sigma_i0 Upsilon_i0 c0 / (a0 - k c0).
double scalar_mean_closed_form(const ScalarParams& p, double delta0_mean, double t);

/// Exponent of E[|delta_i(t)|^2] = e^{(2 a0 - 2 G c0 + G^2 sigma_i0^2 c0^2) t}
/// E[|delta_i(0)|^2] for the noise-free-additive scalar star loop.
double scalar_msq_exponent(const ScalarParams& p);

/// Least-squares slope of log(values) against t restricted to
/// [window_start, window_end]. Throws on nonpositive values in the window.
double exponent_regression(const std::vector<double>& t,
                           const std::vector<double>& values, double window_start,
                           double window_end);

/// CSV with header t, mse_1, se_1, ..., mse_N, se_N.
void write_mse_csv(std::ostream& os, const MseSeries& series);

}  // namespace otrack
