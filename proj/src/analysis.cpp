#include "otrack/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace otrack {

namespace {

struct McAccumulation {
    std::vector<double> sum;
    std::vector<double> sumsq;
    int completed = 0;
    int divergent = 0;
};

// Trials are farmed out to worker threads but merged strictly in trial
// order, so results do not depend on scheduling or thread count.
McAccumulation run_monte_carlo(
    const Simulator& sim, int trials, std::uint64_t seed, double dt,
    std::size_t n_steps, std::size_t channels,
    const std::function<void(std::size_t, const SimState&, double*)>& extract,
    int threads_opt) {
    if (trials < 2) throw std::invalid_argument("monte carlo: need at least 2 trials");
    const std::size_t rows = n_steps + 1;
    McAccumulation acc;
    acc.sum.assign(rows * channels, 0.0);
    acc.sumsq.assign(rows * channels, 0.0);

    int threads = threads_opt > 0
                      ? threads_opt
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min({threads, trials, 16});

    std::mutex mu;
    std::condition_variable cv;
    int next_claim = 0;
    int next_commit = 0;

    auto worker = [&]() {
        std::vector<double> buf(rows * channels, 0.0);
        for (;;) {
            int trial;
            {
                std::lock_guard<std::mutex> lk(mu);
                if (next_claim >= trials) return;
                trial = next_claim++;
            }
            const bool ok = sim.run_trial(
                seed, static_cast<std::uint64_t>(trial), dt, n_steps,
                [&](std::size_t s, const SimState& st) {
                    extract(s, st, buf.data() + s * channels);
                });
            std::unique_lock<std::mutex> lk(mu);
            cv.wait(lk, [&] { return next_commit == trial; });
            if (ok) {
                for (std::size_t k = 0; k < rows * channels; ++k) {
                    acc.sum[k] += buf[k];
                    acc.sumsq[k] += buf[k] * buf[k];
                }
                ++acc.completed;
            } else {
                ++acc.divergent;
            }
            ++next_commit;
            cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    if (acc.completed == 0)
        throw std::runtime_error("monte carlo: all trials divergent");
    return acc;
}

std::size_t step_count(double dt, double horizon) {
    if (dt <= 0.0 || dt > horizon)
        throw std::invalid_argument("monte carlo: require 0 < dt <= horizon");
    return static_cast<std::size_t>(std::llround(horizon / dt));
}

double se_of_mean(double sum, double sumsq, int n) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    return std::sqrt(var / (n - 1));
}

}  // namespace

MseSeries monte_carlo_mse(const Scenario& scenario, int trials, std::uint64_t seed,
                          double dt, double horizon, const McOptions& opts) {
    const Simulator sim(scenario);
    const std::size_t n_steps = step_count(dt, horizon);
    const std::size_t nf = scenario.followers.size();
    const Matrix& c0 = scenario.leader.c0;

    auto extract = [&](std::size_t, const SimState& st, double* out) {
        for (std::size_t i = 0; i < nf; ++i) {
            const Vector err = scenario.followers[i].c * st.x[i] - c0 * st.x0;
            out[i] = err.squaredNorm();
        }
    };
    const McAccumulation acc =
        run_monte_carlo(sim, trials, seed, dt, n_steps, nf, extract, opts.threads);

    MseSeries series;
    series.trials = trials;
    series.divergent = acc.divergent;
    const int n = acc.completed;
    series.t.resize(n_steps + 1);
    series.mse.assign(n_steps + 1, std::vector<double>(nf));
    series.se.assign(n_steps + 1, std::vector<double>(nf));
    for (std::size_t s = 0; s <= n_steps; ++s) {
        series.t[s] = static_cast<double>(s) * dt;
        for (std::size_t i = 0; i < nf; ++i) {
            const double su = acc.sum[s * nf + i];
            const double sq = acc.sumsq[s * nf + i];
            series.mse[s][i] = su / n;
            series.se[s][i] = se_of_mean(su, sq, n);
        }
    }
    return series;
}

MomentSeries monte_carlo_delta_moments(const Scenario& scenario, int component,
                                       int trials, std::uint64_t seed, double dt,
                                       double horizon, const McOptions& opts) {
    if (component < 0 || component >= scenario.leader.state_dim())
        throw std::invalid_argument("monte_carlo_delta_moments: bad component");
    const Simulator sim(scenario);
    const std::size_t n_steps = step_count(dt, horizon);
    const std::size_t nf = scenario.followers.size();
    const std::size_t channels = 2 * nf;  // delta and delta^2 per follower

    auto extract = [&](std::size_t, const SimState& st, double* out) {
        for (std::size_t i = 0; i < nf; ++i) {
            const double d = st.xhat0[i](component) - st.x0(component);
            out[2 * i] = d;
            out[2 * i + 1] = d * d;
        }
    };
    const McAccumulation acc =
        run_monte_carlo(sim, trials, seed, dt, n_steps, channels, extract, opts.threads);

    MomentSeries series;
    series.trials = trials;
    series.divergent = acc.divergent;
    const int n = acc.completed;
    series.t.resize(n_steps + 1);
    series.mean.assign(n_steps + 1, std::vector<double>(nf));
    series.mean_se.assign(n_steps + 1, std::vector<double>(nf));
    series.second.assign(n_steps + 1, std::vector<double>(nf));
    series.second_se.assign(n_steps + 1, std::vector<double>(nf));
    for (std::size_t s = 0; s <= n_steps; ++s) {
        series.t[s] = static_cast<double>(s) * dt;
        for (std::size_t i = 0; i < nf; ++i) {
            const double su = acc.sum[s * channels + 2 * i];
            const double sq = acc.sumsq[s * channels + 2 * i];
            series.mean[s][i] = su / n;
            series.mean_se[s][i] = se_of_mean(su, sq, n);
            const double su2 = acc.sum[s * channels + 2 * i + 1];
            const double sq2 = acc.sumsq[s * channels + 2 * i + 1];
            series.second[s][i] = su2 / n;
            series.second_se[s][i] = se_of_mean(su2, sq2, n);
        }
    }
    return series;
}

std::vector<double> plateau_estimate(const MseSeries& series, double tail_fraction) {
    if (tail_fraction <= 0.0 || tail_fraction >= 1.0)
        throw std::invalid_argument("plateau_estimate: tail_fraction must be in (0,1)");
    if (series.t.empty()) throw std::invalid_argument("plateau_estimate: empty series");
    const double start = (1.0 - tail_fraction) * series.t.back() - 1e-12;
    const std::size_t nf = series.n_followers();
    std::vector<double> out(nf, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < series.t.size(); ++s) {
        if (series.t[s] < start) continue;
        for (std::size_t i = 0; i < nf; ++i)
            out[i] = std::max(out[i], series.mse[s][i]);
    }
    return out;
}

double tracking_time_estimate(const MseSeries& series, double epsilon) {
    if (epsilon <= 0.0)
        throw std::invalid_argument("tracking_time_estimate: epsilon must be positive");
    const std::size_t nf = series.n_followers();
    std::size_t last_violation = series.t.size();  // sentinel: none
    for (std::size_t s = series.t.size(); s-- > 0;) {
        bool ok = true;
        for (std::size_t i = 0; i < nf; ++i)
            if (series.mse[s][i] > epsilon) ok = false;
        if (!ok) {
            last_violation = s;
            break;
        }
    }
    if (last_violation == series.t.size()) return 0.0;
    if (last_violation + 1 >= series.t.size())
        return std::numeric_limits<double>::infinity();
    return series.t[last_violation + 1];
}

double scalar_mean_closed_form(const ScalarParams& p, double delta0_mean, double t) {
    const double rate = p.a0 - p.k * p.c0;
    if (rate == 0.0)
        throw std::invalid_argument("scalar_mean_closed_form: a0 = k c0 divides by zero");
    const double q = p.k * p.k * p.sigma_i0 * p.upsilon_i0 * p.c0 / rate;
    return std::exp(rate * t) * (delta0_mean + q) - q;
}

double scalar_msq_exponent(const ScalarParams& p) {
    return 2.0 * p.a0 - 2.0 * p.g * p.c0 +
           p.g * p.g * p.sigma_i0 * p.sigma_i0 * p.c0 * p.c0;
}

double exponent_regression(const std::vector<double>& t,
                           const std::vector<double>& values, double window_start,
                           double window_end) {
    if (t.size() != values.size())
        throw std::invalid_argument("exponent_regression: length mismatch");
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < window_start - 1e-12 || t[k] > window_end + 1e-12) continue;
        if (values[k] <= 0.0)
            throw std::invalid_argument(
                "exponent_regression: nonpositive value inside the window");
        const double y = std::log(values[k]);
        st += t[k];
        sy += y;
        stt += t[k] * t[k];
        sty += t[k] * y;
        ++n;
    }
    if (n < 2) throw std::invalid_argument("exponent_regression: window too small");
    const double denom = n * stt - st * st;
    if (denom == 0.0) throw std::invalid_argument("exponent_regression: degenerate window");
    return (n * sty - st * sy) / denom;
}

void write_mse_csv(std::ostream& os, const MseSeries& series) {
    const std::size_t nf = series.n_followers();
    os << "t";
    for (std::size_t i = 1; i <= nf; ++i) os << ",mse_" << i << ",se_" << i;
    os << "\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (std::size_t s = 0; s < series.t.size(); ++s) {
        put(series.t[s]);
        for (std::size_t i = 0; i < nf; ++i) {
            os << ",";
            put(series.mse[s][i]);
            os << ",";
            put(series.se[s][i]);
        }
        os << "\n";
    }
}

}  // namespace otrack
