#include "otrack/sde_sim.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace otrack {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// xoshiro256++
std::uint64_t xoshiro_next(std::uint64_t s[4]) {
    const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double uniform_open(std::uint64_t s[4]) {
    // (0, 1]: never zero, safe under log().
    return (static_cast<double>(xoshiro_next(s) >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

RngPlan::RngPlan(std::uint64_t master_seed, std::uint64_t trial)
    : master_(master_seed), trial_(trial) {}

RngPlan::Stream& RngPlan::stream(int l, int i, int j) {
    const std::uint64_t key = (static_cast<std::uint64_t>(l) << 40) ^
                              (static_cast<std::uint64_t>(i) << 20) ^
                              static_cast<std::uint64_t>(j);
    for (auto& [k, st] : streams_)
        if (k == key) return st;
    Stream st;
    std::uint64_t h = mix64(master_);
    h = mix64(h ^ trial_);
    h = mix64(h ^ key);
    for (int w = 0; w < 4; ++w) {
        h = mix64(h);
        st.s[w] = h;
    }
    streams_.emplace_back(key, st);
    return streams_.back().second;
}

double RngPlan::normal(int l, int i, int j) {
    Stream& st = stream(l, i, j);
    if (st.has_spare) {
        st.has_spare = false;
        return st.spare;
    }
    const double u1 = uniform_open(st.s);
    const double u2 = uniform_open(st.s);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    st.spare = r * std::sin(theta);
    st.has_spare = true;
    return r * std::cos(theta);
}

void validate_scenario(const Scenario& s) {
    validate_dimensions(s.leader, s.followers);
    const auto n = s.leader.state_dim();
    const auto p = s.leader.output_dim();
    const auto nf = s.followers.size();
    if (static_cast<size_t>(s.topology.n_followers) != nf)
        throw std::invalid_argument("scenario: topology size mismatch");
    if (s.gains.k1.size() != nf || s.gains.k2.size() != nf || s.gains.h.size() != nf)
        throw std::invalid_argument("scenario: gain count mismatch");
    if (s.gains.g1.rows() != n || s.gains.g1.cols() != p ||
        s.gains.g2.rows() != n || s.gains.g2.cols() != p)
        throw std::invalid_argument("scenario: G1/G2 must be n x p");
    for (size_t i = 0; i < nf; ++i) {
        const auto& f = s.followers[i];
        if (s.gains.k1[i].rows() != f.input_dim() || s.gains.k1[i].cols() != f.state_dim())
            throw std::invalid_argument("scenario: K1 dimension mismatch");
        if (s.gains.k2[i].rows() != f.input_dim() || s.gains.k2[i].cols() != n)
            throw std::invalid_argument("scenario: K2 dimension mismatch");
        if (s.gains.h[i].rows() != f.state_dim() || s.gains.h[i].cols() != p)
            throw std::invalid_argument("scenario: H dimension mismatch");
    }
    if (s.initial.x0.size() != n)
        throw std::invalid_argument("scenario: x0(0) dimension mismatch");
    if (s.initial.x.size() != nf || s.initial.xhat.size() != nf ||
        s.initial.xhat0.size() != nf)
        throw std::invalid_argument("scenario: initial state count mismatch");
    for (size_t i = 0; i < nf; ++i) {
        if (s.initial.x[i].size() != s.followers[i].state_dim() ||
            s.initial.xhat[i].size() != s.followers[i].state_dim() ||
            s.initial.xhat0[i].size() != n)
            throw std::invalid_argument("scenario: initial state dimension mismatch");
        if (!s.initial.x[i].allFinite() || !s.initial.xhat[i].allFinite() ||
            !s.initial.xhat0[i].allFinite())
            throw std::invalid_argument("scenario: initial state has non-finite entries");
    }
    for (const auto& [e, v] : s.noise.additive) {
        if (v.size() != p)
            throw std::invalid_argument("scenario: additive noise vector must have length p");
        if (e.first < 1 || e.first > static_cast<int>(nf) || e.second < 0 ||
            e.second > static_cast<int>(nf))
            throw std::invalid_argument("scenario: noise edge index out of range");
        const bool exists = e.second == 0 ? s.topology.has_leader_link(e.first)
                                          : s.topology.has_edge(e.first, e.second);
        if (!exists)
            throw std::invalid_argument("scenario: noise on edge absent from topology");
    }
    for (const auto& [e, v] : s.noise.multiplicative) {
        const bool exists = e.second == 0 ? s.topology.has_leader_link(e.first)
                                          : s.topology.has_edge(e.first, e.second);
        if (!exists)
            throw std::invalid_argument("scenario: noise on edge absent from topology");
    }
}

Vector TrajectoryRecord::leader_output(const Matrix& c0, std::size_t step) const {
    return c0 * x0.at(step);
}

Vector TrajectoryRecord::follower_output(const Matrix& ci, std::size_t step,
                                         std::size_t i) const {
    return ci * x.at(step).at(i);
}

Simulator::Simulator(const Scenario& scenario) : scenario_(&scenario) {
    validate_scenario(scenario);
    const int nf = scenario.topology.n_followers;
    const Eigen::Index p = scenario.leader.output_dim();
    edges_.resize(static_cast<size_t>(nf));
    for (int i = 1; i <= nf; ++i) {
        auto& list = edges_[static_cast<size_t>(i - 1)];
        if (scenario.topology.has_leader_link(i))
            list.push_back(EdgeNoise{0, scenario.noise.additive_on({i, 0}, p),
                                     scenario.noise.multiplicative_on({i, 0})});
        for (int j = 1; j <= nf; ++j)
            if (scenario.topology.has_edge(i, j))
                list.push_back(EdgeNoise{j, scenario.noise.additive_on({i, j}, p),
                                         scenario.noise.multiplicative_on({i, j})});
    }
}

SimState Simulator::initial_state() const {
    return SimState{scenario_->initial.x0, scenario_->initial.x,
                    scenario_->initial.xhat, scenario_->initial.xhat0};
}

Simulator::Workspace Simulator::make_workspace() const {
    const auto& sc = *scenario_;
    const size_t nf = sc.followers.size();
    Workspace ws;
    ws.next = initial_state();
    ws.u.resize(nf);
    for (size_t i = 0; i < nf; ++i) ws.u[i] = Vector::Zero(sc.followers[i].input_dim());
    ws.y0 = Vector::Zero(sc.leader.output_dim());
    ws.rel = Vector::Zero(sc.leader.output_dim());
    ws.mix = Vector::Zero(sc.leader.output_dim());
    return ws;
}

bool Simulator::step_into(const SimState& state, SimState& next, Workspace& ws,
                          double dt, const NoiseIncrementFn& dw) const {
    const auto& sc = *scenario_;
    const size_t nf = sc.followers.size();
    const double sqdt = std::sqrt(dt);

    ws.y0.noalias() = sc.leader.c0 * state.x0;
    for (size_t i = 0; i < nf; ++i) {
        ws.u[i].noalias() = sc.gains.k1[i] * state.xhat[i];
        ws.u[i].noalias() += sc.gains.k2[i] * state.xhat0[i];
    }

    next.x0 = state.x0;
    next.x0.noalias() += dt * (sc.leader.a0 * state.x0);
    bool finite = next.x0.allFinite() && next.x0.norm() < kDivergenceThreshold;
    for (size_t i = 0; i < nf; ++i) {
        const auto& f = sc.followers[i];
        next.x[i] = state.x[i];
        next.x[i].noalias() += dt * (f.a * state.x[i]);
        next.x[i].noalias() += dt * (f.b * ws.u[i]);
        next.xhat[i] = state.xhat[i];
        next.xhat[i].noalias() += dt * (f.a * state.xhat[i]);
        next.xhat[i].noalias() += dt * (f.b * ws.u[i]);
        ws.rel.noalias() = f.c * state.x[i];
        ws.rel.noalias() -= f.c * state.xhat[i];
        next.xhat[i].noalias() += dt * (sc.gains.h[i] * ws.rel);

        next.xhat0[i] = state.xhat0[i];
        next.xhat0[i].noalias() += dt * (sc.leader.a0 * state.xhat0[i]);
        const int fi = static_cast<int>(i) + 1;
        for (const auto& e : edges_[i]) {
            // Relative output the edge observes: neighbour estimate for a
            // follower edge, the true leader output for the leader edge.
            if (e.j == 0) {
                ws.rel = ws.y0;
                ws.rel.noalias() -= sc.leader.c0 * state.xhat0[i];
            } else {
                ws.rel.noalias() =
                    sc.leader.c0 * state.xhat0[static_cast<size_t>(e.j - 1)];
                ws.rel.noalias() -= sc.leader.c0 * state.xhat0[i];
            }
            const Matrix& g = e.j == 0 ? sc.gains.g2 : sc.gains.g1;
            const double w1 = sqdt * dw(1, fi, e.j);
            const double w2 = sqdt * dw(2, fi, e.j);
            ws.mix = (dt + e.sigma * w2) * ws.rel;
            ws.mix.noalias() += w1 * e.upsilon;
            next.xhat0[i].noalias() += g * ws.mix;
        }
        finite = finite && next.x[i].allFinite() && next.xhat[i].allFinite() &&
                 next.xhat0[i].allFinite() &&
                 next.x[i].norm() < kDivergenceThreshold &&
                 next.xhat[i].norm() < kDivergenceThreshold &&
                 next.xhat0[i].norm() < kDivergenceThreshold;
    }
    return finite;
}

bool Simulator::step(SimState& state, double dt, const NoiseIncrementFn& dw) const {
    Workspace ws = make_workspace();
    SimState next = initial_state();
    if (!step_into(state, next, ws, dt, dw)) return false;
    state = next;
    return true;
}

bool Simulator::run_trial(std::uint64_t seed, std::uint64_t trial, double dt,
                          std::size_t n_steps,
                          const std::function<void(std::size_t, const SimState&)>& extract)
    const {
    RngPlan rng(seed, trial);
    SimState state = initial_state();
    Workspace ws = make_workspace();
    extract(0, state);
    NoiseIncrementFn dw = [&rng](int l, int i, int j) { return rng.normal(l, i, j); };
    for (std::size_t s = 0; s < n_steps; ++s) {
        if (!step_into(state, ws.next, ws, dt, dw)) return false;
        std::swap(state, ws.next);
        extract(s + 1, state);
    }
    return true;
}

TrajectoryRecord Simulator::simulate(std::uint64_t seed, double dt, double horizon,
                                     std::uint64_t trial) const {
    if (dt <= 0.0 || dt > horizon)
        throw std::invalid_argument("simulate: require 0 < dt <= horizon");
    const auto n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    TrajectoryRecord rec;
    rec.t.reserve(n_steps + 1);
    rec.x0.reserve(n_steps + 1);
    rec.x.reserve(n_steps + 1);
    rec.xhat.reserve(n_steps + 1);
    rec.xhat0.reserve(n_steps + 1);
    std::size_t recorded = 0;
    const bool ok = run_trial(seed, trial, dt, n_steps,
                              [&](std::size_t s, const SimState& st) {
                                  rec.t.push_back(static_cast<double>(s) * dt);
                                  rec.x0.push_back(st.x0);
                                  rec.x.push_back(st.x);
                                  rec.xhat.push_back(st.xhat);
                                  rec.xhat0.push_back(st.xhat0);
                                  recorded = s;
                              });
    if (!ok) rec.divergent_at = recorded + 1;
    return rec;
}

void write_trajectory_csv(std::ostream& os, const Scenario& scenario,
                          const TrajectoryRecord& record) {
    const Eigen::Index p = scenario.leader.output_dim();
    const size_t nf = scenario.followers.size();
    os << "t";
    for (Eigen::Index k = 1; k <= p; ++k) os << ",y0_" << k;
    for (size_t i = 1; i <= nf; ++i) {
        for (Eigen::Index k = 1; k <= p; ++k) os << ",y" << i << "_" << k;
        os << ",err" << i << "_sq";
    }
    os << "\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (std::size_t s = 0; s < record.steps(); ++s) {
        put(record.t[s]);
        const Vector y0 = record.leader_output(scenario.leader.c0, s);
        for (Eigen::Index k = 0; k < p; ++k) {
            os << ",";
            put(y0(k));
        }
        for (size_t i = 0; i < nf; ++i) {
            const Vector yi = record.follower_output(scenario.followers[i].c, s, i);
            for (Eigen::Index k = 0; k < p; ++k) {
                os << ",";
                put(yi(k));
            }
            os << ",";
            put((yi - y0).squaredNorm());
        }
        os << "\n";
    }
}

}  // namespace otrack
