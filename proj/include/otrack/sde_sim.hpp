#pragma once

#include "otrack/graph.hpp"
#include "otrack/numerics.hpp"
#include "otrack/plant.hpp"
#include "otrack/synthesis.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

namespace otrack {

struct InitialState {
    Vector x0;                   // leader state
    std::vector<Vector> x;       // follower states
    std::vector<Vector> xhat;    // self-observer states
    std::vector<Vector> xhat0;   // distributed leader-observer states
};

struct Scenario {
    LeaderModel leader;
    std::vector<FollowerModel> followers;
    Topology topology;
    NoiseModel noise;
    GainSet gains;
    InitialState initial;
};

/// Throws on any broken dimension chain (K1_i: mi x ni, G: n x p, ...).
void validate_scenario(const Scenario& s);

struct SimState {
    Vector x0;
    std::vector<Vector> x;
    std::vector<Vector> xhat;
    std::vector<Vector> xhat0;
};

struct TrajectoryRecord {
    std::vector<double> t;
    std::vector<Vector> x0;
    std::vector<std::vector<Vector>> x;      // [step][follower]
    std::vector<std::vector<Vector>> xhat;
    std::vector<std::vector<Vector>> xhat0;
    std::optional<std::size_t> divergent_at;

    std::size_t steps() const { return t.size(); }
    Vector leader_output(const Matrix& c0, std::size_t step) const;
    Vector follower_output(const Matrix& ci, std::size_t step, std::size_t i) const;
};

/// One Brownian increment per (l, i, j) label; l = 1 additive, l = 2
/// multiplicative; j = 0 is the leader edge.
using NoiseIncrementFn = std::function<double(int l, int i, int j)>;

/// Seeded, label-addressed normal increment streams. Distinct
/// (trial, l, i, j) labels give independent streams; identical seeds
/// reproduce identical draws.
class RngPlan {
  public:
    RngPlan(std::uint64_t master_seed, std::uint64_t trial);

    /// Standard normal draw on the stream labelled (l, i, j).
    double normal(int l, int i, int j);

  private:
    struct Stream {
        std::uint64_t s[4];
        bool has_spare = false;
        double spare = 0.0;
    };
    Stream& stream(int l, int i, int j);

    std::uint64_t master_;
    std::uint64_t trial_;
    std::vector<std::pair<std::uint64_t, Stream>> streams_;  // key -> state
};

class Simulator {
  public:
    explicit Simulator(const Scenario& scenario);

    /// Single Euler-Maruyama update; increments are consumed as
    /// sqrt(dt) * normal per labelled edge. Returns false when the new state
    /// is non-finite or exceeds the divergence threshold.
    bool step(SimState& state, double dt, const NoiseIncrementFn& dw) const;

    SimState initial_state() const;

    /// Full trajectory on the uniform grid; bit-reproducible for a fixed
    /// seed. Divergence aborts the trial and is flagged on the record.
    TrajectoryRecord simulate(std::uint64_t seed, double dt, double horizon,
                              std::uint64_t trial = 0) const;

    /// Streaming variant: `extract` is called once per grid point with the
    /// current state; returns false if the trial diverged (extraction stops
    /// at the divergent step).
    bool run_trial(std::uint64_t seed, std::uint64_t trial, double dt,
                   std::size_t n_steps,
                   const std::function<void(std::size_t, const SimState&)>& extract) const;

    const Scenario& scenario() const { return *scenario_; }

    static constexpr double kDivergenceThreshold = 1e12;

  private:
    struct Workspace {
        SimState next;
        std::vector<Vector> u;
        Vector y0;
        Vector rel;
        Vector mix;
    };
    Workspace make_workspace() const;
    bool step_into(const SimState& state, SimState& next, Workspace& ws, double dt,
                   const NoiseIncrementFn& dw) const;

    const Scenario* scenario_;
    struct EdgeNoise {
        int j;               // source node, 0 = leader
        Vector upsilon;      // additive intensity (p)
        double sigma;        // multiplicative intensity
    };
    std::vector<std::vector<EdgeNoise>> edges_;  // per follower, leader edge first
};

/// CSV with header t, y0_1..y0_p, y{i}_1..y{i}_p, err{i}_sq, ...
void write_trajectory_csv(std::ostream& os, const Scenario& scenario,
                          const TrajectoryRecord& record);

}  // namespace otrack
