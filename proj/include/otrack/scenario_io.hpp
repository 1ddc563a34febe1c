#pragma once

#include "otrack/analysis.hpp"
#include "otrack/sde_sim.hpp"
#include "otrack/synthesis.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace otrack {

struct SimParams {
    double dt = 1e-3;
    double horizon = 30.0;
    int trials = 200;
    std::uint64_t seed = 1;
    double epsilon = 1e-2;
};

/// On-disk scenario: everything needed to validate, synthesize and simulate.
struct ScenarioFile {
    LeaderModel leader;
    std::vector<FollowerModel> followers;
    Topology topology;
    NoiseModel noise;
    SynthesisOptions synthesis;
    SimParams sim;
    InitialState initial;
};

class ScenarioParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

ScenarioFile parse_scenario_json(const std::string& text);
std::string scenario_to_json(const ScenarioFile& file);

ScenarioFile load_scenario_file(const std::string& path);
void save_scenario_file(const std::string& path, const ScenarioFile& file);

/// Gain sets round-trip through JSON so synthesis output can be reused.
std::string gains_to_json(const GainSet& gains);
GainSet parse_gains_json(const std::string& text);

/// Named presets: "example-4.1" (the aircraft fleet with printed gains as
/// overrides) and "example-4.1-noadditive" (additive intensities zeroed).
std::optional<ScenarioFile> preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

/// Runs the regulator solves and gain assembly described by the scenario's
/// synthesis section and returns a simulation-ready Scenario.
Scenario build_scenario(const ScenarioFile& file);

}  // namespace otrack
