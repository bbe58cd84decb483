#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "abdex/graph.hpp"
#include "abdex/state.hpp"

namespace abdex {

// What the symbolic layer hands an expert: who investigates what, with a
// serialized excerpt of the current belief state for shared context.
struct Instruction {
    std::string expert;
    std::string directive;
    NodeId focus;
    std::string focus_label;
    std::string belief_digest;
};

// One tool invocation result. The engine assigns the definitive
// event_index when it records the observation into the trace.
struct Observation {
    std::string action_key;
    std::string payload;
    std::uint64_t event_index = 0;
};

// A single analytical claim: this observation supports or refutes that
// hypothesis with the given strength. observation_event is the slot index
// into the investigate() result until the engine rewrites it to the global
// trace index.
struct Finding {
    std::string hypothesis_label;
    bool supports = true;
    double strength = 0.0;
    std::uint64_t observation_event = 0;
};

struct Analysis {
    std::string expert;
    std::vector<Finding> findings;
};

struct Report {
    std::string prediction;
    std::string narrative;
};

struct Initialization {
    std::vector<std::string> symptom_labels;
    std::vector<HypothesisSpec> hypotheses;  // level-1, with priors
};

/// The cognitive-layer port: everything the symbolic engine may ask of the
/// central agent and its experts. One instance serves one episode;
/// implementations must be independently instantiable so batch runs can
/// parallelize without shared state.
class CognitionPort {
public:
    virtual ~CognitionPort() = default;

    virtual void begin_episode(const std::string& episode_id) = 0;

    /// Optional hook: implementations that talk to external services may
    /// log their (redacted) wire exchanges into the episode trace.
    virtual void attach_trace(struct EpisodeTrace* /*trace*/) {}

    /// Derives the initial level-1 hypotheses from the surface symptoms.
    virtual Initialization initialize_hypotheses(
        const std::vector<std::string>& symptoms) = 0;

    /// Central-agent planning: which experts investigate the focus, and how.
    virtual std::vector<Instruction> plan(NodeId focus, const BeliefGraph& g) = 0;

    /// Expert execution: at most `budget` tool actions, plus the expert's
    /// synthesis of what those observations mean. Every finding must cite
    /// one of the returned observations. Budget truncation is silent.
    virtual std::pair<std::vector<Observation>, Analysis> investigate(
        const Instruction& instruction, std::uint32_t budget) = 0;

    /// Central-agent aggregation: turns the iteration's analyses into one
    /// atomic graph update. `observations` carry their final trace indices,
    /// as do the finding citations.
    virtual GraphUpdate propose_update(const std::vector<Analysis>& analyses,
                                       const std::vector<Observation>& observations,
                                       const BeliefGraph& g) = 0;

    /// Next-level sub-hypotheses refining `top`. Called only on drill-down.
    virtual std::vector<HypothesisSpec> refine_hypotheses(NodeId top,
                                                          const BeliefGraph& g) = 0;

    /// Whether `top` is already concrete enough to resolve the query.
    virtual bool check_granularity(NodeId top, const BeliefGraph& g) = 0;

    virtual Report report(const BeliefGraph& g, const MachineState& s) = 0;
};

}  // namespace abdex
