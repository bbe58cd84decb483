#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "abdex/cognition.hpp"
#include "abdex/graph.hpp"
#include "abdex/oracle.hpp"
#include "abdex/scenario.hpp"
#include "abdex/state.hpp"
#include "abdex/trace.hpp"

namespace abdex {

// Engine variants mirroring the framework's component switches.
enum class Ablation { NoFocus, NoGraph, NoStateMachine };

inline const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::NoFocus: return "no_focus";
        case Ablation::NoGraph: return "no_graph";
        case Ablation::NoStateMachine: return "no_state_machine";
    }
    return "?";
}

inline Ablation parse_ablation(const std::string& s) {
    if (s == "no_focus") return Ablation::NoFocus;
    if (s == "no_graph") return Ablation::NoGraph;
    if (s == "no_state_machine") return Ablation::NoStateMachine;
    throw ValidationError("unknown ablation '" + s + "'");
}

enum class CognitionBackend { Oracle, Remote };

struct RunConfig {
    TransitionParams params;
    std::set<Ablation> ablations;
    std::uint64_t seed = 0;
    CognitionBackend cognition = CognitionBackend::Oracle;
    OracleWeights oracle_weights;
    // Remote gateway knobs; credentials come from the environment.
    std::uint32_t remote_timeout_seconds = 30;
    std::uint32_t remote_retries = 2;

    bool ablated(Ablation a) const { return ablations.count(a) > 0; }
};

struct EpisodeResult {
    Report report;
    EpisodeTrace trace;
    BeliefGraph final_graph;
    MachineState final_state;
};

namespace detail {

// Focus under the configured variant: most-recent (max id) without the
// graph, seeded-uniform without the focus rule, confidence argmax otherwise.
inline NodeId select_focus(const BeliefGraph& g, std::uint32_t level, const RunConfig& cfg,
                           std::mt19937_64& rng) {
    auto hs = g.hypotheses_at(level);
    if (hs.empty()) throw EmptyLevelError("no hypothesis at level " + std::to_string(level));
    if (cfg.ablated(Ablation::NoGraph)) return hs.back();
    if (cfg.ablated(Ablation::NoFocus)) return hs[rng() % hs.size()];
    return g.reasoning_focus(level);
}

// The gate's top-ranked hypothesis; under the flat-list variant this is the
// current (most recent) focus rather than the argmax.
inline NodeId select_top(const BeliefGraph& g, std::uint32_t level, const RunConfig& cfg) {
    auto hs = g.hypotheses_at(level);
    if (hs.empty()) throw EmptyLevelError("no hypothesis at level " + std::to_string(level));
    if (cfg.ablated(Ablation::NoGraph)) return hs.back();
    return g.confidence_gap(level).first;
}

inline double gap_for(const BeliefGraph& g, std::uint32_t level, NodeId top) {
    double second = 0.0;
    for (NodeId id : g.hypotheses_at(level))
        if (id != top) second = std::max(second, g.conf(id));
    return g.conf(top) - second;
}

inline GraphUpdate children_update(const BeliefGraph& g, NodeId parent, std::uint32_t level,
                                   const std::vector<HypothesisSpec>& refined) {
    GraphUpdate u;
    std::uint64_t next = g.next_id().value;
    for (const HypothesisSpec& spec : refined) {
        Node child;
        child.id = NodeId{next++};
        child.kind = NodeKind::Hypothesis;
        child.label = spec.label;
        child.level = level + 1;
        child.confidence = spec.prior;
        u.new_nodes.push_back(child);
        u.new_edges.push_back(Edge{parent, child.id, EdgeKind::Refine});
    }
    return u;
}

}  // namespace detail

/// Runs one full diagnostic episode: initialization, the bounded
/// investigate/update/convert loop, and the final report. The trace records
/// every event with a logical index and is sufficient to replay the final
/// graph byte-for-byte.
inline EpisodeResult run_episode(const Scenario& scenario, const RunConfig& cfg,
                                 CognitionPort* cognition = nullptr) {
    std::unique_ptr<CognitionPort> owned;
    if (!cognition) {
        if (cfg.cognition != CognitionBackend::Oracle)
            throw CognitionFailureError(
                "remote cognition requires an externally constructed gateway");
        owned = std::make_unique<ScriptedOracle>(scenario, cfg.oracle_weights);
        cognition = owned.get();
    }

    TransitionParams params = cfg.params;
    if (scenario.expert_budget) params.expert_budget = *scenario.expert_budget;

    const std::string episode_id = scenario.id + "#" + std::to_string(cfg.seed);
    cognition->begin_episode(episode_id);

    EpisodeTrace trace;
    trace.episode_id = episode_id;
    cognition->attach_trace(&trace);

    std::set<std::uint64_t> observation_indices;
    ProvenanceResolver resolver = [&](const ProvenanceToken& tok) {
        return tok.episode_id == episode_id && observation_indices.count(tok.event_index) > 0;
    };

    std::vector<std::string> ablation_names;
    for (Ablation a : cfg.ablations) ablation_names.push_back(to_string(a));
    trace.append(event::kInit,
                 json{{"scenario", scenario.id},
                      {"seed", cfg.seed},
                      {"params",
                       {{"gap_delta", params.gap_delta},
                        {"min_support", params.min_support},
                        {"max_iterations", params.max_iterations},
                        {"expert_budget", params.expert_budget}}},
                      {"ablations", ablation_names}});

    // Initialization: symptom complex plus derived level-1 hypotheses.
    Initialization init = cognition->initialize_hypotheses(scenario.surface_symptoms);
    BeliefGraph g;
    {
        GraphUpdate u;
        std::uint64_t next = g.next_id().value;
        std::vector<NodeId> symptom_ids;
        for (const std::string& label : init.symptom_labels) {
            Node n;
            n.id = NodeId{next++};
            n.kind = NodeKind::Symptom;
            n.label = label;
            symptom_ids.push_back(n.id);
            u.new_nodes.push_back(std::move(n));
        }
        for (const HypothesisSpec& spec : init.hypotheses) {
            Node n;
            n.id = NodeId{next++};
            n.kind = NodeKind::Hypothesis;
            n.label = spec.label;
            n.level = 1;
            n.confidence = spec.prior;
            for (NodeId s : symptom_ids)
                u.new_edges.push_back(Edge{s, n.id, EdgeKind::Derive});
            u.new_nodes.push_back(std::move(n));
        }
        g = g.apply_update(u, resolver);
        trace.append(event::kGraphUpdated, json{{"update", update_to_json(u)}});
    }

    MachineState s;
    s.level = 1;
    s.iteration = 0;
    s.params = params;

    std::mt19937_64 rng(cfg.seed ^ std::hash<std::string>{}(scenario.id));

    bool terminated = false;
    while (!terminated && s.iteration < params.max_iterations) {
        const std::uint32_t iteration = s.iteration + 1;

        NodeId focus = detail::select_focus(g, s.level, cfg, rng);
        trace.append(event::kFocusSelected, json{{"node", focus.value},
                                                 {"label", g.node(focus).label},
                                                 {"level", s.level},
                                                 {"iteration", iteration}});

        std::vector<Instruction> instructions = cognition->plan(focus, g);
        std::vector<Observation> observations;
        std::vector<Analysis> analyses;
        for (const Instruction& ins : instructions) {
            trace.append(event::kInstructionIssued, json{{"expert", ins.expert},
                                                         {"directive", ins.directive},
                                                         {"focus", ins.focus.value}});
            auto [obs, analysis] = cognition->investigate(ins, params.expert_budget);
            std::vector<std::uint64_t> slot_to_index(obs.size(), 0);
            for (std::size_t slot = 0; slot < obs.size(); ++slot) {
                trace.append(event::kToolCall, json{{"action", obs[slot].action_key},
                                                    {"expert", ins.expert},
                                                    {"iteration", iteration}});
                std::uint64_t idx = trace.append(
                    event::kObservationRecorded,
                    json{{"action", obs[slot].action_key}, {"payload", obs[slot].payload}});
                observation_indices.insert(idx);
                slot_to_index[slot] = idx;
                obs[slot].event_index = idx;
            }
            for (Finding& f : analysis.findings) {
                if (f.observation_event >= slot_to_index.size())
                    throw InvariantViolationError("analysis cites an unreturned observation");
                f.observation_event = slot_to_index[f.observation_event];
            }
            observations.insert(observations.end(), obs.begin(), obs.end());
            analyses.push_back(std::move(analysis));
        }

        GraphUpdate update = cognition->propose_update(analyses, observations, g);
        g = g.apply_update(update, resolver);
        trace.append(event::kGraphUpdated, json{{"update", update_to_json(update)}});

        if (cfg.ablated(Ablation::NoStateMachine)) {
            // No gate, no backtracking: depth follows granularity alone.
            s.iteration = iteration;
            NodeId top = detail::select_top(g, s.level, cfg);
            if (cognition->check_granularity(top, g)) {
                terminated = true;
                trace.append(event::kTerminated, json{{"level", s.level}});
            } else {
                auto refined = cognition->refine_hypotheses(top, g);
                GraphUpdate cu = detail::children_update(g, top, s.level, refined);
                g = g.apply_update(cu, resolver);
                trace.append(event::kGraphUpdated, json{{"update", update_to_json(cu)}});
                s.level += 1;
                trace.append(event::kDrilledDown,
                             json{{"new_level", s.level}, {"parent", top.value}});
            }
            continue;
        }

        if (cfg.ablations.empty()) {
            // Unablated path goes through the canonical state conversion.
            bool granularity_ok = false;
            std::vector<HypothesisSpec> refined;
            if (!check_backtrack(g, s, focus) &&
                check_drilldown(g, s) == DrillDecision::Proceed) {
                NodeId top = g.confidence_gap(s.level).first;
                granularity_ok = cognition->check_granularity(top, g);
                if (!granularity_ok) refined = cognition->refine_hypotheses(top, g);
            }
            StepResult r = step(g, s, granularity_ok, refined);
            g = std::move(r.graph);
            s = r.state;
            switch (r.transition.kind) {
                case TransitionKind::Backtrack: {
                    std::vector<std::uint64_t> removed;
                    for (NodeId id : r.removed) removed.push_back(id.value);
                    trace.append(event::kBacktracked,
                                 json{{"l_star", r.transition.level}, {"removed", removed}});
                    break;
                }
                case TransitionKind::DrillDown:
                    trace.append(event::kGraphUpdated,
                                 json{{"update", update_to_json(*r.applied_update)}});
                    trace.append(event::kDrilledDown,
                                 json{{"new_level", s.level},
                                      {"parent", r.applied_update->new_edges.front().src.value}});
                    break;
                case TransitionKind::Terminate:
                    terminated = true;
                    trace.append(event::kTerminated, json{{"level", s.level}});
                    break;
                case TransitionKind::Stay:
                    trace.append(event::kStayed, json{{"level", s.level}});
                    break;
            }
            continue;
        }

        // Ablated variants of the state conversion (focus rule and/or
        // support counts disabled; backtracking needs the graph).
        s.iteration = iteration;
        if (!cfg.ablated(Ablation::NoGraph)) {
            if (auto l_star = check_backtrack(g, s, focus)) {
                auto [pruned, removed] = g.prune_below(*l_star);
                g = std::move(pruned);
                s.level = *l_star;
                std::vector<std::uint64_t> ids;
                for (NodeId id : removed) ids.push_back(id.value);
                trace.append(event::kBacktracked, json{{"l_star", *l_star}, {"removed", ids}});
                continue;
            }
        }
        NodeId top = detail::select_top(g, s.level, cfg);
        const double gap = detail::gap_for(g, s.level, top);
        const bool support_ok =
            cfg.ablated(Ablation::NoGraph) || g.support_count(top) >= params.min_support;
        if (gap > params.gap_delta && support_ok) {
            if (cognition->check_granularity(top, g)) {
                terminated = true;
                trace.append(event::kTerminated, json{{"level", s.level}});
            } else {
                auto refined = cognition->refine_hypotheses(top, g);
                GraphUpdate cu = detail::children_update(g, top, s.level, refined);
                g = g.apply_update(cu, resolver);
                trace.append(event::kGraphUpdated, json{{"update", update_to_json(cu)}});
                s.level += 1;
                trace.append(event::kDrilledDown,
                             json{{"new_level", s.level}, {"parent", top.value}});
            }
        } else {
            trace.append(event::kStayed, json{{"level", s.level}});
        }
    }

    Report report = cognition->report(g, s);
    if (cfg.ablated(Ablation::NoGraph))
        report.prediction = g.node(detail::select_top(g, s.level, cfg)).label;
    trace.append(event::kReported, json{{"prediction", report.prediction},
                                        {"narrative", report.narrative},
                                        {"level", s.level},
                                        {"iterations", s.iteration},
                                        {"terminated", terminated}});

    return EpisodeResult{std::move(report), std::move(trace), std::move(g), s};
}

/// Reconstructs the final belief graph from a recorded trace by re-applying
/// every graph update and backtrack prune, validating observation grounding
/// along the way.
inline BeliefGraph replay(const EpisodeTrace& trace) {
    if (trace.events.empty() || trace.events.back().type != event::kReported)
        throw CorruptTraceError("trace does not end with a report event");

    BeliefGraph g;
    std::set<std::uint64_t> observation_indices;
    ProvenanceResolver resolver = [&](const ProvenanceToken& tok) {
        return tok.episode_id == trace.episode_id &&
               observation_indices.count(tok.event_index) > 0;
    };
    try {
        for (const TraceEvent& ev : trace.events) {
            if (ev.type == event::kObservationRecorded) {
                observation_indices.insert(ev.index);
            } else if (ev.type == event::kGraphUpdated) {
                g = g.apply_update(update_from_json(ev.data.at("update")), resolver);
            } else if (ev.type == event::kBacktracked) {
                g = g.prune_below(ev.data.at("l_star").get<std::uint32_t>()).first;
            }
        }
    } catch (const json::exception& e) {
        throw CorruptTraceError(std::string("malformed event payload: ") + e.what());
    } catch (const Error& e) {
        throw CorruptTraceError(std::string("trace does not replay cleanly: ") + e.what());
    }
    return g;
}

}  // namespace abdex
