#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "abdex/graph.hpp"

namespace abdex {

// The two drill-down thresholds plus the run budgets. Defaults match the
// shipped configuration; everything is overridable per run.
struct TransitionParams {
    double gap_delta = 0.2;            // confidence gap the top hypothesis must clear
    std::uint32_t min_support = 2;     // minimum distinct supporting evidence
    std::uint32_t max_iterations = 3;  // loop passes per episode
    std::uint32_t expert_budget = 3;   // tool actions per expert per iteration
};

// Current investigation level plus the iteration counter.
struct MachineState {
    std::uint32_t level = 1;
    std::uint32_t iteration = 0;
    TransitionParams params;
};

enum class TransitionKind { Stay, DrillDown, Backtrack, Terminate };

struct Transition {
    TransitionKind kind = TransitionKind::Stay;
    std::uint32_t level = 1;  // new level after the transition

    static Transition stay(std::uint32_t level) { return {TransitionKind::Stay, level}; }
    static Transition drill_down(std::uint32_t new_level) {
        return {TransitionKind::DrillDown, new_level};
    }
    static Transition backtrack(std::uint32_t l_star) {
        return {TransitionKind::Backtrack, l_star};
    }
    static Transition terminate(std::uint32_t level) {
        return {TransitionKind::Terminate, level};
    }
};

inline const char* to_string(TransitionKind k) {
    switch (k) {
        case TransitionKind::Stay: return "stay";
        case TransitionKind::DrillDown: return "drill_down";
        case TransitionKind::Backtrack: return "backtrack";
        case TransitionKind::Terminate: return "terminate";
    }
    return "?";
}

// A fine-grained child hypothesis proposed by the cognitive layer.
struct HypothesisSpec {
    std::string label;
    double prior = 0.0;
};

/// Scans the focus lineage for a demoted ancestor: one that strictly lost
/// the argmax of its sibling group. Returns the shallowest such level.
/// Ties keep the ancestor in place.
inline std::optional<std::uint32_t> check_backtrack(const BeliefGraph& g,
                                                    const MachineState& s,
                                                    NodeId focus) {
    for (NodeId ancestor : g.lineage(focus)) {
        const double own = g.conf(ancestor);
        for (NodeId sib : g.siblings(ancestor)) {
            if (sib != ancestor && g.conf(sib) > own)
                return g.node(ancestor).level;
        }
    }
    return std::nullopt;
}

enum class DrillDecision { Proceed, Hold };

/// Dual-threshold gate: the top hypothesis must lead by strictly more than
/// gap_delta and hold at least min_support distinct supporting evidence.
inline DrillDecision check_drilldown(const BeliefGraph& g, const MachineState& s) {
    auto [top, gap] = g.confidence_gap(s.level);
    if (gap > s.params.gap_delta && g.support_count(top) >= s.params.min_support)
        return DrillDecision::Proceed;
    return DrillDecision::Hold;
}

struct StepResult {
    Transition transition;
    BeliefGraph graph;
    MachineState state;
    // Populated on drill-down: the child instantiation batch, so callers
    // can log it and replay it later.
    std::optional<GraphUpdate> applied_update;
    // Populated on backtrack.
    std::set<NodeId> removed;
};

/// One state-conversion pass. Backtracking is evaluated first and wins over
/// any drill-down condition; otherwise the dual-threshold gate decides
/// between terminating (granular enough), refining one level deeper, or
/// staying put. The iteration counter always advances.
inline StepResult step(const BeliefGraph& g, const MachineState& s, bool granularity_ok,
                       const std::vector<HypothesisSpec>& refined) {
    StepResult r{Transition::stay(s.level), g, s, std::nullopt, {}};
    r.state.iteration = s.iteration + 1;

    NodeId focus = g.reasoning_focus(s.level);
    if (auto l_star = check_backtrack(g, s, focus)) {
        auto [pruned, removed] = g.prune_below(*l_star);
        r.transition = Transition::backtrack(*l_star);
        r.graph = std::move(pruned);
        r.removed = std::move(removed);
        r.state.level = *l_star;
        return r;
    }

    if (check_drilldown(g, s) == DrillDecision::Proceed) {
        if (granularity_ok) {
            r.transition = Transition::terminate(s.level);
            return r;
        }
        if (refined.empty())
            throw RefinementEmptyError("drill-down requested but no refined hypotheses given");
        GraphUpdate u;
        NodeId parent = g.confidence_gap(s.level).first;
        std::uint64_t next = g.next_id().value;
        for (const HypothesisSpec& spec : refined) {
            Node child;
            child.id = NodeId{next++};
            child.kind = NodeKind::Hypothesis;
            child.label = spec.label;
            child.level = s.level + 1;
            child.confidence = spec.prior;
            u.new_nodes.push_back(child);
            u.new_edges.push_back(Edge{parent, child.id, EdgeKind::Refine});
        }
        r.graph = g.apply_update(u, accept_all_provenance());
        r.applied_update = std::move(u);
        r.state.level = s.level + 1;
        r.transition = Transition::drill_down(r.state.level);
        return r;
    }

    return r;  // Stay
}

}  // namespace abdex
