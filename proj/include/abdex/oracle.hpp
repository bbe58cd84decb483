#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "abdex/cognition.hpp"
#include "abdex/scenario.hpp"

namespace abdex {

// Scripted-oracle update weights. Refutation deliberately outweighs
// support; both are configurable per run.
struct OracleWeights {
    double support = 0.2;
    double refute = 0.3;
};

/// Deterministic cognition backed by a scenario file. Given identical
/// (scenario, focus, budget) inputs it produces byte-identical observations
/// and updates, which makes golden-trace testing possible.
class ScriptedOracle : public CognitionPort {
public:
    explicit ScriptedOracle(const Scenario& scenario, OracleWeights weights = {})
        : scenario_(scenario), weights_(weights) {}

    void begin_episode(const std::string& episode_id) override { episode_id_ = episode_id; }

    Initialization initialize_hypotheses(const std::vector<std::string>& symptoms) override {
        if (symptoms.empty()) throw EmptyInputError("no surface symptoms given");
        Initialization init;
        init.symptom_labels = symptoms;
        for (const HypothesisTemplate* t : scenario_.level_one())
            init.hypotheses.push_back(HypothesisSpec{t->label, t->prior});
        if (init.hypotheses.empty())
            throw EmptyInputError("scenario declares no level-1 hypotheses");
        return init;
    }

    std::vector<Instruction> plan(NodeId focus, const BeliefGraph& g) override {
        const Node& n = g.node(focus);
        Instruction ins;
        ins.expert = role_for_level(n.level.value_or(1));
        ins.directive = "investigate hypothesis: " + n.label;
        ins.focus = focus;
        ins.focus_label = n.label;
        ins.belief_digest = g.serialize();
        return {ins};
    }

    std::pair<std::vector<Observation>, Analysis> investigate(const Instruction& instruction,
                                                              std::uint32_t budget) override {
        std::vector<Observation> observations;
        Analysis analysis;
        analysis.expert = instruction.expert;

        const HypothesisTemplate* t = scenario_.match_label(instruction.focus_label);
        if (!t) return {observations, analysis};

        auto rel = scenario_.relevance.find(t->id);
        if (rel == scenario_.relevance.end()) return {observations, analysis};

        for (const std::string& action : rel->second) {
            if (observations.size() >= budget) break;  // silent truncation
            const EvidenceSpec* ev = scenario_.lookup(action);
            Observation obs;
            obs.action_key = action;
            obs.event_index = observations.size();  // slot; engine assigns trace index
            if (!ev) {
                obs.payload = "NOT FOUND: no record for action '" + action + "'";
                observations.push_back(std::move(obs));
                continue;
            }
            obs.payload = ev->payload;
            for (const FindingSpec& f : ev->findings) {
                Finding finding;
                finding.hypothesis_label = scenario_.tmpl(f.template_id).label;
                finding.supports = f.supports;
                finding.strength = f.strength;
                finding.observation_event = observations.size();
                analysis.findings.push_back(std::move(finding));
            }
            observations.push_back(std::move(obs));
        }
        return {observations, analysis};
    }

    GraphUpdate propose_update(const std::vector<Analysis>& analyses,
                               const std::vector<Observation>& observations,
                               const BeliefGraph& g) override {
        GraphUpdate u;
        if (analyses.empty()) return u;

        std::map<std::string, NodeId> by_label;
        for (const auto& [id, n] : g.nodes())
            if (n.kind == NodeKind::Hypothesis) by_label.emplace(n.label, id);

        std::map<std::uint64_t, const Observation*> obs_by_event;
        for (const Observation& o : observations) obs_by_event.emplace(o.event_index, &o);

        // Which findings actually land on an existing hypothesis.
        struct Claim {
            NodeId target;
            bool supports;
            double strength;
            std::uint64_t event;
        };
        std::vector<Claim> claims;
        for (const Analysis& a : analyses) {
            for (const Finding& f : a.findings) {
                auto it = by_label.find(f.hypothesis_label);
                if (it == by_label.end()) continue;  // template not yet instantiated
                if (!obs_by_event.count(f.observation_event)) continue;
                claims.push_back({it->second, f.supports, f.strength, f.observation_event});
            }
        }
        if (claims.empty()) return u;

        // One evidence node per distinct cited observation.
        std::map<std::uint64_t, NodeId> evidence_ids;
        std::uint64_t next = g.next_id().value;
        std::set<std::uint64_t> cited;
        for (const Claim& c : claims) cited.insert(c.event);
        for (std::uint64_t ev : cited) {
            Node n;
            n.id = NodeId{next++};
            n.kind = NodeKind::Evidence;
            n.label = obs_by_event.at(ev)->action_key;
            n.provenance = ProvenanceToken{episode_id_, ev};
            evidence_ids.emplace(ev, n.id);
            u.new_nodes.push_back(std::move(n));
        }

        // clamp(conf + w_s * sum(support) - w_r * sum(refute), 0, 1)
        std::map<NodeId, double> delta;
        std::set<Edge> edges;
        for (const Claim& c : claims) {
            delta[c.target] +=
                c.supports ? weights_.support * c.strength : -weights_.refute * c.strength;
            edges.insert(Edge{evidence_ids.at(c.event), c.target,
                              c.supports ? EdgeKind::Support : EdgeKind::Refute});
        }
        for (const auto& [target, d] : delta)
            u.recalibrations.emplace_back(target, std::clamp(g.conf(target) + d, 0.0, 1.0));
        u.new_edges.assign(edges.begin(), edges.end());
        return u;
    }

    std::vector<HypothesisSpec> refine_hypotheses(NodeId top, const BeliefGraph& g) override {
        const HypothesisTemplate& t = match_node(top, g);
        if (t.leaf())
            throw RefinementEmptyError("template '" + t.id + "' is a leaf; nothing to refine");
        std::vector<HypothesisSpec> specs;
        for (const std::string& child : t.children) {
            const HypothesisTemplate& c = scenario_.tmpl(child);
            specs.push_back(HypothesisSpec{c.label, c.prior});
        }
        return specs;
    }

    bool check_granularity(NodeId top, const BeliefGraph& g) override {
        return match_node(top, g).leaf();
    }

    Report report(const BeliefGraph& g, const MachineState& s) override {
        NodeId focus = g.reasoning_focus(s.level);
        Report r;
        r.prediction = g.node(focus).label;

        std::string narrative = "root cause: " + r.prediction + "\nlineage:";
        for (NodeId a : g.lineage(focus)) narrative += " -> " + g.node(a).label;
        narrative += " -> " + r.prediction + "\nsupporting evidence:";
        bool any = false;
        for (const Edge& e : g.edges()) {
            if (e.kind == EdgeKind::Support && e.dst == focus) {
                narrative += "\n  - " + g.node(e.src).label;
                any = true;
            }
        }
        if (!any) narrative += " (none recorded)";
        r.narrative = narrative;
        return r;
    }

private:
    const HypothesisTemplate& match_node(NodeId id, const BeliefGraph& g) const {
        const Node& n = g.node(id);
        const HypothesisTemplate* t = scenario_.match_label(n.label);
        if (!t)
            throw UnmatchedHypothesisError("hypothesis label '" + n.label +
                                           "' matches no scenario template");
        return *t;
    }

    std::string role_for_level(std::uint32_t level) const {
        if (scenario_.roles.empty()) return "expert";
        return scenario_.roles[(level - 1) % scenario_.roles.size()];
    }

    Scenario scenario_;
    OracleWeights weights_;
    std::string episode_id_ = "episode";
};

}  // namespace abdex
