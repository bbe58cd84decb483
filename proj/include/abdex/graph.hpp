#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "abdex/errors.hpp"

namespace abdex {

using json = nlohmann::json;

// Opaque, totally ordered node identifier. Ordering is the deterministic
// tie-break everywhere (focus selection, sibling argmax, serialization).
struct NodeId {
    std::uint64_t value = 0;

    auto operator<=>(const NodeId&) const = default;
};

enum class NodeKind { Symptom, Evidence, Hypothesis };
enum class EdgeKind { Derive, Refine, Support, Refute };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Symptom: return "symptom";
        case NodeKind::Evidence: return "evidence";
        case NodeKind::Hypothesis: return "hypothesis";
    }
    return "?";
}

inline const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Derive: return "derive";
        case EdgeKind::Refine: return "refine";
        case EdgeKind::Support: return "support";
        case EdgeKind::Refute: return "refute";
    }
    return "?";
}

// Anchors an evidence node to the observation event that produced it.
// An evidence node without a resolvable token is rejected outright.
struct ProvenanceToken {
    std::string episode_id;
    std::uint64_t event_index = 0;

    auto operator<=>(const ProvenanceToken&) const = default;
};

struct Node {
    NodeId id;
    NodeKind kind = NodeKind::Hypothesis;
    std::string label;
    std::optional<std::uint32_t> level;        // hypothesis only, >= 1
    std::optional<double> confidence;          // hypothesis only, [0,1]
    std::optional<ProvenanceToken> provenance; // evidence only
};

struct Edge {
    NodeId src;
    NodeId dst;
    EdgeKind kind = EdgeKind::Support;

    auto operator<=>(const Edge&) const = default;
};

// Atomic batch of the three graph operations: confidence recalibration,
// node instantiation, and edge formation.
struct GraphUpdate {
    std::vector<std::pair<NodeId, double>> recalibrations;
    std::vector<Node> new_nodes;
    std::vector<Edge> new_edges;

    bool empty() const {
        return recalibrations.empty() && new_nodes.empty() && new_edges.empty();
    }
};


inline NodeKind parse_node_kind(const std::string& s) {
    if (s == "symptom") return NodeKind::Symptom;
    if (s == "evidence") return NodeKind::Evidence;
    if (s == "hypothesis") return NodeKind::Hypothesis;
    throw ParseError("unknown node kind '" + s + "'");
}

inline EdgeKind parse_edge_kind(const std::string& s) {
    if (s == "derive") return EdgeKind::Derive;
    if (s == "refine") return EdgeKind::Refine;
    if (s == "support") return EdgeKind::Support;
    if (s == "refute") return EdgeKind::Refute;
    throw ParseError("unknown edge kind '" + s + "'");
}

inline json node_to_json(const Node& n) {
    json jn{{"id", n.id.value}, {"kind", to_string(n.kind)}, {"label", n.label}};
    if (n.level) jn["level"] = *n.level;
    if (n.confidence) jn["confidence"] = *n.confidence;
    if (n.provenance)
        jn["provenance"] = {{"episode", n.provenance->episode_id},
                            {"event", n.provenance->event_index}};
    return jn;
}

inline Node node_from_json(const json& jn) {
    Node n;
    n.id = NodeId{jn.at("id").get<std::uint64_t>()};
    n.label = jn.at("label").get<std::string>();
    n.kind = parse_node_kind(jn.at("kind").get<std::string>());
    if (jn.contains("level")) n.level = jn["level"].get<std::uint32_t>();
    if (jn.contains("confidence")) n.confidence = jn["confidence"].get<double>();
    if (jn.contains("provenance"))
        n.provenance = ProvenanceToken{jn["provenance"].at("episode").get<std::string>(),
                                       jn["provenance"].at("event").get<std::uint64_t>()};
    return n;
}

inline json edge_to_json(const Edge& e) {
    return {{"src", e.src.value}, {"dst", e.dst.value}, {"kind", to_string(e.kind)}};
}

inline Edge edge_from_json(const json& je) {
    return Edge{NodeId{je.at("src").get<std::uint64_t>()},
                NodeId{je.at("dst").get<std::uint64_t>()},
                parse_edge_kind(je.at("kind").get<std::string>())};
}

// Answers whether a provenance token points at a real observation event.
using ProvenanceResolver = std::function<bool(const ProvenanceToken&)>;

inline ProvenanceResolver accept_all_provenance() {
    return [](const ProvenanceToken&) { return true; };
}

/// The symbolic belief state's structural half: a typed causal graph over
/// symptom, evidence, and hypothesis nodes. Value semantics throughout;
/// mutating operations return a fresh graph and never touch the input.
class BeliefGraph {
public:
    static constexpr const char* kSchema = "abdex.graph/1";

    const std::map<NodeId, Node>& nodes() const { return nodes_; }
    const std::set<Edge>& edges() const { return edges_; }

    bool contains(NodeId id) const { return nodes_.count(id) > 0; }

    const Node& node(NodeId id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end())
            throw UnknownNodeError("unknown node id " + std::to_string(id.value));
        return it->second;
    }

    // Smallest id not yet in use. Callers mint ids for new nodes from here;
    // apply_update advances the floor past everything it admits.
    NodeId next_id() const { return NodeId{next_id_}; }

    std::vector<NodeId> hypotheses_at(std::uint32_t level) const {
        std::vector<NodeId> out;
        for (const auto& [id, n] : nodes_)
            if (n.kind == NodeKind::Hypothesis && n.level && *n.level == level)
                out.push_back(id);
        return out;
    }

    std::uint32_t max_level() const {
        std::uint32_t m = 0;
        for (const auto& [id, n] : nodes_)
            if (n.kind == NodeKind::Hypothesis && n.level)
                m = std::max(m, *n.level);
        return m;
    }

    /// Applies a whole update batch atomically: nodes first, then
    /// recalibrations, then edges; the result is re-validated and the batch
    /// is rejected as a unit on any violation.
    BeliefGraph apply_update(const GraphUpdate& u,
                             const ProvenanceResolver& resolve_provenance) const {
        BeliefGraph g = *this;

        for (const Node& n : u.new_nodes) {
            if (g.nodes_.count(n.id))
                throw InvariantViolationError("duplicate node id " + std::to_string(n.id.value));
            validate_node(n);
            if (n.kind == NodeKind::Evidence) {
                if (!n.provenance || !resolve_provenance(*n.provenance))
                    throw UngroundedEvidenceError("evidence node '" + n.label +
                                                  "' has no resolvable provenance");
            }
            g.nodes_.emplace(n.id, n);
            g.next_id_ = std::max(g.next_id_, n.id.value + 1);
        }

        for (const auto& [id, conf] : u.recalibrations) {
            auto it = g.nodes_.find(id);
            if (it == g.nodes_.end())
                throw UnknownNodeError("recalibration targets unknown node " +
                                       std::to_string(id.value));
            if (it->second.kind != NodeKind::Hypothesis)
                throw NotAHypothesisError("recalibration target is not a hypothesis");
            if (conf < 0.0 || conf > 1.0)
                throw ConfidenceOutOfRangeError("confidence " + std::to_string(conf) +
                                                " outside [0,1]");
            it->second.confidence = conf;
        }

        for (const Edge& e : u.new_edges) {
            g.insert_edge(e);
        }

        g.validate();
        return g;
    }

    /// Eq-style focus rule: argmax of confidence at the level, ties broken
    /// by smallest id.
    NodeId reasoning_focus(std::uint32_t level) const {
        auto hs = hypotheses_at(level);
        if (hs.empty())
            throw EmptyLevelError("no hypothesis at level " + std::to_string(level));
        NodeId best = hs.front();
        for (NodeId id : hs)
            if (conf(id) > conf(best)) best = id;  // hs is id-sorted; > keeps first max
        return best;
    }

    std::size_t support_count(NodeId h) const { return polarity_count(h, EdgeKind::Support); }
    std::size_t refute_count(NodeId h) const { return polarity_count(h, EdgeKind::Refute); }

    /// Top hypothesis at the level plus its confidence margin over the
    /// runner-up. A lone hypothesis competes against an implicit zero.
    std::pair<NodeId, double> confidence_gap(std::uint32_t level) const {
        auto hs = hypotheses_at(level);
        if (hs.empty())
            throw EmptyLevelError("no hypothesis at level " + std::to_string(level));
        NodeId top = reasoning_focus(level);
        double second = 0.0;
        for (NodeId id : hs)
            if (id != top) second = std::max(second, conf(id));
        return {top, conf(top) - second};
    }

    /// Refine ancestors of h, shallowest first, excluding h itself.
    std::vector<NodeId> lineage(NodeId h) const {
        require_hypothesis(h);
        std::vector<NodeId> chain;
        std::optional<NodeId> cur = refine_parent(h);
        while (cur) {
            chain.push_back(*cur);
            cur = refine_parent(*cur);
        }
        std::reverse(chain.begin(), chain.end());
        return chain;
    }

    /// Hypotheses sharing h's refine parent (all of level 1 counts as one
    /// sibling group). Includes h.
    std::vector<NodeId> siblings(NodeId h) const {
        require_hypothesis(h);
        const Node& n = node(h);
        auto parent = refine_parent(h);
        std::vector<NodeId> out;
        for (NodeId id : hypotheses_at(*n.level)) {
            if (*n.level == 1 || refine_parent(id) == parent) out.push_back(id);
        }
        return out;
    }

    /// Discards every hypothesis deeper than l_star together with its
    /// incident edges. Evidence and symptom nodes persist.
    std::pair<BeliefGraph, std::set<NodeId>> prune_below(std::uint32_t l_star) const {
        BeliefGraph g = *this;
        std::set<NodeId> removed;
        for (const auto& [id, n] : nodes_)
            if (n.kind == NodeKind::Hypothesis && n.level && *n.level > l_star)
                removed.insert(id);
        for (NodeId id : removed) g.nodes_.erase(id);
        for (auto it = g.edges_.begin(); it != g.edges_.end();) {
            if (removed.count(it->src) || removed.count(it->dst))
                it = g.edges_.erase(it);
            else
                ++it;
        }
        g.validate();
        return {std::move(g), std::move(removed)};
    }

    json to_json() const {
        json nodes = json::array();
        for (const auto& [id, n] : nodes_) nodes.push_back(node_to_json(n));
        json edges = json::array();
        for (const Edge& e : edges_) edges.push_back(edge_to_json(e));
        return json{{"schema", kSchema}, {"next_id", next_id_},
                    {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
    }

    // Canonical form: sorted keys, id-sorted node array, ordered edge set.
    // Equal graphs serialize byte-identically.
    std::string serialize() const { return to_json().dump(); }

    static BeliefGraph from_json(const json& j) {
        BeliefGraph g;
        try {
            if (j.at("schema").get<std::string>() != kSchema)
                throw ParseError("unsupported graph schema");
            for (const json& jn : j.at("nodes")) {
                Node n = node_from_json(jn);
                validate_node(n);
                if (!g.nodes_.emplace(n.id, n).second)
                    throw ParseError("duplicate node id in serialized graph");
                g.next_id_ = std::max(g.next_id_, n.id.value + 1);
            }
            for (const json& je : j.at("edges")) g.insert_edge(edge_from_json(je));
            if (j.contains("next_id"))
                g.next_id_ = std::max(g.next_id_, j["next_id"].get<std::uint64_t>());
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed graph document: ") + e.what());
        }
        g.validate();
        return g;
    }

    static BeliefGraph deserialize(const std::string& text) {
        json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) throw ParseError("graph document is not valid JSON");
        return from_json(j);
    }

    double conf(NodeId h) const {
        const Node& n = node(h);
        if (n.kind != NodeKind::Hypothesis || !n.confidence)
            throw NotAHypothesisError("node " + std::to_string(h.value) + " has no confidence");
        return *n.confidence;
    }

    std::optional<NodeId> refine_parent(NodeId h) const {
        for (const Edge& e : edges_)
            if (e.kind == EdgeKind::Refine && e.dst == h) return e.src;
        return std::nullopt;
    }

    /// Full structural validation; throws InvariantViolationError on any
    /// breach. Cheap at desk scale, run after every mutation.
    void validate() const {
        for (const Edge& e : edges_) {
            if (!contains(e.src) || !contains(e.dst))
                throw InvalidEdgeError("edge endpoint missing");
        }
        std::map<NodeId, int> refine_in;
        for (const Edge& e : edges_) {
            const Node& s = node(e.src);
            const Node& d = node(e.dst);
            switch (e.kind) {
                case EdgeKind::Derive:
                    if (s.kind != NodeKind::Symptom || d.kind != NodeKind::Hypothesis ||
                        d.level != 1u)
                        throw InvalidEdgeError("derive edge must go symptom -> level-1 hypothesis");
                    break;
                case EdgeKind::Refine:
                    if (s.kind != NodeKind::Hypothesis || d.kind != NodeKind::Hypothesis ||
                        !s.level || !d.level || *d.level != *s.level + 1)
                        throw InvalidEdgeError("refine edge must deepen by exactly one level");
                    if (++refine_in[e.dst] > 1)
                        throw InvalidEdgeError("refine in-degree exceeds 1");
                    break;
                case EdgeKind::Support:
                case EdgeKind::Refute:
                    if (s.kind != NodeKind::Evidence || d.kind != NodeKind::Hypothesis)
                        throw InvalidEdgeError("support/refute edge must go evidence -> hypothesis");
                    break;
            }
        }
        for (const auto& [id, n] : nodes_) {
            if (n.kind == NodeKind::Hypothesis && n.level && *n.level > 1 &&
                refine_in.find(id) == refine_in.end())
                throw InvariantViolationError("hypothesis at level " + std::to_string(*n.level) +
                                              " lacks a refine parent");
        }
        // Refine levels strictly increase along every edge, so the
        // hypothesis subgraph is acyclic by construction.
    }

    friend bool operator==(const BeliefGraph& a, const BeliefGraph& b) {
        return a.nodes_.size() == b.nodes_.size() && a.edges_ == b.edges_ &&
               a.serialize() == b.serialize();
    }

private:
    static void validate_node(const Node& n) {
        const bool hyp = n.kind == NodeKind::Hypothesis;
        if (hyp != n.level.has_value() || hyp != n.confidence.has_value())
            throw InvariantViolationError("level/confidence present iff hypothesis");
        if ((n.kind == NodeKind::Evidence) != n.provenance.has_value())
            throw InvariantViolationError("provenance present iff evidence");
        if (hyp) {
            if (*n.level < 1) throw InvariantViolationError("hypothesis level must be >= 1");
            if (*n.confidence < 0.0 || *n.confidence > 1.0)
                throw ConfidenceOutOfRangeError("confidence outside [0,1]");
        }
    }

    void insert_edge(const Edge& e) {
        if (!edges_.insert(e).second)
            throw InvalidEdgeError("duplicate edge");
    }

    void require_hypothesis(NodeId h) const {
        auto it = nodes_.find(h);
        if (it == nodes_.end() || it->second.kind != NodeKind::Hypothesis)
            throw NotAHypothesisError("node " + std::to_string(h.value) + " is not a hypothesis");
    }

    std::size_t polarity_count(NodeId h, EdgeKind kind) const {
        require_hypothesis(h);
        std::set<ProvenanceToken> seen;
        for (const Edge& e : edges_) {
            if (e.kind == kind && e.dst == h) {
                const Node& src = node(e.src);
                if (src.provenance) seen.insert(*src.provenance);
            }
        }
        return seen.size();
    }

    std::map<NodeId, Node> nodes_;
    std::set<Edge> edges_;
    std::uint64_t next_id_ = 1;
};

inline json update_to_json(const GraphUpdate& u) {
    json recal = json::array();
    for (const auto& [id, conf] : u.recalibrations)
        recal.push_back({{"node", id.value}, {"confidence", conf}});
    json nodes = json::array();
    for (const Node& n : u.new_nodes) nodes.push_back(node_to_json(n));
    json edges = json::array();
    for (const Edge& e : u.new_edges) edges.push_back(edge_to_json(e));
    return json{{"recalibrations", std::move(recal)}, {"new_nodes", std::move(nodes)},
                {"new_edges", std::move(edges)}};
}

inline GraphUpdate update_from_json(const json& j) {
    GraphUpdate u;
    try {
        for (const json& jr : j.at("recalibrations"))
            u.recalibrations.emplace_back(NodeId{jr.at("node").get<std::uint64_t>()},
                                          jr.at("confidence").get<double>());
        for (const json& jn : j.at("new_nodes")) u.new_nodes.push_back(node_from_json(jn));
        for (const json& je : j.at("new_edges")) u.new_edges.push_back(edge_from_json(je));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed graph update: ") + e.what());
    }
    return u;
}

}  // namespace abdex
