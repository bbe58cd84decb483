#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "abdex/graph.hpp"

using namespace abdex;

namespace {

Node hypothesis(std::uint64_t id, const std::string& label, std::uint32_t level, double conf) {
    Node n;
    n.id = NodeId{id};
    n.kind = NodeKind::Hypothesis;
    n.label = label;
    n.level = level;
    n.confidence = conf;
    return n;
}

Node symptom(std::uint64_t id, const std::string& label) {
    Node n;
    n.id = NodeId{id};
    n.kind = NodeKind::Symptom;
    n.label = label;
    return n;
}

Node evidence(std::uint64_t id, const std::string& label, std::uint64_t event) {
    Node n;
    n.id = NodeId{id};
    n.kind = NodeKind::Evidence;
    n.label = label;
    n.provenance = ProvenanceToken{"ep", event};
    return n;
}

// Symptom 1; level-1 hypotheses 2 (0.6), 3 (0.4), 4 (0.3); level-2 child 5
// (0.7) refining node 2; evidence 6 and 7 supporting node 2.
BeliefGraph fixture() {
    BeliefGraph g;
    GraphUpdate u;
    u.new_nodes = {symptom(1, "alert"), hypothesis(2, "fs", 1, 0.6),
                   hypothesis(3, "disk", 1, 0.4), hypothesis(4, "mem", 1, 0.3),
                   hypothesis(5, "xfs", 2, 0.7), evidence(6, "mount", 10),
                   evidence(7, "dmesg", 11)};
    u.new_edges = {Edge{NodeId{1}, NodeId{2}, EdgeKind::Derive},
                   Edge{NodeId{1}, NodeId{3}, EdgeKind::Derive},
                   Edge{NodeId{1}, NodeId{4}, EdgeKind::Derive},
                   Edge{NodeId{2}, NodeId{5}, EdgeKind::Refine},
                   Edge{NodeId{6}, NodeId{2}, EdgeKind::Support},
                   Edge{NodeId{7}, NodeId{2}, EdgeKind::Support}};
    return g.apply_update(u, accept_all_provenance());
}

}  // namespace

TEST_CASE("apply_update admits a well-formed batch atomically") {
    BeliefGraph g = fixture();
    CHECK(g.nodes().size() == 7);
    CHECK(g.edges().size() == 6);
    CHECK(g.next_id() == NodeId{8});
    CHECK(g.conf(NodeId{2}) == doctest::Approx(0.6));
}

TEST_CASE("reasoning focus is the confidence argmax with smallest-id ties") {
    BeliefGraph g = fixture();
    CHECK(g.reasoning_focus(1) == NodeId{2});
    CHECK(g.reasoning_focus(2) == NodeId{5});

    // Exact tie: the smaller id wins.
    GraphUpdate u;
    u.recalibrations = {{NodeId{3}, 0.6}};
    BeliefGraph tied = g.apply_update(u, accept_all_provenance());
    CHECK(tied.reasoning_focus(1) == NodeId{2});

    CHECK_THROWS_AS(g.reasoning_focus(9), EmptyLevelError);
}

TEST_CASE("confidence gap against the runner-up, implicit zero when alone") {
    BeliefGraph g = fixture();
    auto [top1, gap1] = g.confidence_gap(1);
    CHECK(top1 == NodeId{2});
    CHECK(gap1 == doctest::Approx(0.2));
    auto [top2, gap2] = g.confidence_gap(2);
    CHECK(top2 == NodeId{5});
    CHECK(gap2 == doctest::Approx(0.7));  // lone hypothesis vs implicit 0
}

TEST_CASE("support_count deduplicates by distinct provenance") {
    BeliefGraph g = fixture();
    CHECK(g.support_count(NodeId{2}) == 2);
    CHECK(g.support_count(NodeId{3}) == 0);
    CHECK(g.refute_count(NodeId{2}) == 0);

    // A second evidence node carrying an already-counted token adds nothing.
    GraphUpdate u;
    u.new_nodes = {evidence(8, "mount-again", 10)};
    u.new_edges = {Edge{NodeId{8}, NodeId{2}, EdgeKind::Support}};
    BeliefGraph g2 = g.apply_update(u, accept_all_provenance());
    CHECK(g2.support_count(NodeId{2}) == 2);
}

TEST_CASE("lineage runs shallowest-first and excludes the node itself") {
    BeliefGraph g = fixture();
    CHECK(g.lineage(NodeId{5}) == std::vector<NodeId>{NodeId{2}});
    CHECK(g.lineage(NodeId{2}).empty());
    CHECK_THROWS_AS(g.lineage(NodeId{6}), NotAHypothesisError);
}

TEST_CASE("siblings share a refine parent; all of level 1 is one group") {
    BeliefGraph g = fixture();
    CHECK(g.siblings(NodeId{2}) == std::vector<NodeId>{NodeId{2}, NodeId{3}, NodeId{4}});
    CHECK(g.siblings(NodeId{5}) == std::vector<NodeId>{NodeId{5}});
}

TEST_CASE("prune_below removes deep hypotheses but keeps evidence and symptoms") {
    BeliefGraph g = fixture();
    auto [pruned, removed] = g.prune_below(1);
    CHECK(removed == std::set<NodeId>{NodeId{5}});
    CHECK_FALSE(pruned.contains(NodeId{5}));
    CHECK(pruned.contains(NodeId{6}));
    CHECK(pruned.contains(NodeId{1}));
    for (const Edge& e : pruned.edges()) CHECK(e.kind != EdgeKind::Refine);

    // Idempotent: pruning again removes nothing.
    auto [again, removed2] = pruned.prune_below(1);
    CHECK(removed2.empty());
    CHECK(again == pruned);
}

TEST_CASE("apply_update rejects malformed batches as a unit") {
    BeliefGraph g = fixture();
    const std::string before = g.serialize();

    SUBCASE("unknown recalibration target") {
        GraphUpdate u;
        u.recalibrations = {{NodeId{2}, 0.9}, {NodeId{99}, 0.5}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), UnknownNodeError);
    }
    SUBCASE("confidence outside the unit interval") {
        GraphUpdate u;
        u.recalibrations = {{NodeId{2}, 1.5}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), ConfidenceOutOfRangeError);
    }
    SUBCASE("recalibrating a non-hypothesis") {
        GraphUpdate u;
        u.recalibrations = {{NodeId{6}, 0.5}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), NotAHypothesisError);
    }
    SUBCASE("derive edge into a deep hypothesis") {
        GraphUpdate u;
        u.new_edges = {Edge{NodeId{1}, NodeId{5}, EdgeKind::Derive}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvalidEdgeError);
    }
    SUBCASE("refine edge skipping a level") {
        GraphUpdate u;
        u.new_nodes = {hypothesis(8, "deep", 3, 0.5)};
        u.new_edges = {Edge{NodeId{2}, NodeId{8}, EdgeKind::Refine}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvalidEdgeError);
    }
    SUBCASE("second refine parent") {
        GraphUpdate u;
        u.new_edges = {Edge{NodeId{3}, NodeId{5}, EdgeKind::Refine}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvalidEdgeError);
    }
    SUBCASE("support edge from a non-evidence source") {
        GraphUpdate u;
        u.new_edges = {Edge{NodeId{1}, NodeId{2}, EdgeKind::Support}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvalidEdgeError);
    }
    SUBCASE("edge with a missing endpoint") {
        GraphUpdate u;
        u.new_edges = {Edge{NodeId{6}, NodeId{42}, EdgeKind::Support}};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvalidEdgeError);
    }
    SUBCASE("duplicate node id") {
        GraphUpdate u;
        u.new_nodes = {hypothesis(2, "again", 1, 0.1)};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvariantViolationError);
    }
    SUBCASE("ungrounded evidence") {
        GraphUpdate u;
        u.new_nodes = {evidence(8, "grounded", 42)};
        auto resolver = [](const ProvenanceToken& t) { return t.event_index < 50; };
        CHECK_NOTHROW(g.apply_update(u, resolver));
        u.new_nodes = {evidence(8, "fabricated", 99)};
        auto strict = [](const ProvenanceToken&) { return false; };
        CHECK_THROWS_AS(g.apply_update(u, strict), UngroundedEvidenceError);
    }
    SUBCASE("evidence without any token") {
        GraphUpdate u;
        Node n;
        n.id = NodeId{8};
        n.kind = NodeKind::Evidence;
        n.label = "bare";
        u.new_nodes = {n};
        CHECK_THROWS_AS(g.apply_update(u, accept_all_provenance()), InvariantViolationError);
    }

    // Whatever the failure, the input graph is untouched.
    CHECK(g.serialize() == before);
}

TEST_CASE("serialization round-trips byte-identically") {
    BeliefGraph g = fixture();
    std::string text = g.serialize();
    BeliefGraph back = BeliefGraph::deserialize(text);
    CHECK(back == g);
    CHECK(back.serialize() == text);
    CHECK(back.next_id() == g.next_id());

    CHECK_THROWS_AS(BeliefGraph::deserialize("not json"), ParseError);
    CHECK_THROWS_AS(BeliefGraph::deserialize("{\"schema\":\"other/9\"}"), ParseError);
}

TEST_CASE("deserialize rejects structurally broken documents") {
    BeliefGraph g = fixture();
    json j = g.to_json();
    SUBCASE("dangling edge") {
        j["edges"].push_back(json{{"src", 6}, {"dst", 77}, {"kind", "support"}});
        CHECK_THROWS_AS(BeliefGraph::from_json(j), InvalidEdgeError);
    }
    SUBCASE("orphan deep hypothesis") {
        json orphan = node_to_json(hypothesis(9, "orphan", 3, 0.5));
        j["nodes"].push_back(orphan);
        CHECK_THROWS_AS(BeliefGraph::from_json(j), InvariantViolationError);
    }
    SUBCASE("duplicate node id") {
        j["nodes"].push_back(j["nodes"][0]);
        CHECK_THROWS_AS(BeliefGraph::from_json(j), ParseError);
    }
}

TEST_CASE("property: random valid update batches preserve every invariant") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        BeliefGraph g = fixture();
        for (int batch = 0; batch < 10; ++batch) {
            GraphUpdate u;
            std::uint64_t next = g.next_id().value;
            // A few recalibrations of random hypotheses.
            auto hs = g.hypotheses_at(1);
            for (NodeId h : hs)
                if (rng() % 2)
                    u.recalibrations.emplace_back(h, (rng() % 101) / 100.0);
            // New evidence supporting/refuting a random hypothesis.
            if (rng() % 2) {
                Node ev = evidence(next++, "e" + std::to_string(rng()), rng() % 1000);
                NodeId target = hs[rng() % hs.size()];
                u.new_edges.push_back(
                    Edge{ev.id, target, rng() % 2 ? EdgeKind::Support : EdgeKind::Refute});
                u.new_nodes.push_back(std::move(ev));
            }
            // Occasionally a refine child under the current focus.
            if (rng() % 3 == 0) {
                NodeId parent = g.reasoning_focus(1);
                Node child = hypothesis(next++, "c" + std::to_string(rng()), 2,
                                        (rng() % 101) / 100.0);
                u.new_edges.push_back(Edge{parent, child.id, EdgeKind::Refine});
                u.new_nodes.push_back(std::move(child));
            }
            g = g.apply_update(u, accept_all_provenance());
            CHECK_NOTHROW(g.validate());
            CHECK(BeliefGraph::deserialize(g.serialize()) == g);
        }
    }
}

TEST_CASE("property: focus agrees with a brute-force argmax") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        BeliefGraph g;
        GraphUpdate u;
        const std::uint64_t n = 2 + rng() % 12;
        for (std::uint64_t i = 1; i <= n; ++i)
            u.new_nodes.push_back(hypothesis(i, "h" + std::to_string(i), 1,
                                             (rng() % 101) / 100.0));
        g = g.apply_update(u, accept_all_provenance());

        NodeId best{1};
        for (std::uint64_t i = 2; i <= n; ++i)
            if (g.conf(NodeId{i}) > g.conf(best)) best = NodeId{i};
        CHECK(g.reasoning_focus(1) == best);
    }
}

TEST_CASE("property: support_count matches a brute-force token count at scale") {
    std::mt19937_64 rng(13);
    BeliefGraph g;
    {
        GraphUpdate u;
        for (std::uint64_t i = 1; i <= 20; ++i)
            u.new_nodes.push_back(hypothesis(i, "h" + std::to_string(i), 1, 0.5));
        g = g.apply_update(u, accept_all_provenance());
    }
    std::map<NodeId, std::set<std::uint64_t>> expected;
    GraphUpdate u;
    std::uint64_t next = g.next_id().value;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t token = rng() % 300;  // forced collisions
        Node ev = evidence(next++, "e" + std::to_string(i), token);
        NodeId target{1 + rng() % 20};
        u.new_edges.push_back(Edge{ev.id, target, EdgeKind::Support});
        u.new_nodes.push_back(std::move(ev));
        expected[target].insert(token);
    }
    g = g.apply_update(u, accept_all_provenance());
    for (const auto& [target, tokens] : expected)
        CHECK(g.support_count(target) == tokens.size());
}
