#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abdex/engine.hpp"
#include "abdex/evaluation.hpp"
#include "abdex/scenario.hpp"

namespace abdex {

namespace detail {

// Two-decimal quantization keeps generated files byte-deterministic across
// platforms.
inline double q2(double v) { return static_cast<double>(static_cast<int>(v * 100.0 + 0.5)) / 100.0; }

}  // namespace detail

/// Seeded synthetic-scenario generator. Produces a full branching-ary
/// taxonomy with exactly one truth leaf and an evidence repository whose
/// yields make the scripted-oracle trajectory converge under default
/// parameters. With `misleading` set, a decoy level-1 branch gets the top
/// prior plus deep refuting evidence, guaranteeing one backtrack.
inline Scenario generate_scenario(std::uint64_t seed, std::uint32_t depth,
                                  std::uint32_t branching, bool misleading) {
    if (depth < 2 || depth > 5) throw ValidationError("depth must be in [2,5]");
    if (branching < 2 || branching > 4) throw ValidationError("branching must be in [2,4]");

    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);

    Scenario sc;
    sc.id = std::string("gen-") + std::to_string(seed) + "-d" + std::to_string(depth) + "-b" +
            std::to_string(branching) + (misleading ? "-mis" : "");
    sc.seed = seed;
    sc.surface_symptoms = {"alert: service degradation on cluster node",
                           "alert: elevated error rate in request path"};
    sc.roles = {"application", "linux", "network", "database"};

    static const char* kDomains[] = {"network", "storage", "database", "application",
                                     "memory", "scheduler", "cache", "filesystem"};

    // Build the full taxonomy, breadth-first by path id.
    struct Pending {
        std::string id;
        std::uint32_t level;
    };
    std::vector<Pending> frontier;
    std::vector<std::string> level1_ids;
    for (std::uint32_t i = 0; i < branching; ++i) {
        std::string tid = "t" + std::to_string(i + 1);
        HypothesisTemplate t;
        t.id = tid;
        t.label = std::string(kDomains[(seed + i) % 8]) + " fault " + std::to_string(i + 1);
        t.level = 1;
        sc.taxonomy.emplace(tid, t);
        level1_ids.push_back(tid);
        frontier.push_back({tid, 1});
    }
    while (!frontier.empty()) {
        Pending p = frontier.front();
        frontier.erase(frontier.begin());
        if (p.level >= depth) continue;
        HypothesisTemplate& parent = sc.taxonomy.at(p.id);
        for (std::uint32_t i = 0; i < branching; ++i) {
            std::string tid = p.id + "." + std::to_string(i + 1);
            HypothesisTemplate t;
            t.id = tid;
            t.label = parent.label + " / sub-cause " + std::to_string(i + 1);
            t.level = p.level + 1;
            parent.children.push_back(tid);
            sc.taxonomy.emplace(tid, t);
            frontier.push_back({tid, t.level});
        }
    }

    // Pick the truth path; the decoy (when misleading) is a different
    // level-1 branch.
    const std::uint32_t truth_root = static_cast<std::uint32_t>(rng() % branching);
    const std::uint32_t decoy_root = (truth_root + 1) % branching;
    sc.truth_path.push_back(level1_ids[truth_root]);
    while (sc.truth_path.size() < depth) {
        const HypothesisTemplate& cur = sc.taxonomy.at(sc.truth_path.back());
        sc.truth_path.push_back(cur.children[rng() % cur.children.size()]);
    }
    const std::string decoy_id = level1_ids[decoy_root];
    const std::string decoy_child_id = sc.taxonomy.at(decoy_id).children.front();

    auto on_truth_path = [&](const std::string& tid) {
        return std::find(sc.truth_path.begin(), sc.truth_path.end(), tid) != sc.truth_path.end();
    };

    // Priors: truth-path nodes lead their sibling groups; the decoy
    // outranks everything at level 1 when misleading.
    for (auto& [tid, t] : sc.taxonomy) {
        if (on_truth_path(tid))
            t.prior = (t.level == 1 && misleading) ? 0.50 : 0.60;
        else
            t.prior = detail::q2(0.20 + static_cast<double>(rng() % 15) / 100.0);  // [0.20,0.34]
    }
    if (misleading) {
        sc.taxonomy.at(decoy_id).prior = 0.80;
        // A clearly leading decoy child, so the drilled-in investigation is
        // deterministic.
        bool first = true;
        for (const std::string& c : sc.taxonomy.at(decoy_id).children) {
            sc.taxonomy.at(c).prior = first ? 0.60 : 0.30;
            first = false;
        }
    }

    auto add_evidence = [&](const std::string& tid, const std::string& suffix,
                            const std::string& payload, std::vector<FindingSpec> findings) {
        EvidenceSpec ev;
        ev.action_key = "inspect " + tid + "/" + suffix;
        ev.payload = payload;
        ev.findings = std::move(findings);
        sc.relevance[tid].push_back(ev.action_key);
        sc.evidence_repo.emplace(ev.action_key, std::move(ev));
    };

    // Truth-path templates get two strong supporting items each; everything
    // else gets one weak self-referential item so no template is blind.
    for (const auto& [tid, t] : sc.taxonomy) {
        if (on_truth_path(tid)) {
            add_evidence(tid, "metrics", "metrics consistent with " + t.label,
                         {{tid, true, 1.0}});
            add_evidence(tid, "logs", "log entries implicating " + t.label, {{tid, true, 1.0}});
        } else if (misleading && tid == decoy_id) {
            add_evidence(tid, "metrics", "surface metrics loosely matching " + t.label,
                         {{tid, true, 0.5}});
            add_evidence(tid, "logs", "ambiguous log entries near " + t.label,
                         {{tid, true, 0.5}});
        } else if (misleading && tid == decoy_child_id) {
            // Deep evidence that exonerates the whole decoy branch.
            add_evidence(tid, "metrics",
                         "detailed metrics ruling out " + t.label,
                         {{tid, false, 1.0}, {decoy_id, false, 1.0}});
            add_evidence(tid, "logs", "log evidence contradicting " + t.label,
                         {{tid, false, 1.0}, {decoy_id, false, 1.0}});
        } else {
            add_evidence(tid, "probe", "inconclusive probe of " + t.label, {{tid, true, 0.05}});
        }
    }

    // Record the iteration budget the oracle actually needs, found by
    // enumerating its deterministic trajectory.
    for (std::uint32_t budget = 1; budget <= 12; ++budget) {
        RunConfig cfg;
        cfg.params.max_iterations = budget;
        EpisodeResult r = run_episode(sc, cfg);
        if (judge(r.report, sc).score == 2) {
            sc.max_iterations = budget;
            break;
        }
    }
    return sc;
}

}  // namespace abdex
