#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "abdex/generator.hpp"

using namespace abdex;

TEST_CASE("generation is byte-deterministic in the seed") {
    Scenario a = generate_scenario(42, 3, 2, false);
    Scenario b = generate_scenario(42, 3, 2, false);
    CHECK(a.to_json().dump() == b.to_json().dump());
    Scenario c = generate_scenario(43, 3, 2, false);
    CHECK(a.to_json().dump() != c.to_json().dump());
}

TEST_CASE("parameter bounds are enforced") {
    CHECK_THROWS_AS(generate_scenario(1, 1, 2, false), ValidationError);
    CHECK_THROWS_AS(generate_scenario(1, 6, 2, false), ValidationError);
    CHECK_THROWS_AS(generate_scenario(1, 3, 1, false), ValidationError);
    CHECK_THROWS_AS(generate_scenario(1, 3, 5, false), ValidationError);
}

TEST_CASE("the taxonomy is a full b-ary tree of the requested depth") {
    for (std::uint32_t depth : {2u, 3u}) {
        for (std::uint32_t branching : {2u, 3u}) {
            Scenario sc = generate_scenario(7, depth, branching, false);
            std::size_t expected = 0, layer = branching;
            for (std::uint32_t l = 1; l <= depth; ++l, layer *= branching) expected += layer;
            CHECK(sc.taxonomy.size() == expected);
            CHECK(sc.truth_path.size() == depth);
            CHECK(sc.validation_errors().empty());
            // Every template has a relevance entry with resolvable actions.
            for (const auto& [tid, t] : sc.taxonomy) {
                REQUIRE(sc.relevance.count(tid) == 1);
                for (const std::string& key : sc.relevance.at(tid))
                    CHECK(sc.lookup(key) != nullptr);
            }
        }
    }
}

TEST_CASE("truth-path templates lead their sibling groups (non-misleading)") {
    Scenario sc = generate_scenario(11, 3, 3, false);
    for (std::size_t i = 0; i < sc.truth_path.size(); ++i) {
        const HypothesisTemplate& truth = sc.tmpl(sc.truth_path[i]);
        if (i == 0) {
            for (const HypothesisTemplate* t : sc.level_one())
                if (t->id != truth.id) CHECK(t->prior < truth.prior);
        } else {
            const HypothesisTemplate& parent = sc.tmpl(sc.truth_path[i - 1]);
            for (const std::string& sib : parent.children)
                if (sib != truth.id) CHECK(sc.tmpl(sib).prior < truth.prior);
        }
    }
}

TEST_CASE("misleading construction: the decoy outranks the truth at level 1") {
    Scenario sc = generate_scenario(5, 2, 2, true);
    const HypothesisTemplate& truth_root = sc.tmpl(sc.truth_path.front());
    bool decoy_leads = false;
    std::string decoy_id;
    for (const HypothesisTemplate* t : sc.level_one()) {
        if (t->id != truth_root.id && t->prior > truth_root.prior) {
            decoy_leads = true;
            decoy_id = t->id;
        }
    }
    REQUIRE(decoy_leads);
    // Somewhere below the decoy sits refuting evidence against it.
    bool refuted = false;
    for (const auto& [key, ev] : sc.evidence_repo)
        for (const FindingSpec& f : ev.findings)
            if (f.template_id == decoy_id && !f.supports && f.strength == 1.0) refuted = true;
    CHECK(refuted);
}

TEST_CASE("recommended iteration budget is truthful and minimal") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        for (bool misleading : {false, true}) {
            Scenario sc = generate_scenario(seed, misleading ? 2 : 3, 2, misleading);
            REQUIRE(sc.max_iterations.has_value());

            RunConfig cfg;
            cfg.params.max_iterations = *sc.max_iterations;
            CHECK(judge(run_episode(sc, cfg).report, sc).score == 2);

            if (*sc.max_iterations > 1) {
                cfg.params.max_iterations = *sc.max_iterations - 1;
                CHECK(judge(run_episode(sc, cfg).report, sc).score < 2);
            }
        }
    }
}

TEST_CASE("fuzz: two hundred seeds all generate valid, solvable scenarios") {
    std::uint64_t seed = 0;
    for (int i = 0; i < 200; ++i, ++seed) {
        const std::uint32_t depth = 2 + static_cast<std::uint32_t>(seed % 2);
        const std::uint32_t branching = 2 + static_cast<std::uint32_t>((seed / 2) % 2);
        const bool misleading = (seed / 4) % 2 == 0;
        Scenario sc = generate_scenario(seed, depth, branching, misleading);
        auto errs = sc.validation_errors();
        if (!errs.empty()) {
            CAPTURE(seed);
            CAPTURE(errs.front());
            FAIL_CHECK("generated scenario failed validation");
            continue;
        }
        REQUIRE(sc.max_iterations.has_value());
        RunConfig cfg;
        cfg.params.max_iterations = *sc.max_iterations;
        EpisodeResult r = run_episode(sc, cfg);
        CHECK(judge(r.report, sc).score == 2);
    }
}
