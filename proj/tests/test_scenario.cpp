#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "abdex/scenario.hpp"

using namespace abdex;

namespace {

json minimal_doc() {
    return json{
        {"schema", Scenario::kSchema},
        {"id", "mini"},
        {"surface_symptoms", {"alert: something broke"}},
        {"roles", {"linux"}},
        {"taxonomy",
         {{"a", {{"label", "Cause A"}, {"level", 1}, {"prior", 0.6}, {"children", {"a1"}}}},
          {"b", {{"label", "Cause B"}, {"level", 1}, {"prior", 0.3}, {"children", json::array()}}},
          {"a1",
           {{"label", "Cause A detail"}, {"level", 2}, {"prior", 0.7},
            {"children", json::array()}}}}},
        {"truth_path", {"a", "a1"}},
        {"evidence_repo",
         {{"check a",
           {{"payload", "a looks broken"},
            {"findings",
             json::array({{{"template", "a"}, {"polarity", "support"}, {"strength", 1.0}}})}}}}},
        {"relevance", {{"a", {"check a"}}}}};
}

std::string write_temp(const json& j) {
    std::string path = std::string("scenario_test_tmp.json");
    std::ofstream out(path);
    out << j.dump(2);
    return path;
}

}  // namespace

TEST_CASE("round-trip through JSON preserves every field") {
    Scenario sc = Scenario::from_json(minimal_doc());
    sc.expert_budget = 2;
    sc.max_iterations = 4;
    sc.seed = 99;
    Scenario back = Scenario::from_json(sc.to_json());
    CHECK(back.id == sc.id);
    CHECK(back.taxonomy.size() == 3);
    CHECK(back.truth_path == sc.truth_path);
    CHECK(back.expert_budget == sc.expert_budget);
    CHECK(back.max_iterations == sc.max_iterations);
    CHECK(back.seed == sc.seed);
    CHECK(back.to_json() == sc.to_json());
}

TEST_CASE("accessors: truth leaf, level one, lookup, label matching") {
    Scenario sc = Scenario::from_json(minimal_doc());
    CHECK(sc.truth_leaf() == "a1");
    CHECK(sc.level_one().size() == 2);
    CHECK(sc.lookup("check a") != nullptr);
    CHECK(sc.lookup("no such action") == nullptr);
    CHECK(sc.match_label("Cause A")->id == "a");
    CHECK(sc.match_label("cause a")->id == "a");  // case-insensitive fallback
    CHECK(sc.match_label("Cause Z") == nullptr);
    CHECK_THROWS_AS(sc.tmpl("zzz"), ValidationError);
}

TEST_CASE("validation_errors collects every failure at once") {
    json j = minimal_doc();
    j["id"] = "";
    j["surface_symptoms"] = json::array();
    j["taxonomy"]["a"]["children"].push_back("ghost");
    j["truth_path"] = {"a", "b"};  // b is not a child of a and not level 2
    j["relevance"]["zz"] = {"missing action"};
    Scenario sc = Scenario::from_json(j);
    auto errs = sc.validation_errors();
    CHECK(errs.size() >= 5);
    auto has = [&](const std::string& needle) {
        for (const std::string& e : errs)
            if (e.find(needle) != std::string::npos) return true;
        return false;
    };
    CHECK(has("scenario id is empty"));
    CHECK(has("surface_symptoms is empty"));
    CHECK(has("missing child 'ghost'"));
    CHECK(has("relevance entry for missing template 'zz'"));
    CHECK(has("absent from evidence_repo"));
}

TEST_CASE("validation rejects a truth path ending at an inner node") {
    json j = minimal_doc();
    j["truth_path"] = {"a"};
    auto errs = Scenario::from_json(j).validation_errors();
    bool found = false;
    for (const std::string& e : errs)
        if (e.find("does not end at a leaf") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("validation rejects non-contiguous levels and bad priors") {
    json j = minimal_doc();
    j["taxonomy"]["deep"] = {{"label", "floating"}, {"level", 4}, {"prior", 1.5},
                             {"children", json::array()}};
    auto errs = Scenario::from_json(j).validation_errors();
    bool gap = false, prior = false;
    for (const std::string& e : errs) {
        if (e.find("not contiguous") != std::string::npos) gap = true;
        if (e.find("prior outside [0,1]") != std::string::npos) prior = true;
    }
    CHECK(gap);
    CHECK(prior);
}

TEST_CASE("load_scenario: parse and validation failure modes") {
    CHECK_THROWS_AS(load_scenario("no/such/file.json"), ParseError);

    {
        std::ofstream out("scenario_test_tmp.json");
        out << "{not json";
    }
    CHECK_THROWS_AS(load_scenario("scenario_test_tmp.json"), ParseError);

    json bad_schema = minimal_doc();
    bad_schema["schema"] = "other/1";
    write_temp(bad_schema);
    CHECK_THROWS_AS(load_scenario("scenario_test_tmp.json"), ParseError);

    json invalid = minimal_doc();
    invalid["truth_path"] = {"a", "ghost"};
    write_temp(invalid);
    try {
        load_scenario("scenario_test_tmp.json");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        // The message carries the full failure list.
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }

    write_temp(minimal_doc());
    Scenario sc = load_scenario("scenario_test_tmp.json");
    CHECK(sc.id == "mini");
    std::remove("scenario_test_tmp.json");
}

TEST_CASE("the bundled filesystem scenario is valid") {
    Scenario sc = load_scenario(std::string(ABDEX_SCENARIO_DIR) + "/xfs_readonly.json");
    CHECK(sc.id == "xfs_readonly");
    CHECK(sc.truth_path == std::vector<std::string>{"fs_ro", "xfs_corruption"});
    CHECK(sc.validation_errors().empty());
    CHECK(sc.level_one().size() == 3);
}
