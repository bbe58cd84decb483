#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abdex/errors.hpp"

namespace abdex {

using json = nlohmann::json;

// One node of the ground-truth hypothesis taxonomy.
struct HypothesisTemplate {
    std::string id;
    std::string label;
    std::uint32_t level = 1;
    double prior = 0.0;
    std::vector<std::string> children;  // template ids, all at level+1

    bool leaf() const { return children.empty(); }
};

// What a finding claims about a template: polarity and strength.
struct FindingSpec {
    std::string template_id;
    bool supports = true;  // false => refutes
    double strength = 0.0;
};

// A single retrievable evidence item, keyed by its canonical tool action.
struct EvidenceSpec {
    std::string action_key;
    std::string payload;
    std::vector<FindingSpec> findings;
};

/// A synthetic abductive task: surface symptoms, a hypothesis taxonomy with
/// exactly one ground-truth root-to-leaf path, and an evidence repository
/// only reachable through exact action keys.
struct Scenario {
    static constexpr const char* kSchema = "abdex.scenario/1";

    std::string id;
    std::vector<std::string> surface_symptoms;
    std::map<std::string, HypothesisTemplate> taxonomy;  // keyed by template id
    std::vector<std::string> truth_path;                 // root template -> truth leaf
    std::map<std::string, EvidenceSpec> evidence_repo;   // keyed by action key
    std::map<std::string, std::vector<std::string>> relevance;  // template id -> action keys
    std::vector<std::string> roles;
    std::optional<std::uint32_t> expert_budget;   // overrides run config when set
    std::optional<std::uint32_t> max_iterations;  // generator's recommended budget
    std::optional<std::uint64_t> seed;            // present for generated scenarios

    const HypothesisTemplate& tmpl(const std::string& tid) const {
        auto it = taxonomy.find(tid);
        if (it == taxonomy.end())
            throw ValidationError("unknown template id '" + tid + "'");
        return it->second;
    }

    const std::string& truth_leaf() const { return truth_path.back(); }

    std::vector<const HypothesisTemplate*> level_one() const {
        std::vector<const HypothesisTemplate*> out;
        for (const auto& [tid, t] : taxonomy)
            if (t.level == 1) out.push_back(&t);
        return out;
    }

    /// Exact-key repository lookup; a miss is a valid, budget-consuming
    /// outcome, not an error.
    const EvidenceSpec* lookup(const std::string& action_key) const {
        auto it = evidence_repo.find(action_key);
        return it == evidence_repo.end() ? nullptr : &it->second;
    }

    /// Finds the template a hypothesis label names: exact match first, then
    /// case-insensitive.
    const HypothesisTemplate* match_label(const std::string& label) const {
        for (const auto& [tid, t] : taxonomy)
            if (t.label == label) return &t;
        auto lower = [](std::string s) {
            for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            return s;
        };
        const std::string needle = lower(label);
        for (const auto& [tid, t] : taxonomy)
            if (lower(t.label) == needle) return &t;
        return nullptr;
    }

    /// Collects every validation failure instead of stopping at the first.
    std::vector<std::string> validation_errors() const {
        std::vector<std::string> errs;
        if (id.empty()) errs.push_back("scenario id is empty");
        if (surface_symptoms.empty()) errs.push_back("surface_symptoms is empty");
        if (roles.empty()) errs.push_back("roles is empty");

        bool any_l1 = false;
        std::uint32_t max_level = 0;
        for (const auto& [tid, t] : taxonomy) {
            if (t.level == 1) any_l1 = true;
            max_level = std::max(max_level, t.level);
            if (t.prior < 0.0 || t.prior > 1.0)
                errs.push_back("template '" + tid + "' prior outside [0,1]");
            for (const std::string& c : t.children) {
                auto it = taxonomy.find(c);
                if (it == taxonomy.end())
                    errs.push_back("template '" + tid + "' references missing child '" + c + "'");
                else if (it->second.level != t.level + 1)
                    errs.push_back("child '" + c + "' of '" + tid + "' is not one level deeper");
            }
        }
        if (taxonomy.empty()) errs.push_back("taxonomy is empty");
        if (!taxonomy.empty() && !any_l1) errs.push_back("taxonomy has no level-1 template");
        for (std::uint32_t l = 1; l <= max_level; ++l) {
            bool found = false;
            for (const auto& [tid, t] : taxonomy)
                if (t.level == l) { found = true; break; }
            if (!found) errs.push_back("taxonomy levels are not contiguous (missing level " +
                                       std::to_string(l) + ")");
        }

        if (truth_path.empty()) {
            errs.push_back("truth_path is empty");
        } else {
            for (std::size_t i = 0; i < truth_path.size(); ++i) {
                auto it = taxonomy.find(truth_path[i]);
                if (it == taxonomy.end()) {
                    errs.push_back("truth_path references missing template '" + truth_path[i] + "'");
                    continue;
                }
                const HypothesisTemplate& t = it->second;
                if (t.level != i + 1)
                    errs.push_back("truth_path entry '" + t.id + "' is at level " +
                                   std::to_string(t.level) + ", expected " + std::to_string(i + 1));
                if (i + 1 < truth_path.size()) {
                    if (std::find(t.children.begin(), t.children.end(), truth_path[i + 1]) ==
                        t.children.end())
                        errs.push_back("truth_path step '" + truth_path[i + 1] +
                                       "' is not a child of '" + t.id + "'");
                } else if (!t.leaf()) {
                    errs.push_back("truth_path does not end at a leaf");
                }
            }
        }

        for (const auto& [tid, keys] : relevance) {
            if (!taxonomy.count(tid))
                errs.push_back("relevance entry for missing template '" + tid + "'");
            for (const std::string& k : keys)
                if (!evidence_repo.count(k))
                    errs.push_back("relevance action '" + k + "' is absent from evidence_repo");
        }
        for (const auto& [key, ev] : evidence_repo) {
            for (const FindingSpec& f : ev.findings) {
                if (!taxonomy.count(f.template_id))
                    errs.push_back("evidence '" + key + "' cites missing template '" +
                                   f.template_id + "'");
                if (f.strength < 0.0 || f.strength > 1.0)
                    errs.push_back("evidence '" + key + "' finding strength outside [0,1]");
            }
        }
        return errs;
    }

    json to_json() const {
        json tax = json::object();
        for (const auto& [tid, t] : taxonomy)
            tax[tid] = {{"label", t.label}, {"level", t.level}, {"prior", t.prior},
                        {"children", t.children}};
        json repo = json::object();
        for (const auto& [key, ev] : evidence_repo) {
            json findings = json::array();
            for (const FindingSpec& f : ev.findings)
                findings.push_back({{"template", f.template_id},
                                    {"polarity", f.supports ? "support" : "refute"},
                                    {"strength", f.strength}});
            repo[key] = {{"payload", ev.payload}, {"findings", std::move(findings)}};
        }
        json j{{"schema", kSchema},
               {"id", id},
               {"surface_symptoms", surface_symptoms},
               {"taxonomy", std::move(tax)},
               {"truth_path", truth_path},
               {"evidence_repo", std::move(repo)},
               {"relevance", relevance},
               {"roles", roles}};
        if (expert_budget || max_iterations || seed) {
            json meta = json::object();
            if (expert_budget) meta["expert_budget"] = *expert_budget;
            if (max_iterations) meta["recommended_max_iterations"] = *max_iterations;
            if (seed) meta["seed"] = *seed;
            j["metadata"] = std::move(meta);
        }
        return j;
    }

    static Scenario from_json(const json& j) {
        Scenario sc;
        try {
            if (j.at("schema").get<std::string>() != kSchema)
                throw ParseError("unsupported scenario schema");
            sc.id = j.at("id").get<std::string>();
            sc.surface_symptoms = j.at("surface_symptoms").get<std::vector<std::string>>();
            for (const auto& [tid, jt] : j.at("taxonomy").items()) {
                HypothesisTemplate t;
                t.id = tid;
                t.label = jt.at("label").get<std::string>();
                t.level = jt.at("level").get<std::uint32_t>();
                t.prior = jt.at("prior").get<double>();
                t.children = jt.value("children", std::vector<std::string>{});
                sc.taxonomy.emplace(tid, std::move(t));
            }
            sc.truth_path = j.at("truth_path").get<std::vector<std::string>>();
            for (const auto& [key, je] : j.at("evidence_repo").items()) {
                EvidenceSpec ev;
                ev.action_key = key;
                ev.payload = je.at("payload").get<std::string>();
                for (const json& jf : je.value("findings", json::array())) {
                    FindingSpec f;
                    f.template_id = jf.at("template").get<std::string>();
                    const std::string pol = jf.at("polarity").get<std::string>();
                    if (pol != "support" && pol != "refute")
                        throw ParseError("unknown polarity '" + pol + "'");
                    f.supports = pol == "support";
                    f.strength = jf.at("strength").get<double>();
                    ev.findings.push_back(std::move(f));
                }
                sc.evidence_repo.emplace(key, std::move(ev));
            }
            if (j.contains("relevance"))
                sc.relevance =
                    j["relevance"].get<std::map<std::string, std::vector<std::string>>>();
            sc.roles = j.at("roles").get<std::vector<std::string>>();
            if (j.contains("metadata")) {
                const json& meta = j["metadata"];
                if (meta.contains("expert_budget"))
                    sc.expert_budget = meta["expert_budget"].get<std::uint32_t>();
                if (meta.contains("recommended_max_iterations"))
                    sc.max_iterations = meta["recommended_max_iterations"].get<std::uint32_t>();
                if (meta.contains("seed")) sc.seed = meta["seed"].get<std::uint64_t>();
            }
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed scenario document: ") + e.what());
        }
        return sc;
    }
};

/// Parses and validates a scenario file. Validation failures are reported
/// all at once in the exception message.
inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ParseError("scenario file '" + path + "' is not valid JSON");
    Scenario sc = Scenario::from_json(j);
    auto errs = sc.validation_errors();
    if (!errs.empty()) {
        std::string msg = "scenario '" + path + "' failed validation:";
        for (const std::string& e : errs) msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return sc;
}

}  // namespace abdex
