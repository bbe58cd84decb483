#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>

#include "abdex/cognition.hpp"
#include "abdex/trace.hpp"

namespace abdex {

// Connection settings for the remote cognition gateway. The base URL and
// credential come from the environment; everything else from the run
// configuration.
struct RemoteConfig {
    std::string base_url;   // e.g. http://localhost:8080
    std::string api_key;    // sent as a bearer token, never logged
    std::string model = "default";
    std::uint32_t timeout_seconds = 30;
    std::uint32_t retries = 2;

    static constexpr const char* kBaseUrlEnv = "ABDEX_REMOTE_BASE_URL";
    static constexpr const char* kApiKeyEnv = "ABDEX_REMOTE_API_KEY";
    static constexpr const char* kModelEnv = "ABDEX_REMOTE_MODEL";

    static RemoteConfig from_env() {
        RemoteConfig cfg;
        if (const char* v = std::getenv(kBaseUrlEnv)) cfg.base_url = v;
        if (const char* v = std::getenv(kApiKeyEnv)) cfg.api_key = v;
        if (const char* v = std::getenv(kModelEnv)) cfg.model = v;
        if (cfg.base_url.empty())
            throw CognitionFailureError(std::string(kBaseUrlEnv) + " is not set");
        return cfg;
    }
};

/// Cognition over a JSON chat-completion endpoint. Each port operation maps
/// to one POST /v1/chat/completions exchange whose assistant message must
/// be a strict JSON document for that operation. Exchanges are logged into
/// the trace with the credential redacted; prompt/completion token counts
/// accumulate over the episode.
class RemoteCognition : public CognitionPort {
public:
    explicit RemoteCognition(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

    void begin_episode(const std::string& episode_id) override {
        episode_id_ = episode_id;
        prompt_tokens_ = completion_tokens_ = 0;
    }

    void attach_trace(EpisodeTrace* trace) override { trace_ = trace; }

    std::uint64_t prompt_tokens() const { return prompt_tokens_; }
    std::uint64_t completion_tokens() const { return completion_tokens_; }

    Initialization initialize_hypotheses(const std::vector<std::string>& symptoms) override {
        if (symptoms.empty()) throw EmptyInputError("no surface symptoms given");
        json reply = exchange("initialize_hypotheses", json{{"symptoms", symptoms}});
        Initialization init;
        init.symptom_labels = symptoms;
        for (const json& jh : field(reply, "hypotheses"))
            init.hypotheses.push_back(HypothesisSpec{jh.at("label").get<std::string>(),
                                                     jh.at("prior").get<double>()});
        if (init.hypotheses.empty())
            throw CognitionFailureError("remote returned no level-1 hypotheses");
        return init;
    }

    std::vector<Instruction> plan(NodeId focus, const BeliefGraph& g) override {
        const Node& n = g.node(focus);
        json reply = exchange("plan", json{{"focus", n.label}, {"belief", g.to_json()}});
        std::vector<Instruction> out;
        for (const json& ji : field(reply, "instructions")) {
            Instruction ins;
            ins.expert = ji.at("expert").get<std::string>();
            ins.directive = ji.at("directive").get<std::string>();
            ins.focus = focus;
            ins.focus_label = n.label;
            ins.belief_digest = g.serialize();
            out.push_back(std::move(ins));
        }
        if (out.empty()) throw CognitionFailureError("remote returned an empty plan");
        return out;
    }

    std::pair<std::vector<Observation>, Analysis> investigate(const Instruction& instruction,
                                                              std::uint32_t budget) override {
        json reply = exchange("investigate", json{{"expert", instruction.expert},
                                                  {"directive", instruction.directive},
                                                  {"focus", instruction.focus_label},
                                                  {"budget", budget}});
        std::vector<Observation> observations;
        for (const json& jo : field(reply, "observations")) {
            if (observations.size() >= budget) break;
            Observation obs;
            obs.action_key = jo.at("action").get<std::string>();
            obs.payload = jo.at("payload").get<std::string>();
            obs.event_index = observations.size();
            observations.push_back(std::move(obs));
        }
        Analysis analysis;
        analysis.expert = instruction.expert;
        for (const json& jf : field(reply, "findings")) {
            Finding f;
            f.hypothesis_label = jf.at("hypothesis").get<std::string>();
            f.supports = jf.at("polarity").get<std::string>() == "support";
            f.strength = jf.at("strength").get<double>();
            f.observation_event = jf.at("observation").get<std::uint64_t>();
            if (f.observation_event >= observations.size())
                throw CognitionFailureError("remote finding cites an unreturned observation");
            analysis.findings.push_back(std::move(f));
        }
        return {observations, analysis};
    }

    GraphUpdate propose_update(const std::vector<Analysis>& analyses,
                               const std::vector<Observation>& observations,
                               const BeliefGraph& g) override {
        json janalyses = json::array();
        for (const Analysis& a : analyses) {
            json jf = json::array();
            for (const Finding& f : a.findings)
                jf.push_back({{"hypothesis", f.hypothesis_label},
                              {"polarity", f.supports ? "support" : "refute"},
                              {"strength", f.strength},
                              {"observation", f.observation_event}});
            janalyses.push_back({{"expert", a.expert}, {"findings", std::move(jf)}});
        }
        json jobs = json::array();
        for (const Observation& o : observations)
            jobs.push_back({{"action", o.action_key}, {"event", o.event_index}});
        json reply = exchange("propose_update", json{{"analyses", std::move(janalyses)},
                                                     {"observations", std::move(jobs)},
                                                     {"belief", g.to_json()}});

        GraphUpdate u;
        std::uint64_t next = g.next_id().value;
        for (const json& jr : field(reply, "recalibrations"))
            u.recalibrations.emplace_back(NodeId{jr.at("node").get<std::uint64_t>()},
                                          jr.at("confidence").get<double>());
        for (const json& je : field(reply, "evidence")) {
            Node ev;
            ev.id = NodeId{next++};
            ev.kind = NodeKind::Evidence;
            ev.label = je.at("label").get<std::string>();
            // Grounding is enforced downstream: the engine's resolver
            // rejects tokens that do not name a recorded observation.
            ev.provenance =
                ProvenanceToken{episode_id_, je.at("observation").get<std::uint64_t>()};
            for (const json& jl : je.at("links")) {
                u.new_edges.push_back(
                    Edge{ev.id, NodeId{jl.at("node").get<std::uint64_t>()},
                         jl.at("polarity").get<std::string>() == "support" ? EdgeKind::Support
                                                                           : EdgeKind::Refute});
            }
            u.new_nodes.push_back(std::move(ev));
        }
        return u;
    }

    std::vector<HypothesisSpec> refine_hypotheses(NodeId top, const BeliefGraph& g) override {
        json reply =
            exchange("refine_hypotheses", json{{"focus", g.node(top).label}, {"belief", g.to_json()}});
        std::vector<HypothesisSpec> specs;
        for (const json& jc : field(reply, "children"))
            specs.push_back(HypothesisSpec{jc.at("label").get<std::string>(),
                                           jc.at("prior").get<double>()});
        if (specs.empty())
            throw RefinementEmptyError("remote returned no refined hypotheses");
        return specs;
    }

    bool check_granularity(NodeId top, const BeliefGraph& g) override {
        json reply =
            exchange("check_granularity", json{{"focus", g.node(top).label}, {"belief", g.to_json()}});
        return field(reply, "granular").get<bool>();
    }

    Report report(const BeliefGraph& g, const MachineState& s) override {
        json reply = exchange("report", json{{"level", s.level}, {"belief", g.to_json()}});
        Report r;
        r.prediction = field(reply, "prediction").get<std::string>();
        r.narrative = reply.value("narrative", "");
        return r;
    }

private:
    static json field(const json& j, const char* key) {
        if (!j.contains(key))
            throw CognitionFailureError(std::string("remote reply lacks field '") + key + "'");
        return j[key];
    }

    json exchange(const std::string& op, json payload) {
        json request{{"model", cfg_.model},
                     {"temperature", 0},
                     {"messages",
                      json::array({json{{"role", "system"},
                                        {"content",
                                         "You are the cognitive layer of an abductive diagnosis "
                                         "engine. Reply with a single JSON object for the "
                                         "requested operation, no prose."}},
                                   json{{"role", "user"},
                                        {"content", json{{"op", op}, {"input", payload}}.dump()}}})}};

        std::string last_error;
        for (std::uint32_t attempt = 0; attempt <= cfg_.retries; ++attempt) {
            httplib::Client client(cfg_.base_url);
            client.set_connection_timeout(cfg_.timeout_seconds, 0);
            client.set_read_timeout(cfg_.timeout_seconds, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + cfg_.api_key);

            auto res = client.Post("/v1/chat/completions", headers, request.dump(),
                                   "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            json body = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
            if (body.is_discarded()) {
                last_error = "response body is not valid JSON";
                continue;
            }
            try {
                if (body.contains("usage")) {
                    prompt_tokens_ += body["usage"].value("prompt_tokens", 0ull);
                    completion_tokens_ += body["usage"].value("completion_tokens", 0ull);
                }
                std::string content =
                    body.at("choices").at(0).at("message").at("content").get<std::string>();
                json reply = json::parse(content, nullptr, /*allow_exceptions=*/false);
                if (reply.is_discarded())
                    throw CognitionFailureError("assistant message is not valid JSON");
                log_exchange(op, request, body);
                return reply;
            } catch (const json::exception& e) {
                last_error = std::string("malformed completion: ") + e.what();
            }
        }
        throw CognitionFailureError("remote cognition failed after " +
                                    std::to_string(cfg_.retries + 1) + " attempts (" + op +
                                    "): " + last_error);
    }

    void log_exchange(const std::string& op, const json& request, const json& response) {
        if (!trace_) return;
        // The Authorization header never enters these JSON documents, so
        // redaction reduces to never logging the config.
        trace_->append("remote_exchange",
                       json{{"op", op}, {"request", request}, {"response", response}});
    }

    RemoteConfig cfg_;
    std::string episode_id_ = "episode";
    EpisodeTrace* trace_ = nullptr;
    std::uint64_t prompt_tokens_ = 0;
    std::uint64_t completion_tokens_ = 0;
};

}  // namespace abdex
