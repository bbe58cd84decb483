#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "abdex/engine.hpp"
#include "abdex/oracle.hpp"
#include "abdex/scenario.hpp"
#include "abdex/trace.hpp"

namespace abdex {

// Case- and whitespace-insensitive label form used by the judge.
inline std::string normalize_label(const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

// 3-point verdict: 2 exact root-cause match, 1 ancestor on the truth path,
// 0 otherwise.
struct Verdict {
    int score = 0;
    std::optional<std::string> matched_template;
};

/// Deterministic structural judge over normalized labels.
inline Verdict judge(const Report& report, const Scenario& scenario) {
    const std::string pred = normalize_label(report.prediction);
    const std::string& leaf = scenario.truth_leaf();
    if (pred == normalize_label(scenario.tmpl(leaf).label)) return Verdict{2, leaf};
    for (std::size_t i = 0; i + 1 < scenario.truth_path.size(); ++i) {
        const std::string& tid = scenario.truth_path[i];
        if (pred == normalize_label(scenario.tmpl(tid).label)) return Verdict{1, tid};
    }
    return Verdict{0, std::nullopt};
}

struct MetricsRow {
    std::string config;
    std::size_t episodes = 0;
    double match_rate = 0.0;     // percent scoring 2
    double relevant_rate = 0.0;  // percent scoring 1 or 2
    double mean_actions = 0.0;   // tool calls per episode
    double mean_iterations = 0.0;
    double mean_terminal_level = 0.0;
    std::size_t failed_episodes = 0;  // episodes that raised instead of reporting
};

struct EpisodeOutcome {
    Verdict verdict;
    std::size_t actions = 0;
    std::size_t iterations = 0;
    std::uint32_t terminal_level = 0;
    bool failed = false;
};

inline EpisodeOutcome score_episode(const EpisodeResult& r, const Scenario& scenario) {
    EpisodeOutcome o;
    o.verdict = judge(r.report, scenario);
    o.actions = r.trace.count_of(event::kToolCall);
    o.iterations = r.final_state.iteration;
    o.terminal_level = r.final_state.level;
    return o;
}

inline MetricsRow aggregate(const std::string& label,
                            const std::vector<EpisodeOutcome>& outcomes) {
    MetricsRow row;
    row.config = label;
    row.episodes = outcomes.size();
    if (outcomes.empty()) return row;
    std::size_t match = 0, relevant = 0;
    for (const EpisodeOutcome& o : outcomes) {
        if (o.failed) {
            ++row.failed_episodes;
            continue;
        }
        if (o.verdict.score == 2) ++match;
        if (o.verdict.score >= 1) ++relevant;
        row.mean_actions += static_cast<double>(o.actions);
        row.mean_iterations += static_cast<double>(o.iterations);
        row.mean_terminal_level += static_cast<double>(o.terminal_level);
    }
    const double n = static_cast<double>(outcomes.size());
    row.match_rate = 100.0 * static_cast<double>(match) / n;
    row.relevant_rate = 100.0 * static_cast<double>(relevant) / n;
    row.mean_actions /= n;
    row.mean_iterations /= n;
    row.mean_terminal_level /= n;
    return row;
}

/// Runs every scenario under the given configuration and folds the verdicts
/// into one row. The fold happens in scenario order regardless of
/// parallelism, so the aggregate is parallelism-invariant.
inline MetricsRow run_batch(const std::vector<Scenario>& scenarios, const RunConfig& cfg,
                            std::size_t parallelism = 1, const std::string& label = "default") {
    if (scenarios.empty()) throw ValidationError("batch requires at least one scenario");
    std::vector<EpisodeOutcome> outcomes(scenarios.size());

    auto worker = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < scenarios.size(); i += stride) {
            try {
                EpisodeResult r = run_episode(scenarios[i], cfg);
                outcomes[i] = score_episode(r, scenarios[i]);
            } catch (const Error&) {
                outcomes[i] = EpisodeOutcome{};
                outcomes[i].failed = true;
            }
        }
    };

    if (parallelism <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < parallelism; ++t) pool.emplace_back(worker, t, parallelism);
        for (std::thread& t : pool) t.join();
    }
    return aggregate(label, outcomes);
}

/// Full-factorial delta x eta sweep; rows come out in grid order
/// (delta-major) with canonical labels.
inline std::vector<MetricsRow> sweep(const std::vector<Scenario>& scenarios,
                                     const std::vector<double>& delta_grid,
                                     const std::vector<std::uint32_t>& eta_grid,
                                     const RunConfig& base, std::size_t parallelism = 1) {
    if (delta_grid.empty() || eta_grid.empty())
        throw ValidationError("sweep grids must be non-empty");
    std::vector<MetricsRow> rows;
    for (double delta : delta_grid) {
        for (std::uint32_t eta : eta_grid) {
            RunConfig cfg = base;
            cfg.params.gap_delta = delta;
            cfg.params.min_support = eta;
            char label[64];
            std::snprintf(label, sizeof(label), "delta=%.2f,eta=%u", delta, eta);
            rows.push_back(run_batch(scenarios, cfg, parallelism, label));
        }
    }
    return rows;
}

inline std::string metrics_csv_header() {
    return "config,episodes,match_rate,relevant_rate,mean_actions,mean_iterations,"
           "mean_terminal_level,failed_episodes";
}

inline std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::string out = metrics_csv_header() + "\n";
    char buf[256];
    for (const MetricsRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.2f,%.2f,%.3f,%.3f,%.3f,%zu\n",
                      r.config.c_str(), r.episodes, r.match_rate, r.relevant_rate,
                      r.mean_actions, r.mean_iterations, r.mean_terminal_level,
                      r.failed_episodes);
        out += buf;
    }
    return out;
}

/// Contrast baseline: a linear searcher that always pursues the current
/// argmax, never backtracks, drills whenever granularity permits, and is
/// capped at 5 retrieval actions for the whole episode.
inline EpisodeResult greedy_baseline(const Scenario& scenario, const RunConfig& cfg) {
    constexpr std::uint32_t kTotalActionCap = 5;

    ScriptedOracle oracle(scenario, cfg.oracle_weights);
    const std::string episode_id = scenario.id + "#greedy" + std::to_string(cfg.seed);
    oracle.begin_episode(episode_id);

    EpisodeTrace trace;
    trace.episode_id = episode_id;
    std::set<std::uint64_t> observation_indices;
    ProvenanceResolver resolver = [&](const ProvenanceToken& tok) {
        return tok.episode_id == episode_id && observation_indices.count(tok.event_index) > 0;
    };

    TransitionParams params = cfg.params;
    if (scenario.expert_budget) params.expert_budget = *scenario.expert_budget;

    trace.append(event::kInit, json{{"scenario", scenario.id},
                                    {"seed", cfg.seed},
                                    {"baseline", "greedy"},
                                    {"action_cap", kTotalActionCap}});

    Initialization init = oracle.initialize_hypotheses(scenario.surface_symptoms);
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
            for (NodeId sym : symptom_ids) u.new_edges.push_back(Edge{sym, n.id, EdgeKind::Derive});
            u.new_nodes.push_back(std::move(n));
        }
        g = g.apply_update(u, resolver);
        trace.append(event::kGraphUpdated, json{{"update", update_to_json(u)}});
    }

    MachineState s;
    s.level = 1;
    s.params = params;
    std::uint32_t actions_left = kTotalActionCap;
    bool terminated = false;

    // Depth is bounded by the taxonomy, so the linear descent terminates;
    // the extra cap is a guard against malformed inputs.
    for (std::uint32_t pass = 0; pass < 16 && !terminated; ++pass) {
        const std::uint32_t iteration = s.iteration + 1;
        NodeId focus = g.reasoning_focus(s.level);
        trace.append(event::kFocusSelected, json{{"node", focus.value},
                                                 {"label", g.node(focus).label},
                                                 {"level", s.level},
                                                 {"iteration", iteration}});
        auto instructions = oracle.plan(focus, g);
        std::vector<Observation> observations;
        std::vector<Analysis> analyses;
        for (const Instruction& ins : instructions) {
            trace.append(event::kInstructionIssued,
                         json{{"expert", ins.expert}, {"directive", ins.directive},
                              {"focus", ins.focus.value}});
            const std::uint32_t budget = std::min(params.expert_budget, actions_left);
            auto [obs, analysis] = oracle.investigate(ins, budget);
            actions_left -= static_cast<std::uint32_t>(obs.size());
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
            for (Finding& f : analysis.findings)
                f.observation_event = slot_to_index.at(f.observation_event);
            observations.insert(observations.end(), obs.begin(), obs.end());
            analyses.push_back(std::move(analysis));
        }
        GraphUpdate update = oracle.propose_update(analyses, observations, g);
        g = g.apply_update(update, resolver);
        trace.append(event::kGraphUpdated, json{{"update", update_to_json(update)}});

        s.iteration = iteration;
        NodeId top = g.reasoning_focus(s.level);
        if (oracle.check_granularity(top, g)) {
            terminated = true;
            trace.append(event::kTerminated, json{{"level", s.level}});
        } else {
            auto refined = oracle.refine_hypotheses(top, g);
            GraphUpdate cu = detail::children_update(g, top, s.level, refined);
            g = g.apply_update(cu, resolver);
            trace.append(event::kGraphUpdated, json{{"update", update_to_json(cu)}});
            s.level += 1;
            trace.append(event::kDrilledDown, json{{"new_level", s.level}, {"parent", top.value}});
        }
    }

    Report report = oracle.report(g, s);
    trace.append(event::kReported, json{{"prediction", report.prediction},
                                        {"narrative", report.narrative},
                                        {"level", s.level},
                                        {"iterations", s.iteration},
                                        {"terminated", terminated}});
    return EpisodeResult{std::move(report), std::move(trace), std::move(g), s};
}

// The five trace-audit error types.
enum class AuditError {
    WrongActionSelection,
    EvidenceFabrication,
    ContextDrift,
    FailedBacktracking,
    EarlyStopping,
};

inline const char* to_string(AuditError e) {
    switch (e) {
        case AuditError::WrongActionSelection: return "wrong_action_selection";
        case AuditError::EvidenceFabrication: return "evidence_fabrication";
        case AuditError::ContextDrift: return "context_drift";
        case AuditError::FailedBacktracking: return "failed_backtracking";
        case AuditError::EarlyStopping: return "early_stopping";
    }
    return "?";
}

struct AuditFinding {
    std::string episode_id;
    AuditError error_type;
    std::vector<std::uint64_t> evidence;  // trace event indices
};

/// Scans a trace against its scenario and reports every detector that
/// fires. Detectors are independent; compound failures yield one finding
/// each.
inline std::vector<AuditFinding> audit(const EpisodeTrace& trace, const Scenario& scenario) {
    std::vector<AuditFinding> findings;
    auto add = [&](AuditError type, std::vector<std::uint64_t> evidence) {
        findings.push_back(AuditFinding{trace.episode_id, type, std::move(evidence)});
    };

    BeliefGraph g;
    std::set<std::uint64_t> observation_indices;
    std::map<std::string, std::uint64_t> first_action_use;
    std::optional<NodeId> current_focus;
    std::vector<std::uint64_t> pending_ancestor_refutes;
    std::optional<std::uint64_t> reported_index;
    std::uint32_t reported_level = 0;
    std::string prediction;

    try {
        for (const TraceEvent& ev : trace.events) {
            if (ev.type == event::kObservationRecorded) {
                observation_indices.insert(ev.index);
            } else if (ev.type == event::kFocusSelected) {
                current_focus = NodeId{ev.data.at("node").get<std::uint64_t>()};
            } else if (ev.type == event::kToolCall) {
                const std::string action = ev.data.at("action").get<std::string>();
                auto [it, fresh] = first_action_use.emplace(action, ev.index);
                if (!fresh) add(AuditError::ContextDrift, {it->second, ev.index});
                if (current_focus && g.contains(*current_focus)) {
                    const HypothesisTemplate* t =
                        scenario.match_label(g.node(*current_focus).label);
                    if (t) {
                        auto rel = scenario.relevance.find(t->id);
                        const bool relevant =
                            rel != scenario.relevance.end() &&
                            std::find(rel->second.begin(), rel->second.end(), action) !=
                                rel->second.end();
                        if (!relevant) add(AuditError::WrongActionSelection, {ev.index});
                    }
                }
            } else if (ev.type == event::kGraphUpdated) {
                GraphUpdate u = update_from_json(ev.data.at("update"));
                for (const Node& n : u.new_nodes) {
                    if (n.kind != NodeKind::Evidence) continue;
                    const bool grounded = n.provenance &&
                                          n.provenance->episode_id == trace.episode_id &&
                                          observation_indices.count(n.provenance->event_index);
                    if (!grounded) add(AuditError::EvidenceFabrication, {ev.index});
                }
                // Refutes landing on an ancestor of the current focus demand
                // a subsequent backtrack.
                if (current_focus && g.contains(*current_focus)) {
                    auto ancestors = g.lineage(*current_focus);
                    for (const Edge& e : u.new_edges) {
                        if (e.kind == EdgeKind::Refute &&
                            std::find(ancestors.begin(), ancestors.end(), e.dst) !=
                                ancestors.end())
                            pending_ancestor_refutes.push_back(ev.index);
                    }
                }
                g = g.apply_update(u, accept_all_provenance());
            } else if (ev.type == event::kBacktracked) {
                pending_ancestor_refutes.clear();
                g = g.prune_below(ev.data.at("l_star").get<std::uint32_t>()).first;
            } else if (ev.type == event::kReported) {
                reported_index = ev.index;
                reported_level = ev.data.at("level").get<std::uint32_t>();
                prediction = ev.data.at("prediction").get<std::string>();
            }
        }
    } catch (const json::exception& e) {
        throw CorruptTraceError(std::string("malformed event payload: ") + e.what());
    } catch (const Error& e) {
        throw CorruptTraceError(std::string("trace does not audit cleanly: ") + e.what());
    }

    if (!pending_ancestor_refutes.empty())
        add(AuditError::FailedBacktracking, pending_ancestor_refutes);

    if (reported_index) {
        Report r;
        r.prediction = prediction;
        const std::uint32_t truth_level =
            static_cast<std::uint32_t>(scenario.truth_path.size());
        if (reported_level < truth_level && judge(r, scenario).score < 2)
            add(AuditError::EarlyStopping, {*reported_index});
    }

    return findings;
}

inline json audit_to_json(const std::vector<AuditFinding>& findings) {
    json arr = json::array();
    for (const AuditFinding& f : findings) {
        json idx = json::array();
        for (std::uint64_t i : f.evidence) idx.push_back(i);
        arr.push_back({{"episode", f.episode_id}, {"error_type", to_string(f.error_type)},
                       {"evidence", std::move(idx)}});
    }
    return json{{"schema", "abdex.audit/1"}, {"findings", std::move(arr)}};
}

}  // namespace abdex
