#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "abdex/graph.hpp"

namespace abdex {

// Logical-index ordered event log of one diagnostic run. Indices are the
// only clock; wall time never enters the trace.
struct TraceEvent {
    std::uint64_t index = 0;
    std::string type;
    json data;
};

namespace event {
inline constexpr const char* kInit = "init";
inline constexpr const char* kFocusSelected = "focus_selected";
inline constexpr const char* kInstructionIssued = "instruction_issued";
inline constexpr const char* kToolCall = "tool_call";
inline constexpr const char* kObservationRecorded = "observation_recorded";
inline constexpr const char* kGraphUpdated = "graph_updated";
inline constexpr const char* kBacktracked = "backtracked";
inline constexpr const char* kDrilledDown = "drilled_down";
inline constexpr const char* kStayed = "stayed";
inline constexpr const char* kTerminated = "terminated";
inline constexpr const char* kReported = "reported";
}  // namespace event

struct EpisodeTrace {
    static constexpr const char* kSchema = "abdex.trace/1";

    std::string episode_id;
    std::vector<TraceEvent> events;

    std::uint64_t append(const std::string& type, json data) {
        TraceEvent ev;
        ev.index = events.size();
        ev.type = type;
        ev.data = std::move(data);
        events.push_back(std::move(ev));
        return events.size() - 1;
    }

    const TraceEvent* last_of(const std::string& type) const {
        for (auto it = events.rbegin(); it != events.rend(); ++it)
            if (it->type == type) return &*it;
        return nullptr;
    }

    std::size_t count_of(const std::string& type) const {
        std::size_t n = 0;
        for (const TraceEvent& ev : events)
            if (ev.type == type) ++n;
        return n;
    }

    // One JSON object per line; the first line carries the schema id.
    std::string to_jsonl() const {
        std::string out;
        for (const TraceEvent& ev : events) {
            json line{{"index", ev.index}, {"type", ev.type}, {"data", ev.data}};
            if (ev.index == 0) {
                line["schema"] = kSchema;
                line["episode"] = episode_id;
            }
            out += line.dump();
            out += '\n';
        }
        return out;
    }

    static EpisodeTrace from_jsonl(const std::string& text) {
        EpisodeTrace t;
        std::istringstream in(text);
        std::string line;
        std::uint64_t expected = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
            if (j.is_discarded()) throw CorruptTraceError("trace line is not valid JSON");
            try {
                TraceEvent ev;
                ev.index = j.at("index").get<std::uint64_t>();
                ev.type = j.at("type").get<std::string>();
                ev.data = j.at("data");
                if (ev.index != expected)
                    throw CorruptTraceError("trace indices are not strictly increasing from 0");
                if (ev.index == 0) {
                    if (j.value("schema", "") != kSchema)
                        throw CorruptTraceError("unsupported trace schema");
                    t.episode_id = j.value("episode", "");
                }
                ++expected;
                t.events.push_back(std::move(ev));
            } catch (const json::exception& e) {
                throw CorruptTraceError(std::string("malformed trace event: ") + e.what());
            }
        }
        if (t.events.empty()) throw CorruptTraceError("trace is empty");
        return t;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot open '" + path + "' for writing");
        out << to_jsonl();
    }

    static EpisodeTrace load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw CorruptTraceError("cannot open trace file '" + path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        return from_jsonl(buf.str());
    }
};

}  // namespace abdex
