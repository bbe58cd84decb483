#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "abdex/trace.hpp"

using namespace abdex;

namespace {

EpisodeTrace sample() {
    EpisodeTrace t;
    t.episode_id = "ep#0";
    t.append(event::kInit, json{{"scenario", "s"}});
    t.append(event::kFocusSelected, json{{"node", 2}});
    t.append(event::kToolCall, json{{"action", "probe"}});
    t.append(event::kObservationRecorded, json{{"action", "probe"}, {"payload", "ok"}});
    t.append(event::kReported, json{{"prediction", "x"}});
    return t;
}

}  // namespace

TEST_CASE("append assigns consecutive logical indices") {
    EpisodeTrace t = sample();
    for (std::size_t i = 0; i < t.events.size(); ++i) CHECK(t.events[i].index == i);
    CHECK(t.count_of(event::kToolCall) == 1);
    CHECK(t.last_of(event::kReported)->data.at("prediction") == "x");
    CHECK(t.last_of("no_such_type") == nullptr);
}

TEST_CASE("JSONL round-trip preserves episode id, order, and payloads") {
    EpisodeTrace t = sample();
    std::string text = t.to_jsonl();
    EpisodeTrace back = EpisodeTrace::from_jsonl(text);
    CHECK(back.episode_id == t.episode_id);
    REQUIRE(back.events.size() == t.events.size());
    for (std::size_t i = 0; i < t.events.size(); ++i) {
        CHECK(back.events[i].index == t.events[i].index);
        CHECK(back.events[i].type == t.events[i].type);
        CHECK(back.events[i].data == t.events[i].data);
    }
    CHECK(back.to_jsonl() == text);
}

TEST_CASE("the first line carries the schema id") {
    std::string text = sample().to_jsonl();
    std::string first = text.substr(0, text.find('\n'));
    json j = json::parse(first);
    CHECK(j.at("schema") == EpisodeTrace::kSchema);
    CHECK(j.at("episode") == "ep#0");
}

TEST_CASE("corrupt documents are rejected") {
    EpisodeTrace t = sample();
    std::string text = t.to_jsonl();

    SUBCASE("empty input") {
        CHECK_THROWS_AS(EpisodeTrace::from_jsonl(""), CorruptTraceError);
    }
    SUBCASE("non-JSON line") {
        CHECK_THROWS_AS(EpisodeTrace::from_jsonl(text + "garbage\n"), CorruptTraceError);
    }
    SUBCASE("index gap") {
        // Drop the middle line.
        std::size_t p1 = text.find('\n');
        std::size_t p2 = text.find('\n', p1 + 1);
        std::size_t p3 = text.find('\n', p2 + 1);
        std::string gapped = text.substr(0, p2 + 1) + text.substr(p3 + 1);
        CHECK_THROWS_AS(EpisodeTrace::from_jsonl(gapped), CorruptTraceError);
    }
    SUBCASE("wrong schema") {
        std::string swapped = text;
        const std::string from = EpisodeTrace::kSchema;
        swapped.replace(swapped.find(from), from.size(), "abdex.trace/9");
        CHECK_THROWS_AS(EpisodeTrace::from_jsonl(swapped), CorruptTraceError);
    }
    SUBCASE("missing field") {
        CHECK_THROWS_AS(EpisodeTrace::from_jsonl("{\"index\":0,\"type\":\"init\"}\n"),
                        CorruptTraceError);
    }
}

TEST_CASE("save/load through a file") {
    EpisodeTrace t = sample();
    const std::string path = "trace_test_tmp.jsonl";
    t.save(path);
    EpisodeTrace back = EpisodeTrace::load(path);
    CHECK(back.to_jsonl() == t.to_jsonl());
    std::remove(path.c_str());
    CHECK_THROWS_AS(EpisodeTrace::load(path), CorruptTraceError);
}

TEST_CASE("unknown event types survive the round-trip untouched") {
    EpisodeTrace t = sample();
    t.events.pop_back();
    t.append("remote_exchange", json{{"op", "plan"}});
    t.append(event::kReported, json{{"prediction", "x"}});
    EpisodeTrace back = EpisodeTrace::from_jsonl(t.to_jsonl());
    CHECK(back.count_of("remote_exchange") == 1);
}
