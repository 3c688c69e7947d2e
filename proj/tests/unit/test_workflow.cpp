#include "mrs/processes.hpp"
#include "mrs/workflow.hpp"

#include "../support/gateway_oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace mrs::workflow;

namespace {

ProcessDefinition parse_ok(const std::string& text)
{
    auto r = parse_process(text);
    const std::string first_error = r.errors.empty() ? std::string{} : r.errors.front();
    INFO(first_error);
    REQUIRE(r.ok());
    return *r.definition;
}

std::vector<std::vector<bool>> all_assignments(int n)
{
    std::vector<std::vector<bool>> out;
    for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<bool> v(n);
        for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1;
        out.push_back(v);
    }
    return out;
}

struct Trace {
    InstanceStatus status;
    std::map<std::string, std::vector<int>> emitted_at;  // action -> step indices
};

Trace run_steps(const ProcessDefinition& def, const ConditionEnv& env)
{
    Trace t;
    auto inst = start_instance(def);
    for (int step = 1; step < 64 && inst.status == InstanceStatus::Running; ++step) {
        auto r = step_instance(def, inst, env);
        for (const auto& a : r.emitted) t.emitted_at[a].push_back(step);
        inst = std::move(r.instance);
    }
    t.status = inst.status;
    return t;
}

}  // namespace

TEST_SUITE("workflow")
{
    TEST_CASE("split truth tables match the reference")
    {
        for (auto kind : {GatewayKind::ExclusiveOr, GatewayKind::InclusiveOr, GatewayKind::ParallelAnd}) {
            for (int n = 2; n <= 4; ++n) {
                for (std::optional<int> fallback : {std::optional<int>{}, std::optional<int>{0}}) {
                    for (const auto& values : all_assignments(n)) {
                        std::vector<BranchCondition> branches;
                        for (int i = 0; i < n; ++i) {
                            branches.push_back({static_cast<EdgeIndex>(10 + i), values[i], fallback == i});
                        }
                        auto expected = oracle::split(kind, values, kind == GatewayKind::ExclusiveOr ? fallback : std::nullopt);
                        if (kind == GatewayKind::InclusiveOr && fallback) {
                            // Defaults are only meaningful on XOR; the branch just counts as false.
                            expected = oracle::split(kind, values, fallback);
                        }
                        if (!expected) {
                            CHECK_THROWS_AS(split(kind, branches), GatewayFault);
                            continue;
                        }
                        EdgeSet want;
                        for (int i : *expected) want.insert(10 + i);
                        CHECK(split(kind, branches) == want);
                    }
                }
            }
        }
    }

    TEST_CASE("split rejects fewer than two branches")
    {
        std::vector<BranchCondition> one{{0, true, false}};
        CHECK_THROWS_AS(split(GatewayKind::ParallelAnd, one), GatewayFault);
    }

    TEST_CASE("merge truth tables match the reference")
    {
        const int n = 3;
        for (auto kind : {GatewayKind::ExclusiveOr, GatewayKind::InclusiveOr, GatewayKind::ParallelAnd}) {
            for (int am = 0; am < (1 << n); ++am) {
                for (int vm = 0; vm < (1 << n); ++vm) {
                    std::set<int> arrived, activated;
                    EdgeSet a, v, d;
                    for (int i = 0; i < n; ++i) {
                        d.insert(i);
                        if ((am >> i) & 1) arrived.insert(i), a.insert(i);
                        if ((vm >> i) & 1) activated.insert(i), v.insert(i);
                    }
                    // XOR and AND merges treat every declared edge as activated.
                    const std::set<int> act = kind == GatewayKind::InclusiveOr ? activated : std::set<int>{0, 1, 2};
                    const EdgeSet actE = kind == GatewayKind::InclusiveOr ? v : d;
                    auto expected = oracle::merge(kind, arrived, act, n);
                    if (!expected) {
                        CHECK_THROWS_AS(merge_fire(kind, a, actE, d), GatewayFault);
                    } else {
                        CHECK(merge_fire(kind, a, actE, d) == *expected);
                    }
                }
            }
        }
    }

    TEST_CASE("diamonds fire their merge exactly when the reference simulation does")
    {
        std::optional<int> offset;
        for (auto kind : {GatewayKind::ExclusiveOr, GatewayKind::InclusiveOr, GatewayKind::ParallelAnd}) {
            for (int n = 2; n <= 3; ++n) {
                std::vector<int> lengths(n, 1);
                // Every length combination in {1,2,3}^n.
                for (int code = 0; code < (n == 2 ? 9 : 27); ++code) {
                    for (int i = 0, c = code; i < n; ++i, c /= 3) lengths[i] = 1 + c % 3;
                    const auto def = parse_ok(oracle::diamond_document(kind, lengths));
                    for (const auto& values : all_assignments(n)) {
                        CAPTURE(static_cast<int>(kind));
                        CAPTURE(code);
                        const auto activated = oracle::split(kind, values, std::nullopt);
                        const auto t = run_steps(def, oracle::env_for(values));
                        if (!activated) {
                            CHECK(t.status == InstanceStatus::Aborted);
                            CHECK(t.emitted_at.count("after") == 0);
                            continue;
                        }
                        REQUIRE(t.status == InstanceStatus::Completed);
                        for (int i = 0; i < n; ++i) {
                            const auto id = "b" + std::to_string(i) + "_1";
                            CHECK(t.emitted_at.count(id) == static_cast<std::size_t>(activated->count(i)));
                        }
                        const auto departures = oracle::diamond_departures(kind, *activated, lengths);
                        REQUIRE(departures.size() == 1);
                        REQUIRE(t.emitted_at.count("after") == 1);
                        REQUIRE(t.emitted_at.at("after").size() == 1);
                        const int delta = t.emitted_at.at("after").front() - departures.front();
                        if (!offset) offset = delta;
                        CHECK(delta == *offset);
                    }
                }
            }
        }
    }

    TEST_CASE("xor default edge is taken only when nothing else is true")
    {
        const auto def = parse_ok(oracle::diamond_document(GatewayKind::ExclusiveOr, {1, 1, 1}, 2));
        auto t = run_steps(def, {{"c0", false}, {"c1", false}});
        CHECK(t.status == InstanceStatus::Completed);
        CHECK(t.emitted_at.count("b2_1") == 1);
        t = run_steps(def, {{"c0", false}, {"c1", true}});
        CHECK(t.emitted_at.count("b1_1") == 1);
        CHECK(t.emitted_at.count("b2_1") == 0);
        t = run_steps(def, {{"c0", true}, {"c1", true}});
        CHECK(t.status == InstanceStatus::Aborted);
    }

    TEST_CASE("unbound condition aborts the instance")
    {
        const auto def = parse_ok(oracle::diamond_document(GatewayKind::InclusiveOr, {1, 1}));
        auto t = run_steps(def, {{"c0", true}});
        CHECK(t.status == InstanceStatus::Aborted);
        auto inst = run_to_completion(def, {{"c0", true}}, [](const std::string&, ConditionEnv&) {});
        CHECK(inst.diagnostic.find("c1") != std::string::npos);
    }

    TEST_CASE("run_to_completion lets actions bind later conditions")
    {
        const auto def = parse_ok(oracle::diamond_document(GatewayKind::ExclusiveOr, {1, 1}));
        // Conditions are read at the split, before any branch action runs.
        std::vector<std::string> seen;
        auto inst = run_to_completion(def, {{"c0", false}, {"c1", true}},
                                      [&](const std::string& key, ConditionEnv&) { seen.push_back(key); });
        CHECK(inst.status == InstanceStatus::Completed);
        CHECK(seen == std::vector<std::string>{"b1_1", "after"});
    }

    TEST_CASE("serialize round trips")
    {
        for (auto kind : {GatewayKind::ExclusiveOr, GatewayKind::InclusiveOr, GatewayKind::ParallelAnd}) {
            const auto def = parse_ok(oracle::diamond_document(kind, {2, 1, 3}));
            CHECK(parse_ok(serialize(def)) == def);
        }
        const auto& builtin = mrs::ControllerProcesses::builtin();
        for (const auto* def : {&builtin.rqm, &builtin.pln, &builtin.rbm}) {
            CHECK(parse_ok(serialize(*def)) == *def);
        }
    }

    TEST_CASE("validation reports every structural problem")
    {
        auto r = parse_process("not json");
        CHECK_FALSE(r.ok());
        CHECK_FALSE(r.errors.empty());

        r = parse_process(R"({"id":"x","start":"s","end":["e"],"nodes":[],"edges":[]})");
        CHECK_FALSE(r.ok());

        // OR split without a pair.
        auto doc = nlohmann::json::parse(oracle::diamond_document(GatewayKind::InclusiveOr, {1, 1}));
        for (auto& n : doc["nodes"]) n.erase("pair");
        r = parse_process(doc.dump());
        CHECK_FALSE(r.ok());

        doc = nlohmann::json::parse(oracle::diamond_document(GatewayKind::ExclusiveOr, {1, 1}));
        doc["nodes"][1]["gateway"] = "nand";
        CHECK_FALSE(parse_process(doc.dump()).ok());

        // Dangling edge and a missing condition reported together.
        doc = nlohmann::json::parse(oracle::diamond_document(GatewayKind::ExclusiveOr, {1, 1}));
        doc["edges"].push_back({{"from", "after"}, {"to", "nowhere"}});
        for (auto& e : doc["edges"]) e.erase("condition");
        r = parse_process(doc.dump());
        CHECK_FALSE(r.ok());
        CHECK(r.errors.size() >= 2);

        // Cycle.
        doc = nlohmann::json::parse(oracle::diamond_document(GatewayKind::ParallelAnd, {2, 1}));
        doc["edges"].push_back({{"from", "b0_2"}, {"to", "b0_1"}});
        r = parse_process(doc.dump());
        CHECK_FALSE(r.ok());

        // XOR edge without a condition.
        doc = nlohmann::json::parse(oracle::diamond_document(GatewayKind::ExclusiveOr, {1, 1}));
        for (auto& e : doc["edges"]) e.erase("condition");
        r = parse_process(doc.dump());
        CHECK_FALSE(r.ok());
    }

    TEST_CASE("shipped controller processes validate")
    {
        const auto& p = mrs::ControllerProcesses::builtin();
        CHECK(p.rqm.id == "rqm");
        CHECK(p.pln.id == "pln");
        CHECK(p.rbm.id == "rbm");
        for (const char* name : {"rqm", "pln", "rbm"}) {
            auto r = parse_process(mrs::builtin_process_text(name));
            CHECK(r.ok());
        }
    }

    TEST_CASE("process runner rejects unbound actions")
    {
        const auto def = parse_ok(oracle::diamond_document(GatewayKind::ParallelAnd, {1, 1}));
        mrs::ProcessRunner runner(def);
        runner.bind("b0_1", [](ConditionEnv&) {});
        runner.bind("b1_1", [](ConditionEnv&) {});
        constexpr std::array<std::string_view, 1> stimuli{"go"};
        CHECK_THROWS(runner.run("go", stimuli));
        runner.bind("after", [](ConditionEnv&) {});
        CHECK_NOTHROW(runner.run("go", stimuli));
        CHECK(runner.instances_run() == 2);
    }
}
