#include "mrs/pln.hpp"
#include "mrs/rqm.hpp"
#include "mrs/sim.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>

using namespace mrs;
using namespace std::chrono_literals;
using fixtures::Log;
using Pairs = std::vector<std::pair<std::string, std::string>>;

namespace {

pln::RegistrySnapshot registry(std::initializer_list<pln::RobotView> robots) { return robots; }

const pln::RobotView kR1{"R1", {"C1", "C2", "C3", "C4"}, 9};
const pln::RobotView kR2{"R2", {"C2", "C4"}, 0};
const pln::RobotView kR3{"R3", {"C2", "C5"}, 11};

Pairs plan_pairs(const VerifiedPlan& plan)
{
    Pairs out;
    for (const auto& a : plan.assignments) out.push_back({a.task_id, a.robot_id});
    return out;
}

std::optional<FailureReason> reason_of(const sim::Simulation& s, std::size_t i = 0)
{
    REQUIRE(s.outcomes().size() > i);
    return s.outcomes()[i].outcome.failure_reason;
}

}  // namespace

TEST_SUITE("pln")
{
    TEST_CASE("worked example balances on history")
    {
        std::vector<pln::Decision> decisions;
        auto r = pln::build_verified_plan(fixtures::pb2(), "rq-1", registry({kR1, kR3}), &decisions);
        REQUIRE(std::holds_alternative<VerifiedPlan>(r));
        const auto& plan = std::get<VerifiedPlan>(r);
        CHECK(plan.blueprint_id == "Pb2");
        CHECK(plan.request_id == "rq-1");
        CHECK(plan_pairs(plan) == Pairs{{"T1", "R1"}, {"T2", "R1"}, {"T3", "R3"}});
        REQUIRE(decisions.size() == 3);
        // T2 sees R1 with the tentative T1 assignment added.
        REQUIRE(decisions[1].candidates.size() == 2);
        CHECK(decisions[1].candidates[0].robot_id == "R1");
        CHECK(decisions[1].candidates[0].effective_history == 10);
        CHECK(decisions[1].candidates[1].effective_history == 11);
    }

    TEST_CASE("ties go to the smallest id")
    {
        std::vector<pln::Candidate> c{{"R3", 4}, {"R1", 4}, {"R2", 5}};
        CHECK(pln::select_robot(c) == "R1");
        c = {{"R10", 0}, {"R9", 0}};
        CHECK(pln::select_robot(c) == "R10");
    }

    TEST_CASE("tentative assignments spread equal robots")
    {
        PlanBlueprint pb{"Pb", "Rq", {{"A", {"C2"}}, {"B", {"C2"}}, {"C", {"C2"}}, {"D", {"C2"}}}};
        auto r = pln::build_verified_plan(pb, "x", registry({{"R1", {"C2"}, 3}, {"R2", {"C2"}, 3}}));
        CHECK(plan_pairs(std::get<VerifiedPlan>(r)) == Pairs{{"A", "R1"}, {"B", "R2"}, {"C", "R1"}, {"D", "R2"}});
    }

    TEST_CASE("fewer than two robots is InsufficientRobots")
    {
        auto r = pln::build_verified_plan(fixtures::pb2(), "x", registry({kR1}));
        CHECK(std::get<pln::PlanFailure>(r) == pln::PlanFailure{FailureReason::InsufficientRobots, std::nullopt});
        r = pln::build_verified_plan(fixtures::pb2(), "x", {});
        CHECK(std::get<pln::PlanFailure>(r).reason == FailureReason::InsufficientRobots);
    }

    TEST_CASE("first unmatched task is reported")
    {
        PlanBlueprint pb{"Pb3", "Rq3", {{"T1", {"C2"}}, {"T2", {"C9"}}, {"T3", {"C8"}}}};
        auto r = pln::build_verified_plan(pb, "x", registry({kR1, kR2, kR3}));
        CHECK(std::get<pln::PlanFailure>(r) == pln::PlanFailure{FailureReason::CapabilityMismatch, "T2"});
        // Needs a single robot holding every capability of the task.
        r = pln::build_verified_plan(fixtures::pb2(), "x", registry({kR2, kR3}));
        CHECK(std::get<pln::PlanFailure>(r) == pln::PlanFailure{FailureReason::CapabilityMismatch, "T1"});
    }

    TEST_CASE("snapshot lists registered robots only")
    {
        kb::KnowledgeBase k;
        k.add_robot("R2", {"C2"});
        k.register_robot("R3", {"C5"});
        k.register_robot("R1", {"C1"});
        k.set_history("R1", 4);
        auto s = pln::snapshot(k);
        REQUIRE(s.size() == 2);
        CHECK(s[0].id == "R1");
        CHECK(s[0].tasks_completed == 4);
        CHECK(s[1].id == "R3");
    }
}

TEST_SUITE("rqm")
{
    TEST_CASE("requests are served first come first served")
    {
        auto c = fixtures::quiet();
        sim::Simulation s(c);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        const auto a = s.submit_request("Rq2");
        const auto b = s.submit_request("Rq2");
        const auto d = s.submit_request("Rq2");
        s.run_until(1s);
        // Only one request is handed to the planner while another is open.
        CHECK(s.rqm().forwarded() == std::vector<RequestId>{a});
        CHECK(s.rqm().queue_length() == 2);
        s.run_until(10min);
        CHECK(s.rqm().forwarded() == std::vector<RequestId>{a, b, d});
        REQUIRE(s.outcomes().size() == 3);
        CHECK(s.outcomes()[0].outcome.request_id == a);
        CHECK(s.outcomes()[1].outcome.request_id == b);
        CHECK(s.outcomes()[2].outcome.request_id == d);
        for (const auto& o : s.outcomes()) CHECK(o.outcome.status == OutcomeStatus::Success);
    }

    TEST_CASE("duplicate ids are refused")
    {
        EventQueue q;
        bus::Broker broker(q);
        kb::KnowledgeBase k;
        events::Notifier n;
        rqm::RequestsManager m(broker, k, ControllerProcesses::builtin().rqm, n, {});
        Request r{"rq-1", "Rq2", 0ms};
        CHECK(m.on_request(r));
        CHECK_FALSE(m.on_request(r));
        CHECK(m.received() == 1);
        CHECK(m.duplicates() == 1);
    }

    TEST_CASE("unknown kind fails with NoBlueprint without contacting the planner")
    {
        sim::Simulation s(fixtures::quiet());
        std::vector<bus::AclMessage> to_planner;
        s.register_robot("R1", {"C1"});
        s.submit_request("Rq9");
        s.run_until(1min);
        CHECK(reason_of(s) == FailureReason::NoBlueprint);
        CHECK(s.rqm().forwarded().empty());
        CHECK(s.rqm().rejected_no_blueprint() == 1);
        auto out = s.finish();
        CHECK(out.trace.find("\"receiver\":\"PLN\"") == std::string::npos);
    }

    TEST_CASE("planner silence times out and late feedback is stale")
    {
        EventQueue q;
        bus::Broker broker(q);
        kb::KnowledgeBase k;
        k.upsert_blueprint(fixtures::pb2());
        events::Notifier n;
        std::vector<RequestOutcome> outcomes;
        n.subscribe([&](SimTime, const events::Event& e) {
            if (auto* f = std::get_if<events::RequestFinished>(&e)) outcomes.push_back(f->outcome);
        });
        rqm::RequestsManager m(broker, k, ControllerProcesses::builtin().rqm, n, {30s, 5min, 1});
        // A planner that never answers.
        auto planner = broker.register_agent(std::string(bus::kPlanner));
        std::vector<bus::AclMessage> inbox;
        broker.on_message(planner, [&](const bus::AclMessage& msg) { inbox.push_back(msg); });

        REQUIRE(m.on_request({"rq-1", "Rq2", 0ms}));
        m.dispatch_next();
        q.run_until(29999ms);
        CHECK(outcomes.empty());
        CHECK(inbox.size() == 1);
        q.run_until(30s);
        REQUIRE(outcomes.size() == 1);
        CHECK(outcomes[0].failure_reason == FailureReason::PlanTimeout);
        CHECK(outcomes[0].completion_time == 30s);

        Feedback late{"plan", "rq-1", std::nullopt, std::nullopt, ""};
        broker.send({bus::Performative::Agree, planner, m.id(), "rq-1", bus::ContentKind::Feedback,
                     nlohmann::json(late).dump()});
        q.run_until(31s);
        CHECK(m.stale_feedback() == 1);
        CHECK(outcomes.size() == 1);
    }

    TEST_CASE("planner failures are reported with their reason")
    {
        sim::Simulation s(fixtures::quiet());
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.submit_request("Rq2");
        s.run_until(1min);
        CHECK(reason_of(s) == FailureReason::InsufficientRobots);

        s.register_robot("R2", {"C2", "C4"});
        s.deregister_robot("R1");
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(2min);
        CHECK(reason_of(s, 1) == FailureReason::CapabilityMismatch);
    }
}

TEST_SUITE("rbm")
{
    TEST_CASE("worked example dispatches in plan order")
    {
        sim::Simulation s(fixtures::quiet());
        Log log;
        log.attach(s);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(10min);
        CHECK(fixtures::assignments(log) == Pairs{{"T1", "R1"}, {"T2", "R1"}, {"T3", "R3"}});
        REQUIRE(s.outcomes().size() == 1);
        CHECK(s.outcomes()[0].outcome.status == OutcomeStatus::Success);
        CHECK(s.outcomes()[0].outcome.completion_time == 60s);
        CHECK(s.kb().robot("R1")->tasks_completed == 11);
        CHECK(s.kb().robot("R3")->tasks_completed == 12);
        // Each assignment is preceded by the robot going Controlled only after it.
        auto states = log.of<events::RobotStateChanged>();
        auto assigned = log.of<events::TaskAssigned>();
        CHECK(assigned.front().first == 0s);
        CHECK(assigned[1].first == 20s);
        CHECK(assigned[2].first == 40s);
        std::size_t controlled = 0;
        for (const auto& [t, e] : states) controlled += e.to == Lifecycle::Controlled;
        CHECK(controlled == 3);
    }

    TEST_CASE("a failed task skips the rest of the plan")
    {
        auto c = fixtures::quiet();
        c.blueprints = {{"Pb", "RqF", {{"T1", {"C1"}}, {"T2", {"C5"}}, {"T3", {"C2"}}}}};
        c.faults["R3"] = {0.0, 1.0};
        sim::Simulation s(c);
        Log log;
        log.attach(s);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("RqF");
        s.run_until(10min);
        CHECK(fixtures::assignments(log) == Pairs{{"T1", "R1"}, {"T2", "R3"}});
        CHECK(reason_of(s) == FailureReason::TaskFailed);
        // A failed task does not count as completed work.
        CHECK(s.kb().robot("R3")->tasks_completed == 11);
        CHECK(s.kb().robot("R3")->lifecycle == Lifecycle::Uncontrolled);
    }

    TEST_CASE("a stalled robot times out")
    {
        auto c = fixtures::quiet();
        c.faults["R1"] = {1.0, 0.0};
        sim::Simulation s(c);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(10min);
        CHECK(reason_of(s) == FailureReason::TaskTimeout);
        CHECK(s.outcomes()[0].outcome.completion_time == c.task_timeout);
        CHECK(s.kb().robot("R1")->lifecycle == Lifecycle::Uncontrolled);
    }

    TEST_CASE("feedback arriving exactly at the deadline wins")
    {
        auto c = fixtures::quiet();
        c.task_duration = c.task_timeout;
        sim::Simulation s(c);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(10min);
        REQUIRE(s.outcomes().size() == 1);
        CHECK(s.outcomes()[0].outcome.status == OutcomeStatus::Success);
        CHECK(s.outcomes()[0].outcome.completion_time == 3 * c.task_timeout);
    }

    TEST_CASE("deregistering a busy robot is deferred until its task ends")
    {
        sim::Simulation s(fixtures::quiet());
        Log log;
        log.attach(s);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(5s);
        REQUIRE(s.kb().robot("R1")->lifecycle == Lifecycle::Controlled);
        CHECK(s.deregister_robot("R1") == rbm::DeregistrationResult::Deferred);
        CHECK(s.kb().robot("R1")->lifecycle == Lifecycle::Controlled);
        s.run_until(10min);
        CHECK(s.kb().robot("R1")->lifecycle == Lifecycle::Unregistered);
        // T1 completed and counted; T2 cannot go to a robot that left.
        CHECK(s.kb().robot("R1")->tasks_completed == 10);
        CHECK(fixtures::assignments(log) == Pairs{{"T1", "R1"}});
        CHECK(reason_of(s) == FailureReason::TaskFailed);
        bool deferred_seen = false;
        for (const auto& [t, e] : log.of<events::RobotStateChanged>()) deferred_seen |= e.deregistration_deferred;
        CHECK(deferred_seen);
    }

    TEST_CASE("fail-fast deregistration aborts the task")
    {
        auto c = fixtures::quiet();
        c.fail_fast_deregistration = true;
        sim::Simulation s(c);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(5s);
        s.deregister_robot("R1");
        s.run_until(10min);
        CHECK(s.kb().robot("R1")->lifecycle == Lifecycle::Unregistered);
        CHECK(s.kb().robot("R1")->tasks_completed == 9);
        CHECK(reason_of(s) == FailureReason::TaskFailed);
        CHECK(s.outcomes()[0].outcome.completion_time == 5s);
    }

    TEST_CASE("a robot that leaves before its turn fails the plan")
    {
        sim::Simulation s(fixtures::quiet());
        Log log;
        log.attach(s);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.run_until(5s);
        CHECK(s.deregister_robot("R3") == rbm::DeregistrationResult::Immediate);
        s.run_until(10min);
        CHECK(fixtures::assignments(log) == Pairs{{"T1", "R1"}, {"T2", "R1"}});
        CHECK(reason_of(s) == FailureReason::TaskFailed);
    }

    TEST_CASE("plans sharing a robot wait for it")
    {
        auto c = fixtures::quiet();
        c.max_in_flight = 2;
        sim::Simulation s(c);
        Log log;
        log.attach(s);
        s.register_robot("R1", {"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        s.submit_request("Rq2");
        s.submit_request("Rq2");
        s.run_until(30min);
        REQUIRE(s.outcomes().size() == 2);
        for (const auto& o : s.outcomes()) CHECK(o.outcome.status == OutcomeStatus::Success);
        CHECK(log.of<events::TaskAssigned>().size() == 6);
        CHECK(s.violations().empty());
    }

    TEST_CASE("re-registration replaces capabilities")
    {
        sim::Simulation s(fixtures::quiet());
        s.register_robot("R2", {"C2", "C4"});
        try {
            s.register_robot("R2", {"C7"});
            FAIL("double registration accepted");
        } catch (const kb::KbError& e) {
            CHECK(e.code() == kb::ErrorCode::AlreadyRegistered);
        }
        s.deregister_robot("R2");
        CHECK_THROWS_AS(s.deregister_robot("R2"), kb::KbError);
        s.register_robot("R2", {"C1", "C3", "C4", "C2"});
        CHECK(s.kb().robot("R2")->capabilities == CapabilitySet{"C1", "C2", "C3", "C4"});
        s.register_robot("R3", {"C2", "C5"});
        // Planner now finds T1 on the new set.
        Log log;
        log.attach(s);
        s.submit_request("Rq2");
        s.run_until(10min);
        CHECK(fixtures::assignments(log).front() == std::pair<std::string, std::string>{"T1", "R2"});
        CHECK(s.outcomes().at(0).outcome.status == OutcomeStatus::Success);
    }

    TEST_CASE("fleet limit holds")
    {
        sim::Simulation s(fixtures::quiet());
        s.register_robot("R1", {"C1"});
        s.register_robot("R2", {"C2"});
        s.register_robot("R3", {"C3"});
        CHECK_THROWS_AS(s.register_robot("R4", {"C4"}), kb::KbError);
        CHECK(s.kb().registered_count() == 3);
    }
}

TEST_SUITE("rbm")
{
    TEST_CASE("a refused registration leaves the fleet unchanged")
    {
        sim::Simulation s(fixtures::quiet());
        s.register_robot("R1", {"C1"});
        s.register_robot("R2", {"C2"});
        s.register_robot("R3", {"C3"});
        CHECK_THROWS_AS(s.register_robot("R4", {"C4"}), kb::KbError);
        CHECK(s.rbm().robot("R4") == nullptr);
        CHECK(s.broker().find("R4") == std::nullopt);
        s.deregister_robot("R2");
        s.register_robot("R4", {"C4"});
        s.run_until(2min);
        CHECK(s.violations().empty());
    }
}
