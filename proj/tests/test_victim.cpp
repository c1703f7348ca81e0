// SPDX-License-Identifier: Apache-2.0
#include <redline/deskworld.hpp>
#include <redline/error.hpp>
#include <redline/scenario.hpp>
#include <redline/victim.hpp>

#include <chrono>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace redline;

namespace
{

ErrorCode code_of(auto&& fn)
{
    try
    {
        fn();
    }
    catch (Error const& e)
    {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvariantViolation;
}

/// A stand-in remote victim that answers every request with a fixed status and body.
class StubServer
{
  public:
    StubServer(int status, std::string body, std::chrono::milliseconds delay = {})
    {
        server_.Post("/rollout", [=](httplib::Request const&, httplib::Response& res) {
            std::this_thread::sleep_for(delay);
            res.status = status;
            res.set_content(body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer()
    {
        server_.stop();
        thread_.join();
    }
    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

Suite s1_suite()
{
    Suite suite;
    suite.scenarios.emplace("s1", canonical_s1());
    suite.manifest.name = "one";
    suite.manifest.train = { "s1" };
    suite.manifest.suites = { { "only", { "s1" } } };
    return suite;
}

} // namespace

TEST_SUITE("victim")
{
    TEST_CASE("in-process victim follows the DeskWorld rules")
    {
        auto const victim = make_victim({});
        auto const s1 = canonical_s1();
        auto const clean = run_rollout(*victim, s1, s1.clean_instruction, 0);
        CHECK(clean.success);
        CHECK(clean.steps == 8);
        CHECK(clean.violations == 1);
        auto const empty = run_rollout(*victim, s1, "", 0);
        CHECK_FALSE(empty.success);
        CHECK(empty.steps == 0);
        CHECK(victim->identity() == "deskworld:h6:o4");
        CHECK(make_victim({}, DeskWorldConfig { .hesitation_cost = 3, .parse_overhead = 4 })->identity()
              != victim->identity());
    }

    TEST_CASE("wire responses are validated")
    {
        auto const ok = parse_rollout_response(R"({"success":false,"steps":230,"violations":9,"truncated":false})", 256);
        CHECK_FALSE(ok.success);
        CHECK(ok.steps == 230);
        CHECK(ok.violations == 9);
        CHECK(code_of([] { (void) parse_rollout_response(R"({"success":false,"steps":-1,"violations":0,"truncated":false})", 256); })
              == ErrorCode::ProtocolViolation);
        CHECK(code_of([] { (void) parse_rollout_response(R"({"success":false,"steps":300,"violations":0,"truncated":false})", 256); })
              == ErrorCode::ProtocolViolation);
        CHECK(code_of([] { (void) parse_rollout_response(R"({"success":true,"steps":10,"violations":0,"truncated":true})", 256); })
              == ErrorCode::ProtocolViolation);
        CHECK(code_of([] { (void) parse_rollout_response(R"({"success":"yes","steps":1,"violations":0,"truncated":false})", 256); })
              == ErrorCode::ProtocolViolation);
        CHECK(code_of([] { (void) parse_rollout_response("not json", 256); }) == ErrorCode::ProtocolViolation);
        auto const wire = rollout_to_wire(ok);
        CHECK(parse_rollout_response(wire.dump(), 256) == ok);
    }

    TEST_CASE("remote errors surface as typed failures")
    {
        auto const s1 = canonical_s1();
        {
            StubServer stub(200, R"({"success":false,"steps":999,"violations":0,"truncated":false})");
            auto const victim = make_victim({ VictimEndpoint::Kind::Remote, stub.url() });
            CHECK(code_of([&] { (void) run_rollout(*victim, s1, "x", 0); }) == ErrorCode::ProtocolViolation);
        }
        {
            StubServer stub(500, "{}");
            CHECK(code_of([&] { (void) remote_rollout(stub.url(), "s1", "x", 0, 256, std::chrono::seconds(5)); })
                  == ErrorCode::RemoteUnreachable);
        }
        {
            StubServer stub(200, R"({"success":true,"steps":1,"violations":0,"truncated":false})",
                            std::chrono::milliseconds(600));
            CHECK(code_of([&] { (void) remote_rollout(stub.url(), "s1", "x", 0, 256, std::chrono::milliseconds(150)); })
                  == ErrorCode::RemoteUnreachable);
        }
        CHECK(code_of([&] { (void) remote_rollout("http://127.0.0.1:1", "s1", "x", 0, 256, std::chrono::seconds(1)); })
              == ErrorCode::RemoteUnreachable);
    }

    TEST_CASE("victim server answers like the in-process victim")
    {
        VictimServer server(s1_suite());
        auto const port = server.start("127.0.0.1", 0);
        auto const url = "http://127.0.0.1:" + std::to_string(port);
        auto const remote = make_victim({ VictimEndpoint::Kind::Remote, url });
        auto const local = make_victim({});
        auto const s1 = canonical_s1();
        for (auto text: { "put the red mug on the shelf", "put the red bowl on the shelf", "put the red mbug on the shelf", "" })
        {
            auto expected = run_rollout(*local, s1, text, 4);
            expected.trace.clear();
            CHECK(run_rollout(*remote, s1, text, 4) == expected);
        }

        httplib::Client client(url);
        auto const missing = client.Post("/rollout", R"({"scenario_id":"zzz","instruction":"x","seed":0})", "application/json");
        REQUIRE(missing);
        CHECK(missing->status == 404);
        auto const malformed = client.Post("/rollout", R"({"instruction":"x"})", "application/json");
        REQUIRE(malformed);
        CHECK(malformed->status == 400);
        server.stop();
    }
}
