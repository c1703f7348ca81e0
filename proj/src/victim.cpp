// SPDX-License-Identifier: Apache-2.0
#include <redline/error.hpp>
#include <redline/victim.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace redline
{

using nlohmann::json;

RolloutResult DeskWorldVictim::rollout(Scenario const& scenario, std::string_view instruction, std::uint64_t seed) const
{
    return deskworld_rollout(scenario, instruction, seed, config_);
}

std::string DeskWorldVictim::identity() const
{
    return "deskworld:h" + std::to_string(config_.hesitation_cost) + ":o" + std::to_string(config_.parse_overhead);
}

RemoteVictim::RemoteVictim(std::string url, RemoteOptions options):
    url_(std::move(url)), options_(options), slots_(std::max<std::ptrdiff_t>(1, options.max_connections))
{
}

RolloutResult RemoteVictim::rollout(Scenario const& scenario, std::string_view instruction, std::uint64_t seed) const
{
    slots_.acquire();
    struct Release
    {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release { slots_ };
    return remote_rollout(url_, scenario.id, instruction, seed, scenario.max_steps, options_.timeout);
}

std::shared_ptr<Victim const> make_victim(VictimEndpoint const& endpoint,
                                          DeskWorldConfig const& deskworld,
                                          RemoteOptions const& remote)
{
    if (endpoint.kind == VictimEndpoint::Kind::Remote)
        return std::make_shared<RemoteVictim>(endpoint.url, remote);
    return std::make_shared<DeskWorldVictim>(deskworld);
}

void validate_rollout(RolloutResult const& result, std::size_t max_steps)
{
    if (result.steps > max_steps)
        throw Error(ErrorCode::ProtocolViolation,
                    "steps " + std::to_string(result.steps) + " > max_steps " + std::to_string(max_steps));
    if (result.truncated && result.success)
        throw Error(ErrorCode::ProtocolViolation, "truncated rollout reported as success");
    if (!result.trace.empty() && result.trace.size() != result.steps)
        throw Error(ErrorCode::ProtocolViolation, "trace length differs from steps");
}

RolloutResult run_rollout(Victim const& victim, Scenario const& scenario, std::string_view instruction, std::uint64_t seed)
{
    auto result = victim.rollout(scenario, instruction, seed);
    validate_rollout(result, scenario.max_steps);
    return result;
}

json rollout_to_wire(RolloutResult const& result)
{
    return json {
        { "success", result.success },
        { "steps", result.steps },
        { "violations", result.violations },
        { "truncated", result.truncated },
    };
}

RolloutResult parse_rollout_response(std::string_view body, std::size_t max_steps)
{
    json doc;
    try
    {
        doc = json::parse(body);
    }
    catch (json::parse_error const& e)
    {
        throw Error(ErrorCode::ProtocolViolation, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw Error(ErrorCode::ProtocolViolation, "response is not an object");

    auto const flag = [&](char const* key) {
        if (!doc.contains(key) || !doc[key].is_boolean())
            throw Error(ErrorCode::ProtocolViolation, std::string("missing boolean '") + key + "'");
        return doc[key].get<bool>();
    };
    auto const count = [&](char const* key) {
        if (!doc.contains(key) || !doc[key].is_number_integer())
            throw Error(ErrorCode::ProtocolViolation, std::string("missing integer '") + key + "'");
        auto const value = doc[key].get<std::int64_t>();
        if (value < 0)
            throw Error(ErrorCode::ProtocolViolation, std::string("negative '") + key + "'");
        return static_cast<std::size_t>(value);
    };

    auto result = RolloutResult {
        .success = flag("success"),
        .steps = count("steps"),
        .violations = count("violations"),
        .truncated = flag("truncated"),
        .trace = {},
    };
    validate_rollout(result, max_steps);
    return result;
}

RolloutResult remote_rollout(std::string const& url,
                             std::string const& scenario_id,
                             std::string_view instruction,
                             std::uint64_t seed,
                             std::size_t max_steps,
                             std::chrono::milliseconds timeout)
{
    httplib::Client client(url);
    auto const seconds = timeout.count() / 1000;
    auto const micros = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    auto const request = json {
        { "scenario_id", scenario_id },
        { "instruction", std::string(instruction) },
        { "seed", seed },
    };
    auto response = client.Post("/rollout", request.dump(), "application/json");
    if (!response)
        throw Error(ErrorCode::RemoteUnreachable, url + ": " + httplib::to_string(response.error()));
    if (response->status != 200)
        throw Error(ErrorCode::RemoteUnreachable, url + ": HTTP " + std::to_string(response->status));
    return parse_rollout_response(response->body, max_steps);
}

struct VictimServer::Impl
{
    Suite suite;
    DeskWorldVictim victim;
    httplib::Server server;
    std::thread thread;
};

VictimServer::VictimServer(Suite suite, DeskWorldConfig config): impl_(std::make_unique<Impl>())
{
    impl_->suite = std::move(suite);
    impl_->victim = DeskWorldVictim(config);
    impl_->server.Post("/rollout", [this](httplib::Request const& req, httplib::Response& res) {
        auto const reply_error = [&](int status, std::string const& message) {
            res.status = status;
            res.set_content(json { { "error", message } }.dump(), "application/json");
        };
        json doc;
        try
        {
            doc = json::parse(req.body);
        }
        catch (json::parse_error const& e)
        {
            return reply_error(400, e.what());
        }
        if (!doc.is_object() || !doc.contains("scenario_id") || !doc["scenario_id"].is_string()
            || !doc.contains("instruction") || !doc["instruction"].is_string() || !doc.contains("seed")
            || !doc["seed"].is_number_integer())
            return reply_error(400, "expected {scenario_id, instruction, seed}");

        auto const id = doc["scenario_id"].get<std::string>();
        auto it = impl_->suite.scenarios.find(id);
        if (it == impl_->suite.scenarios.end())
            return reply_error(404, "unknown scenario " + id);
        auto const result = impl_->victim.rollout(it->second, doc["instruction"].get<std::string>(),
                                                  doc["seed"].get<std::uint64_t>());
        res.set_content(rollout_to_wire(result).dump(), "application/json");
    });
}

VictimServer::~VictimServer()
{
    stop();
}

int VictimServer::start(std::string const& host, int port)
{
    auto bound = port;
    if (port == 0)
        bound = impl_->server.bind_to_any_port(host);
    else if (!impl_->server.bind_to_port(host, port))
        bound = -1;
    if (bound < 0)
        throw Error(ErrorCode::RemoteUnreachable, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void VictimServer::listen_blocking(std::string const& host, int port)
{
    if (!impl_->server.listen(host, port))
        throw Error(ErrorCode::RemoteUnreachable, "cannot listen on " + host + ":" + std::to_string(port));
}

void VictimServer::stop()
{
    if (!impl_)
        return;
    impl_->server.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

} // namespace redline
