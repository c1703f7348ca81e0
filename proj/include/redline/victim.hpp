// SPDX-License-Identifier: Apache-2.0
#pragma once

// Frozen black-box victims. The attack side only ever sees RolloutResults.
//
// Wire protocol (HTTP, JSON, UTF-8):
//   POST /rollout  {"scenario_id": string, "instruction": string, "seed": integer}
//   200            {"success": bool, "steps": int >= 0, "violations": int >= 0, "truncated": bool}
//   4xx/5xx        treated as remote-unreachable

#include <redline/deskworld.hpp>
#include <redline/scenario.hpp>

#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

struct VictimEndpoint
{
    enum class Kind
    {
        InProcessDeskWorld,
        Remote,
    };

    Kind kind = Kind::InProcessDeskWorld;
    std::string url; // Remote only, e.g. "http://127.0.0.1:8080"
};

class Victim
{
  public:
    virtual ~Victim() = default;

    /// Executes one rollout; implementations may throw Error(RemoteUnreachable | ProtocolViolation).
    [[nodiscard]] virtual RolloutResult rollout(Scenario const& scenario,
                                                std::string_view instruction,
                                                std::uint64_t seed) const = 0;

    /// Stable identity used to key cached baselines.
    [[nodiscard]] virtual std::string identity() const = 0;
};

class DeskWorldVictim final: public Victim
{
  public:
    explicit DeskWorldVictim(DeskWorldConfig config = {}): config_(config) {}

    [[nodiscard]] RolloutResult rollout(Scenario const& scenario,
                                        std::string_view instruction,
                                        std::uint64_t seed) const override;
    [[nodiscard]] std::string identity() const override;

  private:
    DeskWorldConfig config_;
};

struct RemoteOptions
{
    std::chrono::milliseconds timeout { 120'000 };
    std::ptrdiff_t max_connections = 4;
};

class RemoteVictim final: public Victim
{
  public:
    explicit RemoteVictim(std::string url, RemoteOptions options = {});

    [[nodiscard]] RolloutResult rollout(Scenario const& scenario,
                                        std::string_view instruction,
                                        std::uint64_t seed) const override;
    [[nodiscard]] std::string identity() const override { return "remote:" + url_; }

  private:
    std::string url_;
    RemoteOptions options_;
    mutable std::counting_semaphore<> slots_;
};

[[nodiscard]] std::shared_ptr<Victim const> make_victim(VictimEndpoint const& endpoint,
                                                        DeskWorldConfig const& deskworld = {},
                                                        RemoteOptions const& remote = {});

/// Throws Error(ProtocolViolation) unless the result satisfies the RolloutResult invariants for `max_steps`.
void validate_rollout(RolloutResult const& result, std::size_t max_steps);

/// Runs one rollout and validates the result before returning it.
[[nodiscard]] RolloutResult run_rollout(Victim const& victim,
                                        Scenario const& scenario,
                                        std::string_view instruction,
                                        std::uint64_t seed);

/// One wire-protocol request. The response is validated against `max_steps`.
[[nodiscard]] RolloutResult remote_rollout(std::string const& url,
                                           std::string const& scenario_id,
                                           std::string_view instruction,
                                           std::uint64_t seed,
                                           std::size_t max_steps,
                                           std::chrono::milliseconds timeout = std::chrono::seconds(120));

/// Parses a 200 response body; throws Error(ProtocolViolation).
[[nodiscard]] RolloutResult parse_rollout_response(std::string_view body, std::size_t max_steps);
[[nodiscard]] nlohmann::json rollout_to_wire(RolloutResult const& result);

/// Hosts a DeskWorld victim for every scenario of a suite behind the wire protocol.
class VictimServer
{
  public:
    VictimServer(Suite suite, DeskWorldConfig config = {});
    ~VictimServer();
    VictimServer(VictimServer const&) = delete;
    VictimServer& operator=(VictimServer const&) = delete;

    /// Binds and starts serving on a background thread; port 0 picks a free port. Returns the bound port.
    int start(std::string const& host, int port);
    /// Blocks the caller until stop() is called from another thread or a signal handler.
    void listen_blocking(std::string const& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace redline
