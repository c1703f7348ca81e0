// SPDX-License-Identifier: Apache-2.0
// Command-line driver: attack, train, eval, report, serve-victim, make-suite.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <redline/config.hpp>
#include <redline/episode.hpp>
#include <redline/error.hpp>
#include <redline/grpo.hpp>
#include <redline/metrics.hpp>
#include <redline/scenario.hpp>
#include <redline/victim.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

namespace
{

using namespace redline;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Common
{
    std::string config_path;
    std::string suite_path;
    std::string victim = "deskworld";
    std::size_t workers = 0; // 0 keeps the config value
};

struct Context
{
    RunConfig config;
    Suite suite;
    std::shared_ptr<Victim const> victim;
};

void add_common(CLI::App& cmd, Common& common)
{
    cmd.add_option("--config", common.config_path, "Run configuration JSON")->check(CLI::ExistingFile);
    cmd.add_option("--suite", common.suite_path, "Scenario suite directory (default from config)");
    cmd.add_option("--victim", common.victim, "\"deskworld\" or a remote base URL such as http://127.0.0.1:8080");
    cmd.add_option("--workers", common.workers, "Parallel rollout workers")->check(CLI::PositiveNumber);
}

Context load_context(Common const& common)
{
    Context ctx;
    if (!common.config_path.empty())
        ctx.config = load_config(common.config_path);
    if (common.workers > 0)
        ctx.config.workers = common.workers;
    ctx.suite = load_suite(common.suite_path.empty() ? ctx.config.suite_path : common.suite_path);
    VictimEndpoint endpoint;
    if (common.victim != "deskworld")
        endpoint = VictimEndpoint { VictimEndpoint::Kind::Remote, common.victim };
    ctx.victim = make_victim(endpoint, ctx.config.deskworld, ctx.config.remote);
    return ctx;
}

Objective parse_objective(std::string const& name)
{
    if (auto objective = objective_from_string(name))
        return *objective;
    throw CLI::ValidationError("--objective", "unknown objective '" + name + "'");
}

void write_text(std::string const& path, std::string const& text)
{
    if (path.empty() || path == "-")
    {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!(out << text))
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
}

void print_summary(std::vector<EpisodeRecord> const& records)
{
    std::size_t failures = 0;
    double chars = 0.0;
    double calls = 0.0;
    for (auto const& r: records)
    {
        failures += r.base.success && !r.attack.success;
        chars += static_cast<double>(r.char_edits_used);
        calls += static_cast<double>(r.tool_calls_used);
    }
    auto const n = records.empty() ? 1.0 : static_cast<double>(records.size());
    std::fprintf(stderr, "episodes=%zu mean_reward=%.4f induced_failures=%zu mean_tool_calls=%.2f mean_char_edits=%.2f\n",
                 records.size(), mean_total_reward(records), failures, calls / n, chars / n);
}

struct RunArgs
{
    Common common;
    std::string objective = "task-failure";
    std::string policy_path;
    std::string split = "test";
    std::string out;
    std::size_t episodes = 0;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
};

void add_run_options(CLI::App& cmd, RunArgs& args, bool seed_required)
{
    add_common(cmd, args.common);
    cmd.add_option("--objective", args.objective, "task-failure | action-inflation | constraint-violation");
    cmd.add_option("--policy", args.policy_path, "Policy JSON (default: uniform policy)")->check(CLI::ExistingFile);
    cmd.add_option("--split", args.split, "Suite split: train | test | all");
    cmd.add_option("--episodes", args.episodes, "Episodes per scenario (default from config)");
    cmd.add_option("--out", args.out, "Episode log path (JSONL); '-' for stdout");
    cmd.add_option("--lambda", args.lambda, "Stealth penalty weight override");
    auto* seed = cmd.add_option("--seed", args.seed, "Base seed for victim and sampling streams");
    if (seed_required)
        seed->required();
}

int run_episodes(RunArgs const& args, bool print_report)
{
    auto ctx = load_context(args.common);
    auto const objective = parse_objective(args.objective);
    if (args.lambda)
        ctx.config.reward.lambda = *args.lambda;
    validate(ctx.config.reward);
    auto const policy = args.policy_path.empty() ? AttackerPolicy::uniform(ctx.config.temperature)
                                                 : load_policy(args.policy_path);
    auto const seed = args.seed.value_or(0);
    auto const config = EpisodeConfig {
        .objective = objective,
        .budget = ctx.config.budget,
        .victim = ctx.victim,
        .seed = seed,
        .reward = ctx.config.reward,
        .toolbox = ctx.config.toolbox,
    };
    BaselineCache cache;
    auto const records = evaluate_policy(policy, ctx.suite.split(args.split), config,
                                         args.episodes > 0 ? args.episodes : ctx.config.eval_episodes, seed, cache,
                                         ctx.config.workers);
    if (!args.out.empty())
        write_text(args.out, episode_log_string(records));
    print_summary(records);
    if (print_report)
        std::cout << render_markdown(aggregate_report(records, ctx.suite.manifest));
    return 0;
}

struct TrainArgs
{
    Common common;
    std::string objective = "task-failure";
    std::string out;
    std::size_t groups = 0;
    std::size_t iters = 0;
    std::uint64_t seed = 0;
    std::optional<double> lambda;
    std::optional<double> learning_rate;
    bool no_coldstart = false;
};

int run_train(TrainArgs const& args)
{
    auto ctx = load_context(args.common);
    auto options = ctx.config.train_options(parse_objective(args.objective), args.seed);
    if (args.groups > 0)
        options.group_size = args.groups;
    if (args.iters > 0)
        options.iterations = args.iters;
    if (args.lambda)
        options.reward.lambda = *args.lambda;
    if (args.learning_rate)
        options.grpo.learning_rate = *args.learning_rate;
    if (args.no_coldstart)
        options.coldstart = false;
    validate(options.reward);

    auto const report = train_attacker(ctx.suite.split("train"), ctx.victim, options,
                                       [&](std::size_t iteration, double mean, AttackerPolicy const& policy) {
                                           std::printf("iter %zu mean_reward %.6f\n", iteration + 1, mean);
                                           std::fflush(stdout);
                                           save_policy(policy, args.out);
                                       });
    if (!report.bc_log_likelihood.empty())
        std::fprintf(stderr, "coldstart log-likelihood %.4f -> %.4f\n", report.bc_log_likelihood.front(),
                     report.bc_log_likelihood.back());
    save_policy(report.policy, args.out);
    return 0;
}

struct ReportArgs
{
    std::string in;
    std::string format = "markdown";
    std::string suite_path;
    std::string config_path;
    std::string out;
};

int run_report(ReportArgs const& args)
{
    RunConfig config;
    if (!args.config_path.empty())
        config = load_config(args.config_path);
    auto const format = report_format_from_string(args.format);
    std::ifstream in(args.in, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::InvalidArgument, "cannot open " + args.in);
    auto const records = read_episode_log(in);
    if (records.empty())
        std::fprintf(stderr, "warning: %s holds no episodes; report is empty\n", args.in.c_str());
    auto const dir = std::filesystem::path(args.suite_path.empty() ? config.suite_path : args.suite_path);
    auto const manifest = load_manifest(dir / "manifest.json");
    write_text(args.out, render_report(aggregate_report(records, manifest), format));
    return 0;
}

struct ServeArgs
{
    Common common;
    std::string host = "127.0.0.1";
    int port = 8080;
};

int run_serve(ServeArgs const& args)
{
    RunConfig config;
    if (!args.common.config_path.empty())
        config = load_config(args.common.config_path);
    auto suite = load_suite(args.common.suite_path.empty() ? config.suite_path : args.common.suite_path);

    // Block the shutdown signals before any server thread exists so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    VictimServer server(std::move(suite), config.deskworld);
    auto const port = server.start(args.host, args.port);
    std::printf("listening on http://%s:%d\n", args.host.c_str(), port);
    std::fflush(stdout);
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    return 0;
}

struct SuiteArgs
{
    std::uint64_t seed = 0;
    std::size_t train = 12;
    std::size_t test = 6;
    std::string out;
};

int run_make_suite(SuiteArgs const& args)
{
    save_suite(generate_desk_suite(args.seed, args.train, args.test), args.out);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Budgeted black-box instruction attacks against a frozen DeskWorld victim" };
    app.require_subcommand(1);

    RunArgs attack_args;
    auto* attack = app.add_subcommand("attack", "Run attack episodes with a fixed policy and write an episode log");
    add_run_options(*attack, attack_args, true);
    attack_args.split = "all";

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Cold-start behavior cloning followed by GRPO");
    add_common(*train, train_args.common);
    train->add_option("--objective", train_args.objective, "Attack objective");
    train->add_option("--groups", train_args.groups, "Group size G (episodes per scenario per iteration)");
    train->add_option("--iters", train_args.iters, "GRPO iterations");
    train->add_option("--seed", train_args.seed, "Training seed")->required();
    train->add_option("--out", train_args.out, "Policy output path; rewritten after every iteration")->required();
    train->add_option("--lambda", train_args.lambda, "Stealth penalty weight override");
    train->add_option("--lr", train_args.learning_rate, "GRPO learning rate override");
    train->add_flag("--no-coldstart", train_args.no_coldstart, "Skip behavior cloning");

    RunArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a policy on the held-out split and print a report");
    add_run_options(*eval, eval_args, false);

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "Aggregate an episode log into metric tables");
    report->add_option("--in", report_args.in, "Episode log (JSONL)")->required()->check(CLI::ExistingFile);
    report->add_option("--format", report_args.format, "markdown | csv | json")
        ->check(CLI::IsMember({ "markdown", "md", "csv", "json" }));
    report->add_option("--suite", report_args.suite_path, "Suite directory holding manifest.json");
    report->add_option("--config", report_args.config_path, "Run configuration JSON")->check(CLI::ExistingFile);
    report->add_option("--out", report_args.out, "Output path (default stdout)");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve-victim", "Host the DeskWorld victim over HTTP until SIGINT/SIGTERM");
    serve->add_option("--config", serve_args.common.config_path, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    serve->add_option("--suite", serve_args.common.suite_path, "Scenario suite directory");
    serve->add_option("--host", serve_args.host, "Bind address");
    serve->add_option("--port", serve_args.port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535));

    SuiteArgs suite_args;
    auto* make_suite = app.add_subcommand("make-suite", "Generate a DeskWorld scenario suite");
    make_suite->add_option("--seed", suite_args.seed, "Generator seed")->required();
    make_suite->add_option("--train", suite_args.train, "Training scenarios (the first is S1)");
    make_suite->add_option("--test", suite_args.test, "Held-out scenarios");
    make_suite->add_option("--out", suite_args.out, "Output directory")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        auto const code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try
    {
        if (*attack)
            return run_episodes(attack_args, false);
        if (*train)
            return run_train(train_args);
        if (*eval)
            return run_episodes(eval_args, true);
        if (*report)
            return run_report(report_args);
        if (*serve)
            return run_serve(serve_args);
        if (*make_suite)
            return run_make_suite(suite_args);
    }
    catch (CLI::ValidationError const& e)
    {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    }
    catch (Error const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}
