// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

#include "oracles.hpp"
#include "support.hpp"

#include <redline/deskworld.hpp>
#include <redline/episode.hpp>
#include <redline/error.hpp>
#include <redline/grpo.hpp>
#include <redline/instruction.hpp>
#include <redline/metrics.hpp>
#include <redline/reward.hpp>
#include <redline/scenario.hpp>
#include <redline/victim.hpp>

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

extern char** environ;

namespace fs = std::filesystem;
using namespace redline;
using json = nlohmann::json;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
    double seconds = -1.0; // measured by the check itself when its work happens outside report()
};

Suite shipped_suite()
{
    return load_suite(fs::path(REDLINE_SOURCE_DIR) / "suites" / "desk");
}

// Criterion 1 ---------------------------------------------------------------------------------------------

/// Every printed derived cell of the three tables, recomputed from its base and attack columns. Per-model
/// rows are single ratios or differences. Average rows follow the convention each table evidently used:
/// difference of averaged columns (TER), mean of per-model ratios (action length), and ratio of averaged
/// columns (violations).
Outcome metric_arithmetic()
{
    std::ifstream in(fs::path(REDLINE_SOURCE_DIR) / "tests" / "fixtures" / "published_tables.json");
    auto const doc = json::parse(in);
    std::size_t cells = 0;
    std::size_t mismatches = 0;
    double worst = 0.0;
    std::string first_bad;
    for (auto const& table: doc.at("tables"))
    {
        auto const derived = table.at("derived").get<std::string>();
        auto const tolerance = derived == "asr" ? 0.05 : 0.01;
        auto const& rows = table.at("rows");
        for (auto const& [suite, _]: rows.at(0).at("cells").items())
            for (auto const& row: rows)
            {
                auto const& cell = row.at("cells").at(suite);
                auto const printed = cell.at(derived).get<double>();
                auto const base = cell.at("base").get<double>();
                auto const attack = cell.at("attack").get<double>();
                double value = 0.0;
                if (derived == "asr")
                    value = compute_asr(base, attack);
                else if (derived == "cvi")
                    value = compute_cvi(base, attack);
                else if (row.at("model") != "Average")
                    value = compute_air(base, attack);
                else
                {
                    std::vector<double> ratios;
                    for (auto const& model: rows)
                        if (model.at("model") != "Average")
                            ratios.push_back(compute_air(model.at("cells").at(suite).at("base").get<double>(),
                                                         model.at("cells").at(suite).at("attack").get<double>()));
                    value = mean_of(ratios);
                }
                auto const error = std::abs(value - printed);
                worst = std::max(worst, error / tolerance);
                ++cells;
                if (error > tolerance + 1e-9)
                {
                    ++mismatches;
                    if (first_bad.empty())
                        first_bad = derived + " " + row.at("model").get<std::string>() + " " + suite;
                }
            }
    }
    std::ostringstream detail;
    detail << cells << " cells, " << mismatches << " mismatches, worst error " << worst << " of tolerance";
    if (!first_bad.empty())
        detail << ", first mismatch " << first_bad;
    return { mismatches == 0 && cells == 3 * 7 * 5, detail.str() };
}

// Criterion 2 ---------------------------------------------------------------------------------------------

Outcome levenshtein_oracle()
{
    std::string const alphabet = "acgt";
    Rng rng(2024);
    std::size_t mismatches = 0;
    std::size_t bad_scripts = 0;
    auto random_string = [&] {
        std::string s(uniform_index(rng, 13), 'a');
        for (auto& c: s)
            c = alphabet[uniform_index(rng, alphabet.size())];
        return s;
    };
    for (int pair = 0; pair < 10'000; ++pair)
    {
        auto const a = random_string();
        auto const b = random_string();
        auto const found = oracle::bfs_edit_script(a, b);
        mismatches += levenshtein(a, b) != found.distance;
        std::size_t edits = 0;
        for (auto const& step: found.script)
            edits += step.op != oracle::Op::Keep;
        bad_scripts += oracle::replay_script(a, found.script) != b || edits != found.distance;
    }

    // Exhaustive breadth-first search through string space for every pair up to length 4.
    oracle::StringSpaceBfs space(alphabet, 5);
    auto const strings = space.enumerate(4);
    std::size_t exhaustive_pairs = 0;
    for (auto const& a: strings)
    {
        auto const dist = space.from(a);
        for (auto const& b: strings)
        {
            ++exhaustive_pairs;
            mismatches += levenshtein(a, b) != dist.at(b);
            mismatches += oracle::bfs_edit_script(a, b).distance != dist.at(b);
        }
    }
    std::ostringstream detail;
    detail << "10000 random pairs (len<=12) + " << exhaustive_pairs << " exhaustive pairs (len<=4): " << mismatches
           << " mismatches, " << bad_scripts << " invalid scripts";
    return { mismatches == 0 && bad_scripts == 0, detail.str() };
}

// Criterion 3 ---------------------------------------------------------------------------------------------

Outcome budget_invariants()
{
    auto const suite = shipped_suite();
    auto const scenarios = suite.split("all");
    auto const victim = make_victim({});
    BaselineCache cache;
    Rng rng(303);
    std::size_t over_chars = 0;
    std::size_t over_calls = 0;
    std::size_t null_episodes = 0;
    std::size_t bad_null = 0;
    std::size_t max_chars = 0;
    for (int episode = 0; episode < 1000; ++episode)
    {
        // Wide weight scales yield everything from near-uniform to near-deterministic policies.
        auto const policy = support::random_policy(rng, 0.5 + 4.0 * uniform01(rng), 0.5 + uniform01(rng));
        EpisodeConfig config;
        config.objective = static_cast<Objective>(uniform_index(rng, 3));
        config.victim = victim;
        config.seed = uniform_index(rng, 4);
        auto const& scenario = scenarios[uniform_index(rng, scenarios.size())];
        auto const record = run_attack_episode(policy, config, scenario, cache, rng());
        auto const chars = levenshtein(record.clean_instruction, record.perturbed_instruction);
        max_chars = std::max(max_chars, chars);
        over_chars += chars > 200 || record.char_edits_used != chars;
        over_calls += record.tool_calls_used > 4;
        if (record.edit_log.empty())
        {
            ++null_episodes;
            bad_null += record.reward.total != -0.5 || record.perturbed_instruction != record.clean_instruction;
        }
    }
    std::ostringstream detail;
    detail << "1000 episodes, max char edits " << max_chars << ", " << over_chars << " over 200, " << over_calls
           << " over 4 calls, " << null_episodes << " null episodes with " << bad_null << " not scored -0.5";
    return { over_chars == 0 && over_calls == 0 && bad_null == 0 && null_episodes > 0, detail.str() };
}

// Criterion 4 ---------------------------------------------------------------------------------------------

Outcome reward_contract()
{
    Rng rng(404);
    std::size_t violations = 0;
    for (int trial = 0; trial < 500; ++trial)
    {
        auto const objective = static_cast<Objective>(uniform_index(rng, 3));
        auto const max_steps = 8 + uniform_index(rng, 300);
        auto roll = [&] {
            auto const steps = uniform_index(rng, max_steps + 1);
            auto const truncated = steps == max_steps && uniform01(rng) < 0.5;
            return RolloutResult { .success = !truncated && uniform01(rng) < 0.6,
                                   .steps = steps,
                                   .violations = uniform_index(rng, 30),
                                   .truncated = truncated,
                                   .trace = {} };
        };
        auto const base = roll();
        auto const attack = roll();
        auto const calls = uniform_index(rng, 5);
        EpisodeUsage const usage { calls, 4, uniform_index(rng, 201), 200, calls == 0 ? 0 : uniform_index(rng, calls + 1) };
        RewardConfig config;
        config.lambda = 4.0 * uniform01(rng);
        config.cv_scale = 1 + uniform_index(rng, 20);
        auto const r = total_reward(config, objective, base, attack, max_steps, usage);
        violations += r.total < -1.0 || r.total > 1.5;
        if (objective == Objective::TaskFailure)
            violations += r.r_objective != 0.0 && r.r_objective != 1.0;
        config.lambda = 0.0;
        auto const plain = total_reward(config, objective, base, attack, max_steps, usage);
        if (!plain.null_attack)
            violations += plain.total != plain.r_objective;
    }
    return { violations == 0, "500 cases, " + std::to_string(violations) + " contract violations" };
}

// Criterion 5 ---------------------------------------------------------------------------------------------

Outcome grpo_math()
{
    Rng rng(505);
    std::size_t bad_sums = 0;
    for (int trial = 0; trial < 1000; ++trial)
    {
        std::vector<double> rewards(2 + uniform_index(rng, 31));
        for (auto& r: rewards)
            r = uniform01(rng) < 0.2 ? -0.5 : 2.5 * uniform01(rng) - 1.0;
        auto const advantages = compute_advantages(rewards);
        bad_sums += std::abs(std::accumulate(advantages.begin(), advantages.end(), 0.0))
                    > 1e-6 * static_cast<double>(rewards.size());
    }

    auto const behavior = support::random_policy(rng, 0.5);
    auto groups = support::sample_groups(behavior, Objective::TaskFailure, 4, 8, 55);
    auto uniform_groups = groups;
    for (auto& g: uniform_groups)
        for (auto& e: g.episodes)
            e.reward.total = 0.75;
    auto const unchanged = grpo_update(behavior, uniform_groups, GrpoOptions { .learning_rate = 1.0, .epochs = 3 });
    auto const theta_unchanged = unchanged.weights == behavior.weights;

    double worst = 0.0;
    for (int point = 0; point < 10; ++point)
    {
        auto probe = behavior;
        std::normal_distribution<double> nudge(0.0, 0.1);
        for (auto& w: probe.weights)
            w += nudge(rng);
        auto const analytic = surrogate_gradient(probe, groups, 0.2);
        auto const numeric = support::finite_difference_gradient(probe, groups, 0.2);
        worst = std::max(worst, support::relative_error(analytic, numeric));
    }
    std::ostringstream detail;
    detail << bad_sums << "/1000 advantage sums off, theta " << (theta_unchanged ? "unchanged" : "CHANGED")
           << " under uniform rewards, worst finite-difference relative error " << worst << " over 10 points";
    return { bad_sums == 0 && theta_unchanged && worst < 1e-4, detail.str() };
}

// Criterion 6 ---------------------------------------------------------------------------------------------

Outcome deskworld_s1()
{
    struct Expected
    {
        char const* text;
        bool success;
        std::size_t steps;
        std::size_t violations;
    };
    Expected const table[] = {
        { "put the red mug on the shelf", true, 8, 1 },
        { "put the red bowl on the shelf", false, 8, 1 },
        { "put the red mbug on the shelf", true, 14, 1 },
    };
    auto const s1 = canonical_s1();
    std::size_t wrong = 0;
    std::size_t drift = 0;
    auto serialize = [](RolloutResult const& r) { return rollout_to_wire(r).dump() + trace_string(r); };
    for (auto const& row: table)
    {
        auto const first = deskworld_rollout(s1, row.text, 0);
        wrong += first.success != row.success || first.steps != row.steps || first.violations != row.violations;
        auto const reference = serialize(first);
        for (int repeat = 0; repeat < 1000; ++repeat)
            drift += serialize(deskworld_rollout(s1, row.text, 0)) != reference;
    }
    return { wrong == 0 && drift == 0,
             "3 canonical rollouts, " + std::to_string(wrong) + " wrong, " + std::to_string(drift)
                 + " non-identical repeats of 3000" };
}

// Criteria 7 and 8 ----------------------------------------------------------------------------------------

struct SeedRun
{
    double trained = 0.0;
    double uniform = 0.0;
    double no_coldstart = 0.0;
    double chars_lambda0 = 0.0;
    double chars_lambda_half = 0.0;
};

double mean_char_edits(std::vector<EpisodeRecord> const& records)
{
    double sum = 0.0;
    for (auto const& r: records)
        sum += static_cast<double>(r.char_edits_used);
    return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

struct LearningRuns
{
    std::vector<SeedRun> seeds;
    double seconds_criterion7 = 0.0;
    double seconds_criterion8 = 0.0;
};

LearningRuns learning_runs()
{
    auto const suite = shipped_suite();
    auto const train = suite.split("train");
    auto const test = suite.split("test");
    auto const victim = make_victim({});
    // Held-out episodes per test scenario. Per-seed char-edit gaps are about one char, so small samples are noise.
    constexpr std::size_t kEvalEpisodes = 200;
    LearningRuns runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
    {
        TrainOptions options;
        options.objective = Objective::TaskFailure;
        options.reward.lambda = 0.0;
        options.group_size = 8;
        options.iterations = 30;
        options.grpo.learning_rate = 0.05;
        options.demonstrations = 240;
        options.seed = seed;

        EpisodeConfig eval;
        eval.objective = options.objective;
        eval.victim = victim;
        eval.seed = seed;
        eval.reward = options.reward;
        auto const eval_seed = derive_seed(seed, 0xE7A1);

        auto const start7 = std::chrono::steady_clock::now();
        SeedRun run;
        BaselineCache cache;
        auto const trained = train_attacker(train, victim, options);
        auto const trained_eval = evaluate_policy(trained.policy, test, eval, kEvalEpisodes, eval_seed, cache);
        run.trained = mean_total_reward(trained_eval);
        run.uniform = mean_total_reward(evaluate_policy(AttackerPolicy::uniform(), test, eval, kEvalEpisodes, eval_seed, cache));
        auto no_bc = options;
        no_bc.coldstart = false;
        run.no_coldstart
            = mean_total_reward(evaluate_policy(train_attacker(train, victim, no_bc).policy, test, eval, kEvalEpisodes, eval_seed, cache));
        run.chars_lambda0 = mean_char_edits(trained_eval);
        runs.seconds_criterion7 += std::chrono::duration<double>(std::chrono::steady_clock::now() - start7).count();

        auto const start8 = std::chrono::steady_clock::now();
        auto stealthy = options;
        stealthy.reward.lambda = 0.5;
        auto stealthy_eval = eval;
        stealthy_eval.reward = stealthy.reward;
        run.chars_lambda_half = mean_char_edits(
            evaluate_policy(train_attacker(train, victim, stealthy).policy, test, stealthy_eval, kEvalEpisodes, eval_seed, cache));
        runs.seconds_criterion8 += std::chrono::duration<double>(std::chrono::steady_clock::now() - start8).count();
        runs.seeds.push_back(run);
    }
    return runs;
}

Outcome learning_smoke(LearningRuns const& runs)
{
    std::size_t beats_uniform = 0;
    std::size_t coldstart_helps = 0;
    std::ostringstream detail;
    detail.precision(3);
    for (std::size_t i = 0; i < runs.seeds.size(); ++i)
    {
        auto const& r = runs.seeds[i];
        beats_uniform += r.trained > r.uniform;
        coldstart_helps += r.no_coldstart <= r.trained;
        detail << (i ? "; " : "") << "seed " << i + 1 << " trained " << r.trained << " uniform " << r.uniform
               << " no-coldstart " << r.no_coldstart;
    }
    detail << " | beats uniform " << beats_uniform << "/5, coldstart >= no-coldstart " << coldstart_helps << "/5";
    return { beats_uniform >= 4 && coldstart_helps >= 3, detail.str(), runs.seconds_criterion7 };
}

Outcome stealth_pressure(LearningRuns const& runs)
{
    std::size_t fewer = 0;
    std::ostringstream detail;
    detail.precision(4);
    for (std::size_t i = 0; i < runs.seeds.size(); ++i)
    {
        auto const& r = runs.seeds[i];
        fewer += r.chars_lambda_half <= r.chars_lambda0;
        detail << (i ? "; " : "") << "seed " << i + 1 << " chars lambda=0 " << r.chars_lambda0 << " lambda=0.5 "
               << r.chars_lambda_half;
    }
    // The lambda=0 runs are shared with the learning smoke test, so both timings count against this budget.
    auto const seconds = runs.seconds_criterion7 + runs.seconds_criterion8;
    detail << " | no more edits under lambda=0.5 in " << fewer << "/5";
    return { fewer >= 4, detail.str(), seconds };
}

// Criterion 9 ---------------------------------------------------------------------------------------------

/// `redline serve-victim` as a child process; reads the bound port from its first stdout line.
class ServedVictim
{
  public:
    explicit ServedVictim(fs::path const& suite_dir)
    {
        int fds[2];
        if (pipe(fds) != 0)
            throw std::runtime_error("pipe failed");
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
        posix_spawn_file_actions_addclose(&actions, fds[0]);
        std::string const binary = REDLINE_CLI;
        std::string const suite = suite_dir.string();
        std::vector<std::string> args = { binary, "serve-victim", "--suite", suite, "--host", "127.0.0.1", "--port", "0" };
        std::vector<char*> argv;
        for (auto& a: args)
            argv.push_back(a.data());
        argv.push_back(nullptr);
        auto const rc = posix_spawn(&pid_, binary.c_str(), &actions, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        close(fds[1]);
        if (rc != 0)
            throw std::runtime_error("cannot spawn " + binary);
        std::string line;
        char c = 0;
        while (read(fds[0], &c, 1) == 1 && c != '\n')
            line += c;
        close(fds[0]);
        auto const colon = line.rfind(':');
        if (line.rfind("listening on ", 0) != 0 || colon == std::string::npos)
            throw std::runtime_error("unexpected serve-victim banner: " + line);
        url_ = line.substr(std::string("listening on ").size());
    }
    ~ServedVictim()
    {
        kill(pid_, SIGTERM);
        int status = 0;
        waitpid(pid_, &status, 0);
    }
    [[nodiscard]] std::string const& url() const { return url_; }

  private:
    pid_t pid_ = 0;
    std::string url_;
};

Outcome wire_loopback()
{
    auto const dir = fs::path(REDLINE_SOURCE_DIR) / "suites" / "desk";
    auto const suite = load_suite(dir);
    ServedVictim served(dir);
    Rng rng(909);
    auto const policy = support::random_policy(rng, 1.0);
    std::string logs[2];
    auto victims = std::array { make_victim({}), make_victim({ VictimEndpoint::Kind::Remote, served.url() }) };
    for (std::size_t v = 0; v < victims.size(); ++v)
        for (auto objective: { Objective::TaskFailure, Objective::ActionInflation, Objective::ConstraintViolation })
        {
            EpisodeConfig config;
            config.objective = objective;
            config.victim = victims[v];
            config.seed = 9;
            BaselineCache cache;
            logs[v] += episode_log_string(evaluate_policy(policy, suite.split("all"), config, 3, 99, cache, 4));
        }
    auto const episodes = std::count(logs[0].begin(), logs[0].end(), '\n');
    return { !logs[0].empty() && logs[0] == logs[1],
             std::to_string(episodes) + " episodes via " + served.url() + ", logs "
                 + (logs[0] == logs[1] ? "identical" : "DIFFER") };
}

bool report(int number, char const* name, double limit_seconds, std::function<Outcome()> const& check)
{
    auto const start = std::chrono::steady_clock::now();
    Outcome outcome;
    try
    {
        outcome = check();
    }
    catch (std::exception const& e)
    {
        outcome = { false, std::string("exception: ") + e.what() };
    }
    auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.seconds >= 0.0)
        seconds = outcome.seconds;
    auto const pass = outcome.pass && seconds < limit_seconds;
    std::printf("[%s] criterion %d %s (%.2f s, limit %.0f s): %s\n", pass ? "PASS" : "FAIL", number, name, seconds,
                limit_seconds, outcome.detail.c_str());
    std::fflush(stdout);
    return pass;
}

} // namespace

int main()
{
    bool ok = true;
    ok &= report(1, "metric-arithmetic reproduction", 1, metric_arithmetic);
    ok &= report(2, "levenshtein oracle equivalence", 30, levenshtein_oracle);
    ok &= report(3, "budget invariants", 60, budget_invariants);
    ok &= report(4, "reward contract", 5, reward_contract);
    ok &= report(5, "grpo math", 30, grpo_math);
    ok &= report(6, "deskworld determinism and S1 table", 10, deskworld_s1);

    LearningRuns runs;
    std::string failure;
    try
    {
        runs = learning_runs();
    }
    catch (std::exception const& e)
    {
        failure = e.what();
    }
    auto const guarded = [&](auto fn) {
        return [&, fn] { return failure.empty() ? fn(runs) : Outcome { false, "exception: " + failure }; };
    };
    ok &= report(7, "end-to-end learning smoke test", 300, guarded(learning_smoke));
    ok &= report(8, "stealth-pressure direction", 600, guarded(stealth_pressure));
    ok &= report(9, "wire-protocol loopback", 30, wire_loopback);
    std::printf("%s\n", ok ? "all acceptance criteria passed" : "some acceptance criteria FAILED");
    return ok ? 0 : 1;
}
