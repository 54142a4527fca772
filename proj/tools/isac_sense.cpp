// SPDX-License-Identifier: Apache-2.0
//
// isac-sense: networked device-free sensing simulator
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "isac/checks.hpp"
#include "isac/isac.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonOptions
{
    std::string config;
    std::optional<std::size_t> trials, k_min, k_max, jobs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool noiseless = false;
    bool no_nlos = false;
    bool no_clutter = false;
    bool no_timing = false;
    bool record_trials = false;
};

void add_common(CLI::App *app, CommonOptions &o)
{
    app->add_option("--config", o.config, "INI config file with [scene] [paths] [ofdm] [lasso] [association] "
                                          "[experiment] sections")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "master seed");
    app->add_flag("--noiseless", o.noiseless, "set noise_var = 0");
    app->add_flag("--no-nlos", o.no_nlos, "disable TypeII (NLOS) paths");
    app->add_flag("--no-clutter", o.no_clutter, "disable TypeIII (clutter) paths");
}

isac::ExperimentConfig resolve(const CommonOptions &o)
{
    isac::ExperimentConfig cfg = o.config.empty() ? isac::ExperimentConfig{} : isac::load_config(o.config);
    auto &e = cfg.experiment;
    if (o.trials)
        e.trials = *o.trials;
    if (o.k_min)
        e.k_min = *o.k_min;
    if (o.k_max)
        e.k_max = *o.k_max;
    if (o.jobs)
        e.jobs = *o.jobs;
    if (o.seed)
        e.seed = *o.seed;
    if (o.out)
        e.output_dir = *o.out;
    if (o.noiseless)
        cfg.ofdm.noise_var = 0.0;
    if (o.no_nlos)
        cfg.paths.nlos_rate = 0.0;
    if (o.no_clutter)
        cfg.paths.clutter_rate = 0.0;
    if (o.no_timing)
        e.record_timing = false;
    if (o.record_trials)
        e.record_trials = true;
    cfg.validate();
    return cfg;
}

int cmd_run(const CommonOptions &o, bool quiet)
{
    const isac::ExperimentConfig cfg = resolve(o);
    const auto &e = cfg.experiment;
    std::fprintf(stderr, "running K=%zu..%zu, %zu trials each, %zu job(s), seed %llu\n", e.k_min, e.k_max, e.trials,
                 e.jobs, static_cast<unsigned long long>(e.seed));
    std::size_t last_pct = 101;
    const auto result = isac::run_monte_carlo(cfg, [&](std::size_t done, std::size_t total) {
        const std::size_t pct = 100 * done / total;
        if (!quiet && pct != last_pct && pct % 5 == 0)
        {
            std::fprintf(stderr, "\r%3zu%%", pct);
            last_pct = pct;
        }
    });
    if (!quiet)
        std::fprintf(stderr, "\n");
    isac::emit_report(result, cfg, e.output_dir);
    isac::write_metrics_csv(std::cout, result.rows, e.record_timing);
    std::size_t errors = 0;
    for (const auto &r : result.rows)
        errors += r.errors;
    if (errors)
        std::fprintf(stderr, "warning: %zu trial(s) recorded module errors, see trials.jsonl\n", errors);
    std::fprintf(stderr, "wrote %s/metrics.csv and %s/manifest.ini\n", e.output_dir.c_str(), e.output_dir.c_str());
    return 0;
}

int cmd_trial(const CommonOptions &o, std::size_t k, std::optional<std::uint64_t> trial_seed, std::size_t index)
{
    const isac::ExperimentConfig cfg = resolve(o);
    const std::uint64_t seed = trial_seed ? *trial_seed : isac::trial_seed(cfg.experiment.seed, k, index);
    isac::TrialTrace trace;
    const isac::TrialRecord rec = isac::run_trial(cfg, k, seed, &trace);

    std::cout << "# trial seed " << seed << ", K = " << k << '\n';
    std::cout << "# paths\n";
    for (const auto &p : trace.paths.paths)
    {
        nlohmann::json j{{"type", isac::to_string(p.kind)},
                         {"tx", p.tx_bs + 1},
                         {"rx", p.rx_bs + 1},
                         {"length_m", p.path_length},
                         {"tap", isac::tap_index(p.path_length, cfg.ofdm)},
                         {"gain_abs", std::abs(p.gain)}};
        if (p.target)
            j["target"] = *p.target + 1;
        if (p.kind == isac::PathKind::TypeII)
            j["nlos_bias_m"] = p.nlos_bias;
        std::cout << j.dump() << '\n';
    }
    std::cout << "# range sets\n";
    isac::write_range_records(std::cout, trace.phase_one, cfg.ofdm);
    std::cout << "# association: " << rec.output.num_candidates << " candidates, " << rec.output.num_filtered
              << " within beta, " << rec.output.num_merged << " merged duplicates, " << rec.output.k_hat
              << " selected\n";
    std::cout << "# record\n" << isac::trial_to_json(rec).dump(2) << '\n';
    return rec.error.empty() ? 0 : 2;
}

int cmd_check()
{
    int failures = 0;
    for (const auto &check : isac::checks::all_checks())
    {
        const auto r = check();
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        failures += r.passed ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"isac_sense: networked device-free sensing simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(isac::kVersion));

    CommonOptions run_opts;
    bool quiet = false;
    auto *run = app.add_subcommand("run", "full Monte Carlo campaign; writes metrics.csv and manifest.ini");
    add_common(run, run_opts);
    run->add_option("--trials", run_opts.trials, "trials per K");
    run->add_option("--k-min", run_opts.k_min, "smallest target count");
    run->add_option("--k-max", run_opts.k_max, "largest target count");
    run->add_option("--jobs", run_opts.jobs, "worker threads");
    run->add_option("--out", run_opts.out, "output directory");
    run->add_flag("--no-timing", run_opts.no_timing, "write mean_cpu_s as 0 for byte-reproducible CSVs");
    run->add_flag("--record-trials", run_opts.record_trials, "also write trials.jsonl");
    run->add_flag("--quiet", quiet, "no progress output");

    CommonOptions trial_opts;
    std::size_t k = 3;
    std::size_t index = 0;
    std::optional<std::uint64_t> explicit_seed;
    auto *trial = app.add_subcommand("trial", "one trial with verbose paths, range sets and association output");
    add_common(trial, trial_opts);
    trial->add_option("-k,--targets", k, "number of targets")->capture_default_str();
    trial->add_option("--index", index, "trial index used to derive the seed from the master seed")
        ->capture_default_str();
    trial->add_option("--trial-seed", explicit_seed, "use this trial seed directly");

    auto *check = app.add_subcommand("check", "invariant and oracle self-checks");

    CLI11_PARSE(app, argc, argv);
    try
    {
        if (*run)
            return cmd_run(run_opts, quiet);
        if (*trial)
            return cmd_trial(trial_opts, k, explicit_seed, index);
        if (*check)
            return cmd_check();
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
