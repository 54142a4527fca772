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

#pragma once

#include "isac/association.hpp"
#include "isac/config.hpp"
#include "isac/ranging.hpp"
#include "isac/version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace isac {

struct Score
{
    std::size_t missed = 0;
    std::size_t false_alarms = 0;
};

/// Greedy one-to-one matching by ascending truth-estimate distance, restricted to pairs within hit_radius.
/// Unmatched truths are missed detections; unmatched estimates are false alarms.
inline Score match_and_score(std::span<const Point2D> truth, std::span<const Point2D> estimates, double hit_radius)
{
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = 0; j < estimates.size(); ++j)
        {
            const double d = distance(truth[i], estimates[j]);
            if (d <= hit_radius)
                pairs.emplace_back(d, i, j);
        }
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> used_t(truth.size(), 0), used_e(estimates.size(), 0);
    std::size_t matched = 0;
    for (const auto &[d, i, j] : pairs)
    {
        if (used_t[i] || used_e[j])
            continue;
        used_t[i] = used_e[j] = 1;
        ++matched;
    }
    return {truth.size() - matched, estimates.size() - matched};
}

struct TrialRecord
{
    std::uint64_t seed = 0;
    std::size_t k_true = 0;
    Scene scene;
    std::size_t num_paths = 0;
    RangeTable ranges;
    SensingOutput output;
    std::size_t missed = 0;
    std::size_t false_alarms = 0;
    double cpu_time = 0.0; // seconds
    std::string error;     // non-empty when a module threw; the trial then counts every target as missed
};

namespace detail {

inline double thread_cpu_seconds()
{
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

} // namespace detail

/// Everything one trial computes, for the single-trial debug view.
struct TrialTrace
{
    PathSet paths;
    PhaseOneResult phase_one;
};

/// scene -> paths -> channels -> reception -> Phase I -> Phase II -> scoring, deterministic in (cfg, k, seed).
inline TrialRecord run_trial(const ExperimentConfig &cfg, std::size_t k, std::uint64_t seed,
                             TrialTrace *trace = nullptr)
{
    TrialRecord rec;
    rec.seed = seed;
    rec.k_true = k;
    const double t0 = detail::thread_cpu_seconds();
    try
    {
        Rng rng(seed);
        SceneConfig sc = cfg.scene;
        sc.num_targets = k;
        rec.scene = generate_scene(sc, rng);
        PathSet paths = generate_paths(rec.scene, cfg.paths, rng);
        rec.num_paths = paths.paths.size();
        const std::size_t M = rec.scene.num_bs();
        const ChannelTensor h = build_channels(paths, M, cfg.ofdm);
        const auto symbols = generate_symbols(cfg.ofdm, M, rng);
        std::vector<VectorXcd> tx;
        tx.reserve(M);
        for (const auto &s : symbols)
            tx.push_back(modulate(s, cfg.ofdm));
        const auto rx = simulate_reception(h, tx, cfg.ofdm, rng);
        std::vector<VectorXcd> obs;
        obs.reserve(M);
        for (const auto &y : rx)
            obs.push_back(remove_cp_dft(y, cfg.ofdm));
        const SensingDictionary dict = build_dictionary(symbols, cfg.ofdm);
        PhaseOneResult p1 = phase_one_detailed(obs, dict, cfg.lasso, cfg.ofdm);
        rec.ranges = p1.ranges;
        rec.output = localize_all(rec.ranges, rec.scene.bs_positions, rec.scene.area_side, cfg.association);
        std::vector<Point2D> est;
        for (const auto &t : rec.output.targets)
            est.push_back(t.fit.position);
        const Score s = match_and_score(rec.scene.target_positions, est, cfg.experiment.hit_radius);
        rec.missed = s.missed;
        rec.false_alarms = s.false_alarms;
        if (trace)
        {
            trace->paths = std::move(paths);
            trace->phase_one = std::move(p1);
        }
    }
    catch (const std::exception &e)
    {
        rec.error = e.what();
        rec.output = {};
        rec.missed = k;
        rec.false_alarms = 0;
    }
    rec.cpu_time = detail::thread_cpu_seconds() - t0;
    return rec;
}

struct MetricsRow
{
    std::size_t k = 0;
    std::size_t trials = 0;
    std::size_t missed = 0;       // sum of N_i
    std::size_t false_alarms = 0; // sum of T_i
    double p_md = 0.0;
    double p_fa = 0.0;
    double mean_cpu_time = 0.0;
    std::size_t errors = 0;
};

/// P_MD = sum N_i / (K T) and P_FA = sum T_i / (K T); K = 0 normalizes by T alone.
inline MetricsRow aggregate(std::size_t k, std::span<const TrialRecord> records)
{
    MetricsRow row;
    row.k = k;
    row.trials = records.size();
    double cpu = 0.0;
    for (const auto &r : records)
    {
        row.missed += r.missed;
        row.false_alarms += r.false_alarms;
        row.errors += r.error.empty() ? 0 : 1;
        cpu += r.cpu_time;
    }
    if (row.trials > 0)
    {
        const double denom = static_cast<double>(std::max<std::size_t>(k, 1) * row.trials);
        row.p_md = static_cast<double>(row.missed) / denom;
        row.p_fa = static_cast<double>(row.false_alarms) / denom;
        row.mean_cpu_time = cpu / static_cast<double>(row.trials);
    }
    return row;
}

struct CampaignResult
{
    std::vector<MetricsRow> rows;
    std::vector<std::vector<TrialRecord>> records; // [k - k_min][trial]
};

/// Runs cfg.experiment.trials trials for every K in [k_min, k_max] on cfg.experiment.jobs threads.
/// Trial i of K uses trial_seed(seed, K, i), so the result does not depend on the thread count.
inline CampaignResult run_monte_carlo(const ExperimentConfig &cfg,
                                      const std::function<void(std::size_t done, std::size_t total)> &progress = {})
{
    cfg.validate();
    const auto &e = cfg.experiment;
    const std::size_t nk = e.k_max - e.k_min + 1;
    const std::size_t total = nk * e.trials;

    CampaignResult out;
    out.records.assign(nk, std::vector<TrialRecord>(e.trials));
    std::atomic<std::size_t> next{0}, done{0};
    std::mutex progress_mutex;

    auto worker = [&] {
        for (;;)
        {
            const std::size_t job = next.fetch_add(1);
            if (job >= total)
                return;
            const std::size_t ki = job / e.trials;
            const std::size_t i = job % e.trials;
            const std::size_t k = e.k_min + ki;
            out.records[ki][i] = run_trial(cfg, k, trial_seed(e.seed, k, i));
            const std::size_t d = done.fetch_add(1) + 1;
            if (progress)
            {
                std::lock_guard lock(progress_mutex);
                progress(d, total);
            }
        }
    };
    const std::size_t nthreads = std::min(e.jobs, total);
    if (nthreads <= 1)
        worker();
    else
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back(worker);
    }

    for (std::size_t ki = 0; ki < nk; ++ki)
        out.rows.push_back(aggregate(e.k_min + ki, out.records[ki]));
    return out;
}

/// CSV with header K,trials,p_md,p_fa,mean_cpu_s. Without timing, mean_cpu_s is written as 0.
inline void write_metrics_csv(std::ostream &os, std::span<const MetricsRow> rows, bool with_timing = true)
{
    os << "K,trials,p_md,p_fa,mean_cpu_s\n";
    char buf[256];
    for (const auto &r : rows)
    {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.10g,%.10g,%.6f\n", r.k, r.trials, r.p_md, r.p_fa,
                      with_timing ? r.mean_cpu_time : 0.0);
        os << buf;
    }
}

inline nlohmann::json trial_to_json(const TrialRecord &r)
{
    nlohmann::json j;
    j["seed"] = r.seed;
    j["k_true"] = r.k_true;
    auto pts = [](const std::vector<Point2D> &v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto &p : v)
            a.push_back({p.x, p.y});
        return a;
    };
    j["bs"] = pts(r.scene.bs_positions);
    j["targets"] = pts(r.scene.target_positions);
    j["num_paths"] = r.num_paths;
    j["k_hat"] = r.output.k_hat;
    nlohmann::json est = nlohmann::json::array();
    for (const auto &t : r.output.targets)
        est.push_back({{"x", t.fit.position.x},
                       {"y", t.fit.position.y},
                       {"residual", t.fit.residual},
                       {"converged", t.fit.converged},
                       {"indices", t.hypothesis.indices}});
    j["estimates"] = est;
    j["candidates"] = r.output.num_candidates;
    j["filtered"] = r.output.num_filtered;
    j["merged"] = r.output.num_merged;
    j["missed"] = r.missed;
    j["false_alarms"] = r.false_alarms;
    j["cpu_s"] = r.cpu_time;
    if (!r.error.empty())
        j["error"] = r.error;
    return j;
}

/// Writes metrics.csv, manifest.ini and, when enabled, trials.jsonl into `dir`.
inline void emit_report(const CampaignResult &result, const ExperimentConfig &cfg, const std::filesystem::path &dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("emit_report: cannot create '" + dir.string() + "': " + ec.message());

    auto open = [](const fs::path &p) {
        std::ofstream os(p, std::ios::binary);
        if (!os)
            throw std::runtime_error("emit_report: cannot write '" + p.string() + "'");
        return os;
    };
    auto finish = [](std::ofstream &os, const fs::path &p) {
        os.flush();
        if (!os)
            throw std::runtime_error("emit_report: write failed for '" + p.string() + "'");
    };

    const fs::path csv = dir / "metrics.csv";
    {
        auto os = open(csv);
        write_metrics_csv(os, result.rows, cfg.experiment.record_timing);
        finish(os, csv);
    }
    const fs::path manifest = dir / "manifest.ini";
    {
        auto os = open(manifest);
        write_config(os, cfg);
        os << "\n[run]\n"
           << "version = " << kVersion << '\n'
           << "master_seed = " << cfg.experiment.seed << '\n';
        finish(os, manifest);
    }
    if (cfg.experiment.record_trials)
    {
        const fs::path trials = dir / "trials.jsonl";
        auto os = open(trials);
        for (const auto &per_k : result.records)
            for (const auto &r : per_k)
            {
                nlohmann::json j = trial_to_json(r);
                if (!cfg.experiment.record_timing)
                    j.erase("cpu_s");
                os << j.dump() << '\n';
            }
        finish(os, trials);
    }
}

} // namespace isac
