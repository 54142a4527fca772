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

// Self-checks over synthetic oracles, run by `isac_sense check`. Each check is independent of the
// campaign path it exercises: ground truth comes from forward simulation, closed forms or brute force.

#pragma once

#include "isac/harness.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace isac::checks {

struct CheckResult
{
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Post-hoc feasibility of a sensing output against the range table it was computed from:
/// index range, sum-distance windows on both ordered pairs, residual bound and pairwise disjointness.
inline bool output_is_feasible(const RangeTable &table, const SensingOutput &out, const std::vector<Point2D> &bs,
                               const Thresholds &thr, std::string *why = nullptr)
{
    const std::size_t M = table.num_bs();
    auto fail = [&](const std::string &msg) {
        if (why)
            *why = msg;
        return false;
    };
    if (out.k_hat != out.targets.size())
        return fail("k_hat differs from the number of targets");
    for (std::size_t k = 0; k < out.targets.size(); ++k)
    {
        const auto &h = out.targets[k].hypothesis;
        if (h.num_bs != M || h.indices.size() != M * M)
            return fail("hypothesis shape");
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t m = 0; m < M; ++m)
                if (h.at(u, m) < 1 || h.at(u, m) > table.at(u, m).size())
                    return fail("index outside 1..|D|");
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t m = 0; m < M; ++m)
            {
                if (u == m)
                    continue;
                const double s = table.at(u, u)(h.at(u, u)) / 2.0 + table.at(m, m)(h.at(m, m)) / 2.0;
                if (std::abs(s - table.at(u, m)(h.at(u, m))) > thr.delta)
                    return fail("sum-distance window violated");
            }
        RangeMatrix r(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t m = 0; m < M; ++m)
                r(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(m)) = table.at(u, m)(h.at(u, m));
        const double res = nls_objective(out.targets[k].fit.position, bs, r);
        if (res > thr.beta)
            return fail("residual above beta");
        for (std::size_t j = k + 1; j < out.targets.size(); ++j)
            for (std::size_t i = 0; i < M * M; ++i)
                if (h.indices[i] == out.targets[j].hypothesis.indices[i])
                    return fail("two targets share a range");
    }
    return true;
}

inline CheckResult check_time_frequency(std::size_t scenes = 20)
{
    OfdmConfig cfg;
    cfg.noise_var = 0.0;
    double worst = 0.0;
    for (std::size_t s = 0; s < scenes; ++s)
    {
        Rng rng(1000 + s);
        SceneConfig sc;
        sc.num_targets = 3;
        const Scene scene = generate_scene(sc, rng);
        const PathSet paths = generate_paths(scene, PathConfig{}, rng);
        const ChannelTensor h = build_channels(paths, scene.num_bs(), cfg);
        const auto sym = generate_symbols(cfg, scene.num_bs(), rng);
        std::vector<VectorXcd> tx;
        for (const auto &x : sym)
            tx.push_back(modulate(x, cfg));
        const auto rx = simulate_reception(h, tx, cfg, rng);
        const SensingDictionary dict = build_dictionary(sym, cfg);
        DictionaryOperator op(dict);
        for (std::size_t m = 0; m < scene.num_bs(); ++m)
        {
            VectorXcd model;
            op.apply(h.stacked(m), model);
            model *= std::sqrt(cfg.power);
            const VectorXcd obs = remove_cp_dft(rx[m], cfg);
            worst = std::max(worst, (obs - model).norm() / model.norm());
        }
    }
    std::ostringstream d;
    d << "max relative error " << worst;
    return {"time/frequency model equivalence", worst <= 1e-9, d.str()};
}

inline CheckResult check_soft_threshold()
{
    DenseOperator op(MatrixXcd::Ones(1, 1));
    VectorXcd y(1);
    y[0] = 2.0;
    LassoParams p;
    p.alpha = 0.25; // lambda = 0.5
    p.kkt_rel_tol = 1e-12;
    const auto r = lasso_solve(op, y, 1.0, p);
    const double err = std::abs(r.h[0] - cplx{1.5, 0.0});
    std::ostringstream d;
    d << "h = " << r.h[0].real() << ", error " << err;
    return {"scalar LASSO soft threshold", err <= 1e-9, d.str()};
}

inline CheckResult check_lasso_kkt(std::size_t trials = 5)
{
    OfdmConfig cfg;
    double worst = 0.0;
    bool ok = true;
    for (std::size_t t = 0; t < trials; ++t)
    {
        Rng rng(2000 + t);
        SceneConfig sc;
        sc.num_targets = 4;
        const Scene scene = generate_scene(sc, rng);
        const PathSet paths = generate_paths(scene, PathConfig{}, rng);
        const ChannelTensor h = build_channels(paths, scene.num_bs(), cfg);
        const auto sym = generate_symbols(cfg, scene.num_bs(), rng);
        std::vector<VectorXcd> tx;
        for (const auto &x : sym)
            tx.push_back(modulate(x, cfg));
        const auto rx = simulate_reception(h, tx, cfg, rng);
        const SensingDictionary dict = build_dictionary(sym, cfg);
        DictionaryOperator op(dict);
        const LassoParams params;
        const VectorXcd y = remove_cp_dft(rx[0], cfg);
        const auto res = lasso_solve(op, y, std::sqrt(cfg.power), params);
        VectorXcd ah, c;
        op.apply(res.h, ah);
        op.adjoint(y - std::sqrt(cfg.power) * ah, c);
        c *= std::sqrt(cfg.power);
        const double v = kkt_violation(res.h, c, res.lambda) / res.lambda;
        worst = std::max(worst, v);
        ok = ok && v <= params.kkt_rel_tol;
    }
    std::ostringstream d;
    d << "max KKT violation / lambda " << worst;
    return {"LASSO optimality certificate", ok, d.str()};
}

inline CheckResult check_gauss_newton_vs_grid(std::size_t instances = 10)
{
    bool ok = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < instances; ++i)
    {
        Rng rng(3000 + i);
        SceneConfig sc;
        sc.num_targets = 1;
        const Scene scene = generate_scene(sc, rng);
        const OfdmConfig ofdm;
        const std::size_t M = scene.num_bs();
        RangeMatrix r(M, M);
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t m = 0; m < M; ++m)
                r(u, m) = tap_to_range(tap_index(bistatic_distance(scene, u, m, 0), ofdm), ofdm);
        const auto &bs = scene.bs_positions;
        const auto fit = gauss_newton_localize(bs, r, initial_position(bs, r, scene.area_side));
        const Point2D t = scene.target_positions[0];
        double best = fit.residual;
        for (int a = -100; a <= 100; ++a)
            for (int b = -100; b <= 100; ++b)
                best = std::min(best, nls_objective({t.x + 0.01 * a, t.y + 0.01 * b}, bs, r));
        const double rel = (fit.residual - best) / std::max(best, 1e-12);
        worst = std::max(worst, rel);
        ok = ok && fit.residual <= 1.01 * best + 1e-12;
    }
    std::ostringstream d;
    d << "worst relative excess over grid minimum " << worst;
    return {"Gauss-Newton versus 0.01 m grid", ok, d.str()};
}

inline CheckResult check_pipeline(std::size_t trials = 10)
{
    ExperimentConfig cfg;
    cfg.paths.nlos_rate = 0.0;
    cfg.paths.clutter_rate = 0.0;
    cfg.ofdm.noise_var = 0.0;
    std::size_t exact = 0;
    bool feasible = true;
    for (std::size_t i = 0; i < trials; ++i)
    {
        const TrialRecord r = run_trial(cfg, 2, trial_seed(77, 2, i));
        exact += (r.missed == 0 && r.false_alarms == 0) ? 1 : 0;
        feasible = feasible && r.error.empty() &&
                   output_is_feasible(r.ranges, r.output, r.scene.bs_positions, cfg.association.thresholds);
    }
    std::ostringstream d;
    d << exact << "/" << trials << " noiseless LOS-only trials perfect, constraints "
      << (feasible ? "hold" : "violated");
    return {"end-to-end noiseless pipeline", feasible && exact * 10 >= trials * 9, d.str()};
}

inline CheckResult check_determinism()
{
    ExperimentConfig cfg;
    const TrialRecord a = run_trial(cfg, 3, 12345);
    const TrialRecord b = run_trial(cfg, 3, 12345);
    auto strip = [](nlohmann::json j) {
        j.erase("cpu_s");
        return j.dump();
    };
    const bool same = strip(trial_to_json(a)) == strip(trial_to_json(b));
    return {"trial determinism", same, same ? "identical records" : "records differ"};
}

inline std::vector<std::function<CheckResult()>> all_checks()
{
    return {
        [] { return check_time_frequency(); },
        [] { return check_soft_threshold(); },
        [] { return check_lasso_kkt(); },
        [] { return check_gauss_newton_vs_grid(); },
        [] { return check_pipeline(); },
        [] { return check_determinism(); },
    };
}

} // namespace isac::checks
