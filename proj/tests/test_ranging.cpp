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


#include "catch_amalgamated.hpp"
#include "isac/ranging.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <set>
#include <sstream>

using namespace isac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Observed
{
    std::vector<FreqSymbols> symbols;
    std::vector<VectorXcd> obs;
};

Observed observe(const ChannelTensor &h, const OfdmConfig &cfg, Rng &rng)
{
    Observed o;
    o.symbols = generate_symbols(cfg, h.num_bs(), rng);
    std::vector<VectorXcd> tx;
    for (const auto &s : o.symbols)
        tx.push_back(modulate(s, cfg));
    for (const auto &y : simulate_reception(h, tx, cfg, rng))
        o.obs.push_back(remove_cp_dft(y, cfg));
    return o;
}

/// Independent KKT evaluation from the dense dictionary.
double dense_kkt_ratio(const MatrixXcd &a, const VectorXcd &y, double scale, const LassoResult &r)
{
    const VectorXcd c = scale * a.adjoint() * (y - scale * a * r.h);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j)
    {
        const double m = std::abs(r.h[j]);
        worst = std::max(worst, m == 0.0 ? std::max(0.0, std::abs(c[j]) - r.lambda)
                                         : std::abs(c[j] - r.lambda * r.h[j] / m));
    }
    return worst / r.lambda;
}

} // namespace

TEST_CASE("soft_threshold")
{
    CHECK(soft_threshold({2.0, 0.0}, 0.5) == cplx{1.5, 0.0});
    CHECK(soft_threshold({-2.0, 0.0}, 0.5) == cplx{-1.5, 0.0});
    CHECK(soft_threshold({0.3, 0.4}, 1.0) == cplx{0.0, 0.0});
    const cplx z = soft_threshold({3.0, 4.0}, 1.0);
    CHECK_THAT(std::abs(z), WithinAbs(4.0, 1e-15));
    CHECK_THAT(std::arg(z), WithinAbs(std::atan2(4.0, 3.0), 1e-15));
}

TEST_CASE("lasso_solve: zero observation gives zero")
{
    DenseOperator op(MatrixXcd::Identity(4, 4));
    const auto r = lasso_solve(op, VectorXcd::Zero(4), 1.0, LassoParams{});
    CHECK(r.h.norm() == 0.0);
    CHECK(r.converged);
}

TEST_CASE("lasso_solve: scalar soft-threshold closed form")
{
    DenseOperator op(MatrixXcd::Ones(1, 1));
    LassoParams p;
    p.alpha = 0.25; // lambda = 0.25 * |2| = 0.5
    p.kkt_rel_tol = 1e-12;
    VectorXcd y(1);
    y[0] = 2.0;
    const auto r = lasso_solve(op, y, 1.0, p);
    CHECK_THAT(r.lambda, WithinAbs(0.5, 1e-15));
    CHECK(std::abs(r.h[0] - cplx{1.5, 0.0}) <= 1e-9);

    y[0] = cplx{0.0, 2.0};
    const auto ri = lasso_solve(op, y, 1.0, p);
    CHECK(std::abs(ri.h[0] - cplx{0.0, 1.5}) <= 1e-9);
}

TEST_CASE("lasso_solve: argument validation")
{
    DenseOperator op(MatrixXcd::Identity(3, 3));
    LassoParams p;
    CHECK_THROWS_AS(lasso_solve(op, VectorXcd::Ones(2), 1.0, p), std::invalid_argument);
    CHECK_THROWS_AS(lasso_solve(op, VectorXcd::Ones(3), 0.0, p), std::invalid_argument);
    p.alpha = 1.0;
    CHECK_THROWS_AS(lasso_solve(op, VectorXcd::Ones(3), 1.0, p), std::invalid_argument);
    p = {};
    p.support_tau = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("lasso_solve: single-tap noiseless channel")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
    {
        Rng rng(seed);
        std::uniform_int_distribution<std::size_t> tap(1, c.L);
        const std::size_t l = tap(rng);
        const cplx gain = std::polar(0.8, 1.0 + static_cast<double>(seed));
        ChannelTensor h(1, c.L);
        h.at(0, 0, l) = gain;
        const Observed o = observe(h, c, rng);
        const SensingDictionary dict = build_dictionary(o.symbols, c);
        DictionaryOperator op(dict);
        const auto r = lasso_solve(op, o.obs[0], std::sqrt(c.power), LassoParams{});
        REQUIRE(r.converged);
        const auto sup = extract_support(r.h, 1, c.L, 0.1);
        REQUIRE(sup[0] == std::vector<std::size_t>{l});
        CHECK(std::abs(std::abs(r.h[static_cast<Eigen::Index>(l - 1)]) - std::abs(gain)) <= 0.15 * std::abs(gain));
    }
}

TEST_CASE("lasso_solve: certificate, monotone objective, dense cross-check")
{
    OfdmConfig c;
    c.N = 128;
    c.Q = 32;
    c.L = 32;
    c.delta_f = 400e6 / 128;
    c.noise_var = noise_var_for_snr(c, 0.5, 20.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        Rng rng(100 + seed);
        ChannelTensor h(2, c.L);
        std::uniform_int_distribution<std::size_t> tap(1, c.L);
        for (int i = 0; i < 4; ++i)
            h.at(i % 2, 0, tap(rng)) = std::polar(0.75, static_cast<double>(i));
        const Observed o = observe(h, c, rng);
        const SensingDictionary dict = build_dictionary(o.symbols, c);
        DictionaryOperator op(dict);
        const LassoParams p;
        const auto r = lasso_solve(op, o.obs[0], 1.0, p);
        REQUIRE(r.converged);
        REQUIRE(r.kkt_violation <= p.kkt_rel_tol * r.lambda);
        REQUIRE(dense_kkt_ratio(dict.dense(), o.obs[0], 1.0, r) <= p.kkt_rel_tol * 1.0001);
        for (std::size_t i = 1; i < r.objective_history.size(); ++i)
            REQUIRE(r.objective_history[i] <= r.objective_history[i - 1]);
        // lambda rule: ||A^H y||_inf scaled by alpha
        VectorXcd c0;
        op.adjoint(o.obs[0], c0);
        REQUIRE_THAT(r.lambda, WithinRel(p.alpha * c0.cwiseAbs().maxCoeff(), 1e-12));
    }
}

TEST_CASE("spectral_norm_squared on a dense operator")
{
    Rng rng(5);
    std::normal_distribution<double> g;
    MatrixXcd a(20, 12);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            a(i, j) = {g(rng), g(rng)};
    DenseOperator op(a);
    const double sv = Eigen::JacobiSVD<MatrixXcd>(a).singularValues()[0];
    CHECK_THAT(spectral_norm_squared(op, 1000, 1e-14), WithinRel(sv * sv, 1e-6));
}

TEST_CASE("extract_support")
{
    CHECK(extract_support(VectorXcd::Zero(6), 2, 3, 0.1) == std::vector<std::vector<std::size_t>>(2));
    VectorXcd h = VectorXcd::Zero(6);
    h[4] = 1.0;
    h[0] = 0.05;
    h[2] = cplx{0.0, -0.09};
    const auto s = extract_support(h, 2, 3, 0.1);
    CHECK(s[0].empty());
    CHECK(s[1] == std::vector<std::size_t>{2});
    h[0] = 0.5;
    CHECK(extract_support(h, 2, 3, 0.1)[0] == std::vector<std::size_t>{1});
    CHECK_THROWS_AS(extract_support(h, 2, 4, 0.1), std::invalid_argument);
}

TEST_CASE("taps_to_ranges")
{
    OfdmConfig c3;
    c3.c0 = 3e8;
    CHECK_THAT(tap_to_range(1, c3), WithinAbs(0.375, 1e-12));
    CHECK_THAT(tap_to_range(2, c3), WithinAbs(1.125, 1e-12));
    CHECK_THAT(tap_to_range(134, c3), WithinAbs(100.125, 1e-9));

    OfdmConfig c;
    CHECK_THAT(tap_to_range(1, c), WithinAbs(0.3747, 1e-4));
    CHECK(std::abs(tap_to_range(134, c) - 100.0) <= c.range_bin() / 2.0);
    CHECK(std::abs(tap_to_range(tap_index(100.0, c), c) - 100.0) <= c.range_bin() / 2.0);
    CHECK_THROWS_AS(tap_to_range(0, c), std::out_of_range);
    CHECK_THROWS_AS(tap_to_range(c.L + 1, c), std::out_of_range);

    const std::vector<std::size_t> taps{5, 2, 9};
    const RangeSet r = taps_to_ranges(taps, c3);
    REQUIRE(r.size() == 3);
    CHECK_THAT(r(1), WithinAbs(1.125, 1e-12));
    CHECK_THAT(r(3), WithinAbs(6.375, 1e-12));
}

TEST_CASE("RangeSet invariants")
{
    const RangeSet r({3.0, 1.0, 2.0, 3.0});
    REQUIRE(r.size() == 3);
    CHECK(r(1) == 1.0);
    CHECK(r(2) == 2.0);
    CHECK(r(3) == 3.0);
    CHECK_THROWS_AS(r(0), std::out_of_range);
    CHECK_THROWS_AS(r(4), std::out_of_range);
    CHECK_THROWS_AS(RangeSet({1.0, 0.0}), std::invalid_argument);
    CHECK(RangeSet{}.empty());
}

TEST_CASE("phase_one: single BS, single target, noiseless")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    Scene s;
    s.bs_positions = {{10, 20}};
    s.target_positions = {{40, 60}};
    PathSet ps;
    PropagationPath p;
    p.target = 0;
    p.path_length = bistatic_distance(s, 0, 0, 0);
    p.gain = {0.6, 0.2};
    ps.paths.push_back(p);
    Rng rng(1);
    const Observed o = observe(build_channels(ps, 1, c), c, rng);
    const RangeTable t = phase_one(o.obs, build_dictionary(o.symbols, c), LassoParams{}, c);
    REQUIRE(t.at(0, 0).size() == 1);
    CHECK(std::abs(t.at(0, 0)(1) - 100.0) <= c.range_bin() / 2.0);
}

TEST_CASE("phase_one: empty scene and a single clutter path")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    Rng rng(2);
    {
        const Observed o = observe(ChannelTensor(3, c.L), c, rng);
        const RangeTable t = phase_one(o.obs, build_dictionary(o.symbols, c), LassoParams{}, c);
        for (std::size_t u = 0; u < 3; ++u)
            for (std::size_t m = 0; m < 3; ++m)
                CHECK(t.at(u, m).empty());
    }
    {
        PathSet ps;
        PropagationPath p;
        p.kind = PathKind::TypeIII;
        p.tx_bs = 0;
        p.rx_bs = 1;
        p.path_length = 57.3;
        p.gain = {0.3, 0.1};
        ps.paths.push_back(p);
        const Observed o = observe(build_channels(ps, 2, c), c, rng);
        const RangeTable t = phase_one(o.obs, build_dictionary(o.symbols, c), LassoParams{}, c);
        REQUIRE(t.at(0, 1).size() == 1);
        CHECK(std::abs(t.at(0, 1)(1) - 57.3) <= c.range_bin() / 2.0);
        CHECK(t.at(1, 0).empty());
        CHECK(t.at(0, 0).empty());
        CHECK(t.at(1, 1).empty());
    }
}

TEST_CASE("phase_one: every non-colliding true range is recovered within half a bin")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    PathConfig pc;
    pc.nlos_rate = 0;
    pc.clutter_rate = 0;
    SceneConfig sc;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        Rng rng(5000 + seed);
        sc.num_targets = 1 + seed % 4;
        const Scene s = generate_scene(sc, rng);
        const PathSet ps = generate_paths(s, pc, rng);
        const std::size_t M = s.num_bs();
        // skip scenes where two targets share a tap on some ordered pair
        bool collide = false;
        for (std::size_t u = 0; u < M && !collide; ++u)
            for (std::size_t m = 0; m < M && !collide; ++m)
            {
                std::set<std::size_t> taps;
                for (std::size_t k = 0; k < s.num_targets(); ++k)
                    collide = collide || !taps.insert(tap_index(bistatic_distance(s, u, m, k), c)).second;
            }
        if (collide)
            continue;
        const Observed o = observe(build_channels(ps, M, c), c, rng);
        const RangeTable t = phase_one(o.obs, build_dictionary(o.symbols, c), LassoParams{}, c);
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t k = 0; k < s.num_targets(); ++k)
                {
                    const double d = bistatic_distance(s, u, m, k);
                    bool found = false;
                    for (double r : t.at(u, m).values())
                        found = found || std::abs(r - d) <= c.range_bin() / 2.0;
                    REQUIRE(found);
                }
        ++checked;
    }
    CHECK(checked >= 50);
}

TEST_CASE("phase_one: support is invariant to doubling the power")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    SceneConfig sc;
    sc.num_targets = 3;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
    {
        Rng rng(seed);
        const Scene s = generate_scene(sc, rng);
        const PathSet ps = generate_paths(s, PathConfig{}, rng);
        const ChannelTensor h = build_channels(ps, s.num_bs(), c);
        const auto symbols = generate_symbols(c, s.num_bs(), rng);
        auto ranges = [&](double power) {
            OfdmConfig cp = c;
            cp.power = power;
            std::vector<VectorXcd> tx, obs;
            for (const auto &x : symbols)
                tx.push_back(modulate(x, cp));
            Rng unused(0);
            for (const auto &y : simulate_reception(h, tx, cp, unused))
                obs.push_back(remove_cp_dft(y, cp));
            return phase_one(obs, build_dictionary(symbols, cp), LassoParams{}, cp);
        };
        const RangeTable a = ranges(1.0), b = ranges(2.0);
        for (std::size_t u = 0; u < s.num_bs(); ++u)
            for (std::size_t m = 0; m < s.num_bs(); ++m)
            {
                const auto va = a.at(u, m).values(), vb = b.at(u, m).values();
                REQUIRE(std::vector<double>(va.begin(), va.end()) == std::vector<double>(vb.begin(), vb.end()));
            }
    }
}

TEST_CASE("debias recovers exact gains on a noiseless support")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    ChannelTensor h(1, c.L);
    h.at(0, 0, 40) = {0.5, 0.5};
    h.at(0, 0, 90) = {-0.7, 0.1};
    Rng rng(3);
    const Observed o = observe(h, c, rng);
    const SensingDictionary dict = build_dictionary(o.symbols, c);
    const std::vector<std::size_t> cols{39, 89};
    const VectorXcd g = debias(dict, o.obs[0], 1.0, cols);
    CHECK(std::abs(g[39] - cplx{0.5, 0.5}) < 1e-10);
    CHECK(std::abs(g[89] - cplx{-0.7, 0.1}) < 1e-10);
    CHECK(std::abs(g[0]) == 0.0);
}

TEST_CASE("write_range_records emits one JSON record per ordered pair")
{
    OfdmConfig c;
    c.noise_var = 0.0;
    Rng rng(4);
    Scene s = generate_scene(SceneConfig{}, rng);
    const PathSet ps = generate_paths(s, PathConfig{}, rng);
    const Observed o = observe(build_channels(ps, s.num_bs(), c), c, rng);
    const PhaseOneResult p1 = phase_one_detailed(o.obs, build_dictionary(o.symbols, c), LassoParams{}, c);
    std::ostringstream os;
    write_range_records(os, p1, c);
    std::istringstream is(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line))
    {
        const auto j = nlohmann::json::parse(line);
        const std::size_t u = j["tx"].get<std::size_t>() - 1, m = j["rx"].get<std::size_t>() - 1;
        CHECK(j["ranges_m"].size() == p1.ranges.at(u, m).size());
        CHECK(j["taps"].size() == j["magnitudes"].size());
        ++n;
    }
    CHECK(n == 16);
}
