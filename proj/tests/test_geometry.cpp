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
#include "isac/geometry.hpp"

#include <cmath>
#include <map>
#include <set>
#include <tuple>

using namespace isac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("distance")
{
    CHECK(distance({0, 0}, {3, 4}) == 5.0);
    CHECK(distance({7, -2}, {7, -2}) == 0.0);
    CHECK(distance({1, 1}, {4, 5}) == 5.0);
    CHECK(distance({1, 2}, {-3, 7}) == distance({-3, 7}, {1, 2}));
}

TEST_CASE("bistatic_distance")
{
    Scene s;
    s.bs_positions = {{0, 0}, {40, 0}};
    s.target_positions = {{0, 30}};
    CHECK_THAT(bistatic_distance(s, 0, 1, 0), WithinAbs(80.0, 1e-12));
    CHECK_THAT(bistatic_distance(s, 1, 0, 0), WithinAbs(80.0, 1e-12));

    Scene mono;
    mono.bs_positions = {{0, 0}, {50, 50}};
    mono.target_positions = {{3, 4}};
    CHECK_THAT(bistatic_distance(mono, 0, 0, 0), WithinAbs(10.0, 1e-12));

    Scene far;
    far.bs_positions = {{0, 0}, {100, 0}};
    far.target_positions = {{30, 40}};
    const double expected = 50.0 + std::sqrt(70.0 * 70.0 + 40.0 * 40.0);
    CHECK_THAT(bistatic_distance(far, 0, 1, 0), WithinAbs(expected, 1e-12));
    CHECK_THAT(bistatic_distance(far, 0, 1, 0), WithinAbs(130.6226, 5e-5));

    CHECK_THROWS_AS(bistatic_distance(far, 2, 0, 0), std::out_of_range);
    CHECK_THROWS_AS(bistatic_distance(far, 0, 0, 1), std::out_of_range);
}

TEST_CASE("generate_scene: shape, range and determinism")
{
    SceneConfig cfg;
    cfg.num_bs = 4;
    cfg.num_targets = 3;
    cfg.area_side = 120;
    Rng a(42), b(42);
    const Scene s1 = generate_scene(cfg, a);
    const Scene s2 = generate_scene(cfg, b);
    REQUIRE(s1.num_bs() == 4);
    REQUIRE(s1.num_targets() == 3);
    CHECK(s1.bs_positions == s2.bs_positions);
    CHECK(s1.target_positions == s2.target_positions);

    cfg.num_targets = 0;
    Rng c(7);
    CHECK(generate_scene(cfg, c).num_targets() == 0);
}

TEST_CASE("generate_scene: every coordinate inside the square over many seeds")
{
    SceneConfig cfg;
    bool inside = true, separated = true;
    for (std::uint64_t seed = 0; seed < 10000; ++seed)
    {
        Rng rng(seed);
        const Scene s = generate_scene(cfg, rng);
        auto in = [&](const Point2D &p) {
            return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0 && p.x <= cfg.area_side && p.y >= 0 &&
                   p.y <= cfg.area_side;
        };
        for (const auto &p : s.bs_positions)
            inside = inside && in(p);
        for (const auto &p : s.target_positions)
            inside = inside && in(p);
        for (std::size_t i = 0; i < s.num_bs(); ++i)
            for (std::size_t j = i + 1; j < s.num_bs(); ++j)
                separated = separated && distance(s.bs_positions[i], s.bs_positions[j]) >= cfg.min_bs_separation;
    }
    CHECK(inside);
    CHECK(separated);
}

TEST_CASE("generate_scene: target spacing options")
{
    SceneConfig cfg;
    cfg.num_targets = 6;
    cfg.min_target_separation = 3.0;
    cfg.min_target_bs_distance = 3.0;
    for (std::uint64_t seed = 0; seed < 500; ++seed)
    {
        Rng rng(seed);
        const Scene s = generate_scene(cfg, rng);
        for (std::size_t k = 0; k < s.num_targets(); ++k)
        {
            for (const auto &b : s.bs_positions)
                REQUIRE(distance(b, s.target_positions[k]) >= 3.0);
            for (std::size_t j = k + 1; j < s.num_targets(); ++j)
                REQUIRE(distance(s.target_positions[j], s.target_positions[k]) >= 3.0);
        }
    }
}

TEST_CASE("generate_scene: invalid configs")
{
    Rng rng(1);
    SceneConfig cfg;
    cfg.num_bs = 1;
    CHECK_THROWS_AS(generate_scene(cfg, rng), std::invalid_argument);
    cfg = {};
    cfg.area_side = 0;
    CHECK_THROWS_AS(generate_scene(cfg, rng), std::invalid_argument);
    cfg = {};
    cfg.min_bs_separation = 1000;
    CHECK_THROWS_AS(generate_scene(cfg, rng), std::invalid_argument);
    cfg = {};
    cfg.min_target_separation = -1;
    CHECK_THROWS_AS(generate_scene(cfg, rng), std::invalid_argument);
    cfg = {};
    cfg.num_targets = 2;
    cfg.min_target_separation = 1000;
    CHECK_THROWS_AS(generate_scene(cfg, rng), std::runtime_error);
}

TEST_CASE("generate_paths: LOS-only counting")
{
    SceneConfig sc;
    sc.num_bs = 2;
    sc.num_targets = 1;
    Rng rng(3);
    const Scene s = generate_scene(sc, rng);
    PathConfig pc;
    pc.nlos_rate = 0;
    pc.clutter_rate = 0;
    const PathSet ps = generate_paths(s, pc, rng);
    REQUIRE(ps.paths.size() == 4);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto &p : ps.paths)
    {
        CHECK(p.kind == PathKind::TypeI);
        pairs.insert({p.tx_bs, p.rx_bs});
    }
    CHECK(pairs.size() == 4);
}

TEST_CASE("generate_paths: path invariants and reciprocity")
{
    SceneConfig sc;
    sc.num_targets = 4;
    PathConfig pc;
    pc.nlos_rate = 1.5;
    pc.clutter_rate = 1.5;
    for (std::uint64_t seed = 0; seed < 200; ++seed)
    {
        Rng rng(seed);
        const Scene s = generate_scene(sc, rng);
        const PathSet ps = generate_paths(s, pc, rng);
        std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> los;
        for (const auto &p : ps.paths)
        {
            REQUIRE(p.path_length > 0.0);
            REQUIRE(std::abs(p.gain) > 0.0);
            switch (p.kind)
            {
            case PathKind::TypeI: {
                REQUIRE(p.target.has_value());
                const Point2D t = s.target_positions[*p.target];
                const double exact = distance(s.bs_positions[p.tx_bs], t) + distance(s.bs_positions[p.rx_bs], t);
                REQUIRE(p.path_length == exact);
                const auto key = std::make_tuple(p.tx_bs, p.rx_bs, *p.target);
                REQUIRE(los.count(key) == 0);
                los[key] = p.path_length;
                break;
            }
            case PathKind::TypeII:
                REQUIRE(p.target.has_value());
                REQUIRE(p.nlos_bias > 0.0);
                REQUIRE_THAT(p.path_length - bistatic_distance(s, p.tx_bs, p.rx_bs, *p.target),
                             WithinAbs(p.nlos_bias, 1e-9));
                break;
            case PathKind::TypeIII:
                REQUIRE_FALSE(p.target.has_value());
                REQUIRE(p.path_length >= pc.clutter_length_min);
                break;
            }
        }
        REQUIRE(los.size() == s.num_bs() * s.num_bs() * s.num_targets());
        for (const auto &[key, len] : los)
        {
            const auto &[u, m, k] = key;
            REQUIRE(los.at({m, u, k}) == len);
        }
        for (std::size_t u = 0; u < s.num_bs(); ++u)
            for (std::size_t m = 0; m < s.num_bs(); ++m)
                for (std::size_t k = 0; k < s.num_targets(); ++k)
                    REQUIRE(bistatic_distance(s, u, m, k) == bistatic_distance(s, m, u, k));
    }
}

TEST_CASE("generate_paths: LOS drop keeps reciprocity")
{
    SceneConfig sc;
    sc.num_targets = 5;
    PathConfig pc;
    pc.los_drop_probability = 0.3;
    std::size_t dropped = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        Rng rng(seed);
        const Scene s = generate_scene(sc, rng);
        const PathSet ps = generate_paths(s, pc, rng);
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> los;
        for (const auto &p : ps.paths)
            if (p.kind == PathKind::TypeI)
                los.insert({p.tx_bs, p.rx_bs, *p.target});
        dropped += s.num_bs() * s.num_bs() * s.num_targets() - los.size();
        for (const auto &[u, m, k] : los)
            REQUIRE(los.count({m, u, k}) == 1);
    }
    CHECK(dropped > 0);
}

TEST_CASE("generate_paths: clutter count follows the configured Poisson mean")
{
    SceneConfig sc;
    sc.num_targets = 2;
    PathConfig pc;
    pc.nlos_rate = 0;
    pc.clutter_rate = 2.0;
    double total = 0;
    const int seeds = 1000;
    for (int seed = 0; seed < seeds; ++seed)
    {
        Rng rng(static_cast<std::uint64_t>(seed));
        const Scene s = generate_scene(sc, rng);
        for (const auto &p : generate_paths(s, pc, rng).paths)
            total += p.kind == PathKind::TypeIII ? 1 : 0;
    }
    // 16 ordered pairs at mean 2
    CHECK_THAT(total / seeds, WithinRel(32.0, 0.05));
}

TEST_CASE("generate_paths: invalid configs")
{
    SceneConfig sc;
    Rng rng(1);
    const Scene s = generate_scene(sc, rng);
    PathConfig pc;
    pc.gain_min = 0;
    CHECK_THROWS_AS(generate_paths(s, pc, rng), std::invalid_argument);
    pc = {};
    pc.clutter_rate = -1;
    CHECK_THROWS_AS(generate_paths(s, pc, rng), std::invalid_argument);
    pc = {};
    pc.los_drop_probability = 1.5;
    CHECK_THROWS_AS(generate_paths(s, pc, rng), std::invalid_argument);
    pc = {};
    pc.nlos_bias_min = 0;
    CHECK_THROWS_AS(generate_paths(s, pc, rng), std::invalid_argument);
}
