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

#include "isac/random.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace isac {

using cplx = std::complex<double>;

struct Point2D
{
    double x = 0.0; // meters
    double y = 0.0; // meters

    friend bool operator==(const Point2D &, const Point2D &) = default;
};

/// Euclidean distance between two points.
inline double distance(const Point2D &p, const Point2D &q) noexcept
{
    return std::hypot(q.x - p.x, q.y - p.y);
}

struct Scene
{
    std::vector<Point2D> bs_positions;
    std::vector<Point2D> target_positions;
    double area_side = 120.0;

    std::size_t num_bs() const noexcept { return bs_positions.size(); }
    std::size_t num_targets() const noexcept { return target_positions.size(); }
};

/// Length of the path BS u -> target k -> BS m.
inline double bistatic_distance(const Scene &scene, std::size_t u, std::size_t m, std::size_t k)
{
    if (u >= scene.num_bs() || m >= scene.num_bs())
        throw std::out_of_range("bistatic_distance: BS index out of range");
    if (k >= scene.num_targets())
        throw std::out_of_range("bistatic_distance: target index out of range");
    const Point2D &t = scene.target_positions[k];
    return distance(scene.bs_positions[u], t) + distance(scene.bs_positions[m], t);
}

struct SceneConfig
{
    std::size_t num_bs = 4;
    std::size_t num_targets = 3;
    double area_side = 120.0;
    double min_bs_separation = 10.0; // redraw BS placements closer than this
    double min_target_separation = 0.0; // redraw a target closer than this to an earlier target
    double min_target_bs_distance = 0.0; // redraw a target closer than this to any BS
};

/// Draws BS and target coordinates uniformly over [0, area_side]^2.
inline Scene generate_scene(const SceneConfig &cfg, Rng &rng)
{
    if (!(cfg.area_side > 0.0) || !std::isfinite(cfg.area_side))
        throw std::invalid_argument("generate_scene: area_side must be positive");
    if (cfg.num_bs < 2)
        throw std::invalid_argument("generate_scene: at least two BSs are required");
    if (cfg.min_bs_separation < 0.0)
        throw std::invalid_argument("generate_scene: min_bs_separation must be non-negative");
    // Packing sanity: disks of radius sep/2 must fit in the (side + sep)^2 square.
    const double sep = cfg.min_bs_separation;
    const double packing = static_cast<double>(cfg.num_bs) * std::numbers::pi * sep * sep / 4.0;
    if (packing > 0.5 * (cfg.area_side + sep) * (cfg.area_side + sep))
        throw std::invalid_argument("generate_scene: min_bs_separation too large for the area");

    std::uniform_real_distribution<double> coord(0.0, cfg.area_side);
    Scene scene;
    scene.area_side = cfg.area_side;
    scene.bs_positions.reserve(cfg.num_bs);
    while (scene.bs_positions.size() < cfg.num_bs)
    {
        const Point2D p{coord(rng), coord(rng)};
        bool ok = true;
        for (const auto &q : scene.bs_positions)
            ok = ok && distance(p, q) >= sep;
        if (ok)
            scene.bs_positions.push_back(p);
    }
    if (cfg.min_target_separation < 0.0 || cfg.min_target_bs_distance < 0.0)
        throw std::invalid_argument("generate_scene: target spacing must be non-negative");
    scene.target_positions.reserve(cfg.num_targets);
    constexpr std::size_t max_redraws = 100000;
    for (std::size_t k = 0; k < cfg.num_targets; ++k)
    {
        for (std::size_t attempt = 0;; ++attempt)
        {
            if (attempt == max_redraws)
                throw std::runtime_error("generate_scene: cannot place targets with the requested spacing");
            const Point2D p{coord(rng), coord(rng)};
            bool ok = true;
            for (const auto &q : scene.bs_positions)
                ok = ok && distance(p, q) >= cfg.min_target_bs_distance;
            for (const auto &q : scene.target_positions)
                ok = ok && distance(p, q) >= cfg.min_target_separation;
            if (ok)
            {
                scene.target_positions.push_back(p);
                break;
            }
        }
    }
    return scene;
}

enum class PathKind
{
    TypeI,  // LOS echo
    TypeII, // NLOS echo, biased by an extra reflection
    TypeIII // clutter
};

inline const char *to_string(PathKind kind) noexcept
{
    switch (kind)
    {
    case PathKind::TypeI:
        return "I";
    case PathKind::TypeII:
        return "II";
    case PathKind::TypeIII:
        return "III";
    }
    return "?";
}

struct PropagationPath
{
    PathKind kind = PathKind::TypeI;
    std::size_t tx_bs = 0;
    std::size_t rx_bs = 0;
    std::optional<std::size_t> target; // set iff kind is TypeI or TypeII
    double path_length = 0.0;          // meters
    double nlos_bias = 0.0;            // meters, TypeII only
    cplx gain{1.0, 0.0};
};

/// All paths of one realization, ordered by (tx_bs, rx_bs) and then generation order.
struct PathSet
{
    std::vector<PropagationPath> paths;
};

struct PathConfig
{
    double los_drop_probability = 0.0; // probability that a BS-target link is blocked
    double nlos_rate = 1.0;            // Poisson mean of TypeII paths per ordered BS pair
    double nlos_bias_min = 1.5;        // meters
    double nlos_bias_max = 30.0;       // meters
    double clutter_rate = 1.0;         // Poisson mean of TypeIII paths per ordered BS pair
    double clutter_length_min = 5.0;   // meters; the maximum is 2 * area diagonal
    double gain_min = 0.5;
    double gain_max = 1.0;
    double reflection_loss = 0.5; // extra amplitude factor on TypeII and TypeIII gains
};

namespace detail {

inline cplx draw_gain(const PathConfig &cfg, double scale, Rng &rng)
{
    std::uniform_real_distribution<double> mag(cfg.gain_min, cfg.gain_max);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double a = mag(rng);
    const double phi = phase(rng);
    return std::polar(scale * a, phi);
}

} // namespace detail

/// Generates the TypeI/II/III paths for every ordered BS pair (u, m).
///
/// TypeI lengths follow the target geometry exactly and are shared between (u, m) and (m, u).
/// TypeII and TypeIII draws are independent for each ordered pair.
inline PathSet generate_paths(const Scene &scene, const PathConfig &cfg, Rng &rng)
{
    if (!(cfg.gain_min > 0.0) || cfg.gain_max < cfg.gain_min)
        throw std::invalid_argument("generate_paths: invalid gain range");
    if (cfg.nlos_rate < 0.0 || cfg.clutter_rate < 0.0)
        throw std::invalid_argument("generate_paths: Poisson rates must be non-negative");
    if (!(cfg.nlos_bias_min > 0.0) || cfg.nlos_bias_max < cfg.nlos_bias_min)
        throw std::invalid_argument("generate_paths: NLOS bias range must be positive");
    if (cfg.los_drop_probability < 0.0 || cfg.los_drop_probability > 1.0)
        throw std::invalid_argument("generate_paths: los_drop_probability outside [0, 1]");

    const std::size_t M = scene.num_bs();
    const std::size_t K = scene.num_targets();
    const double max_clutter = 2.0 * std::sqrt(2.0) * scene.area_side;
    if (cfg.clutter_rate > 0.0 && !(max_clutter > cfg.clutter_length_min))
        throw std::invalid_argument("generate_paths: clutter length range is empty");

    std::bernoulli_distribution drop(cfg.los_drop_probability);
    std::poisson_distribution<int> n_nlos(cfg.nlos_rate > 0.0 ? cfg.nlos_rate : 1.0);
    std::poisson_distribution<int> n_clutter(cfg.clutter_rate > 0.0 ? cfg.clutter_rate : 1.0);
    std::uniform_real_distribution<double> bias(cfg.nlos_bias_min, cfg.nlos_bias_max);
    std::uniform_real_distribution<double> clutter_len(cfg.clutter_length_min, max_clutter);

    // A blocked BS-target link removes every TypeI path that uses it, in both directions.
    std::vector<char> blocked(M * K, 0);
    if (cfg.los_drop_probability > 0.0)
        for (auto &b : blocked)
            b = drop(rng) ? 1 : 0;

    PathSet out;
    for (std::size_t u = 0; u < M; ++u)
    {
        for (std::size_t m = 0; m < M; ++m)
        {
            for (std::size_t k = 0; k < K; ++k)
            {
                if (blocked[u * K + k] || blocked[m * K + k])
                    continue;
                PropagationPath p;
                p.kind = PathKind::TypeI;
                p.tx_bs = u;
                p.rx_bs = m;
                p.target = k;
                p.path_length = bistatic_distance(scene, u, m, k);
                p.gain = detail::draw_gain(cfg, 1.0, rng);
                out.paths.push_back(p);
            }
            const int nlos = (cfg.nlos_rate > 0.0 && K > 0) ? n_nlos(rng) : 0;
            for (int i = 0; i < nlos; ++i)
            {
                std::uniform_int_distribution<std::size_t> pick(0, K - 1);
                PropagationPath p;
                p.kind = PathKind::TypeII;
                p.tx_bs = u;
                p.rx_bs = m;
                p.target = pick(rng);
                p.nlos_bias = bias(rng);
                p.path_length = bistatic_distance(scene, u, m, *p.target) + p.nlos_bias;
                p.gain = detail::draw_gain(cfg, cfg.reflection_loss, rng);
                out.paths.push_back(p);
            }
            const int clutter = cfg.clutter_rate > 0.0 ? n_clutter(rng) : 0;
            for (int i = 0; i < clutter; ++i)
            {
                PropagationPath p;
                p.kind = PathKind::TypeIII;
                p.tx_bs = u;
                p.rx_bs = m;
                p.path_length = clutter_len(rng);
                p.gain = detail::draw_gain(cfg, cfg.reflection_loss, rng);
                out.paths.push_back(p);
            }
        }
    }
    return out;
}

} // namespace isac
