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

#include "isac/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

namespace isac {

/// Sum-distance measurements of one target: entry (u, m) is the measured length of BS u -> target -> BS m.
using RangeMatrix = Eigen::MatrixXd;

/// Sum over all ordered (u, m), u = m included, of (|p - bs_u| + |p - bs_m| - ranges(u, m))^2.
inline double nls_objective(const Point2D &pos, std::span<const Point2D> bs, const RangeMatrix &ranges)
{
    const auto M = static_cast<Eigen::Index>(bs.size());
    if (ranges.rows() != M || ranges.cols() != M)
        throw std::invalid_argument("nls_objective: range matrix must be M x M");
    Eigen::VectorXd d(M);
    for (Eigen::Index m = 0; m < M; ++m)
        d[m] = distance(pos, bs[static_cast<std::size_t>(m)]);
    double acc = 0.0;
    for (Eigen::Index u = 0; u < M; ++u)
        for (Eigen::Index m = 0; m < M; ++m)
        {
            const double r = d[u] + d[m] - ranges(u, m);
            acc += r * r;
        }
    return acc;
}

/// Best point of a regular grid with spacing area_side / 60 over [0, area_side]^2 under nls_objective.
/// Ties keep the first point in x-major order.
inline Point2D grid_initial_position(std::span<const Point2D> bs, const RangeMatrix &ranges, double area_side)
{
    constexpr int steps = 60;
    const double h = area_side / steps;
    Point2D best{0.0, 0.0};
    double best_f = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j)
        {
            const Point2D p{i * h, j * h};
            const double f = nls_objective(p, bs, ranges);
            if (f < best_f)
            {
                best_f = f;
                best = p;
            }
        }
    return best;
}

/// Starting point for Gauss-Newton from the monostatic radii rho_m = ranges(m, m) / 2.
///
/// Subtracting the first circle equation from the others gives the linear system
///   2 (a_m - a_1) x + 2 (b_m - b_1) y = rho_1^2 - rho_m^2 + a_m^2 - a_1^2 + b_m^2 - b_1^2,
/// solved in the least-squares sense. With fewer than three BSs or a condition number above 1e8
/// the grid search is used instead.
inline Point2D initial_position(std::span<const Point2D> bs, const RangeMatrix &ranges, double area_side)
{
    const auto M = static_cast<Eigen::Index>(bs.size());
    if (ranges.rows() != M || ranges.cols() != M)
        throw std::invalid_argument("initial_position: range matrix must be M x M");
    if (M >= 3)
    {
        Eigen::MatrixXd a(M - 1, 2);
        Eigen::VectorXd b(M - 1);
        const Point2D &p0 = bs[0];
        const double r0 = ranges(0, 0) / 2.0;
        for (Eigen::Index m = 1; m < M; ++m)
        {
            const Point2D &pm = bs[static_cast<std::size_t>(m)];
            const double rm = ranges(m, m) / 2.0;
            a(m - 1, 0) = 2.0 * (pm.x - p0.x);
            a(m - 1, 1) = 2.0 * (pm.y - p0.y);
            b[m - 1] = r0 * r0 - rm * rm + pm.x * pm.x - p0.x * p0.x + pm.y * pm.y - p0.y * p0.y;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto &sv = svd.singularValues();
        const double smin = sv[sv.size() - 1];
        if (smin > 0.0 && sv[0] / smin <= 1e8)
        {
            const Eigen::Vector2d x = svd.solve(b);
            if (x.allFinite())
                return {x[0], x[1]};
        }
    }
    return grid_initial_position(bs, ranges, area_side);
}

struct GaussNewtonConfig
{
    std::size_t max_iters = 50;
    double step_tol = 1e-6;      // meters
    double initial_damping = 1e-3;
    double min_distance = 1e-6;  // clip for Jacobian denominators
};

struct LocalizationResult
{
    Point2D position;
    double residual = 0.0; // nls_objective at position
    bool converged = false;
    std::size_t iterations = 0;
};

/// Levenberg-damped Gauss-Newton on the M^2 residuals r_{u,m} = |p - bs_u| + |p - bs_m| - ranges(u, m).
///
/// Each iteration solves (J^T J + mu I) s = J^T r and tries p - s. The step is accepted only when the
/// objective decreases (mu /= 10), otherwise mu *= 10. Stops when the step norm drops below step_tol
/// (converged) or after max_iters.
inline LocalizationResult gauss_newton_localize(std::span<const Point2D> bs, const RangeMatrix &ranges,
                                                const Point2D &init, const GaussNewtonConfig &cfg = {})
{
    const auto M = static_cast<Eigen::Index>(bs.size());
    if (ranges.rows() != M || ranges.cols() != M)
        throw std::invalid_argument("gauss_newton_localize: range matrix must be M x M");

    LocalizationResult res;
    res.position = init;
    res.residual = nls_objective(init, bs, ranges);
    double mu = cfg.initial_damping;

    Eigen::MatrixXd jac(M * M, 2);
    Eigen::VectorXd r(M * M);
    Eigen::VectorXd d(M), gx(M), gy(M);

    for (std::size_t it = 1; it <= cfg.max_iters; ++it)
    {
        res.iterations = it;
        const Point2D p = res.position;
        for (Eigen::Index m = 0; m < M; ++m)
        {
            const Point2D &b = bs[static_cast<std::size_t>(m)];
            d[m] = distance(p, b);
            const double dc = std::max(d[m], cfg.min_distance);
            gx[m] = (p.x - b.x) / dc;
            gy[m] = (p.y - b.y) / dc;
        }
        for (Eigen::Index u = 0; u < M; ++u)
            for (Eigen::Index m = 0; m < M; ++m)
            {
                const Eigen::Index row = u * M + m;
                r[row] = d[u] + d[m] - ranges(u, m);
                jac(row, 0) = gx[u] + gx[m];
                jac(row, 1) = gy[u] + gy[m];
            }
        Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d jtr = jac.transpose() * r;
        jtj.diagonal().array() += mu;
        const Eigen::Vector2d s = jtj.ldlt().solve(jtr);
        const double step = s.norm();
        if (!std::isfinite(step))
            break;
        if (step < cfg.step_tol)
        {
            res.converged = true;
            break;
        }
        const Point2D cand{p.x - s[0], p.y - s[1]};
        const double f = nls_objective(cand, bs, ranges);
        if (f < res.residual)
        {
            res.position = cand;
            res.residual = f;
            mu = std::max(mu / 10.0, 1e-12);
        }
        else
        {
            mu *= 10.0;
        }
    }
    return res;
}

} // namespace isac
