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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace isac {

/// Anything that can multiply by a complex matrix A and by its adjoint.
template <class Op>
concept LinearOperator = requires(Op &op, const Eigen::VectorXcd &x, Eigen::VectorXcd &y) {
    { op.rows() } -> std::convertible_to<Eigen::Index>;
    { op.cols() } -> std::convertible_to<Eigen::Index>;
    op.apply(x, y);
    op.adjoint(x, y);
};

struct LassoParams
{
    double alpha = 0.1;        // lambda = alpha * || scale * A^H y ||_inf
    std::size_t max_iters = 2000;
    double step_tol = 1e-8;    // relative objective decrease that triggers the optimality check
    double kkt_rel_tol = 1e-3; // kkt_tol = kkt_rel_tol * lambda
    double support_tau = 0.1;  // support threshold relative to the largest coefficient

    void validate() const
    {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("LassoParams: alpha must lie in (0, 1)");
        if (!(support_tau > 0.0 && support_tau < 1.0))
            throw std::invalid_argument("LassoParams: support_tau must lie in (0, 1)");
        if (max_iters == 0 || !(step_tol > 0.0) || !(kkt_rel_tol > 0.0))
            throw std::invalid_argument("LassoParams: tolerances and max_iters must be positive");
    }
};

struct LassoResult
{
    Eigen::VectorXcd h;              // estimate
    double lambda = 0.0;
    double objective = 0.0;
    double kkt_violation = 0.0;      // max_j optimality-condition violation at h
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> objective_history; // objective of the accepted iterate after each iteration
};

/// Complex soft threshold: x * max(1 - t / |x|, 0).
inline std::complex<double> soft_threshold(std::complex<double> x, double t) noexcept
{
    const double a = std::abs(x);
    return a > t ? x * ((a - t) / a) : std::complex<double>{0.0, 0.0};
}

/// Largest eigenvalue of A^H A by power iteration, from a deterministic start vector.
template <LinearOperator Op>
double spectral_norm_squared(Op &op, std::size_t iters = 100, double rel_tol = 1e-9)
{
    Eigen::VectorXcd v = Eigen::VectorXcd::Constant(op.cols(), std::complex<double>{1.0, 0.0});
    // break symmetry with a fixed ramp so the start is not orthogonal to the top singular vector
    for (Eigen::Index j = 0; j < v.size(); ++j)
        v[j] += std::complex<double>{0.0, 0.5 * std::sin(static_cast<double>(j) + 1.0)};
    v.normalize();
    Eigen::VectorXcd av, w;
    double est = 0.0;
    for (std::size_t it = 0; it < iters; ++it)
    {
        op.apply(v, av);
        op.adjoint(av, w);
        const double next = w.norm();
        if (next == 0.0)
            return 0.0;
        v = w / next;
        const bool done = std::abs(next - est) <= rel_tol * next;
        est = next;
        if (done)
            break;
    }
    return est;
}

/// Optimality violation of h for min 1/2 ||y - scale A h||^2 + lambda ||h||_1, given the
/// negative gradient c = scale A^H (y - scale A h):
///   h_j = 0  : |c_j| <= lambda
///   h_j != 0 : c_j = lambda h_j / |h_j|
inline double kkt_violation(const Eigen::VectorXcd &h, const Eigen::VectorXcd &c, double lambda)
{
    double worst = 0.0;
    for (Eigen::Index j = 0; j < h.size(); ++j)
    {
        const double a = std::abs(h[j]);
        const double v = a == 0.0 ? std::max(0.0, std::abs(c[j]) - lambda) : std::abs(c[j] - lambda * h[j] / a);
        worst = std::max(worst, v);
    }
    return worst;
}

/// Solves min_h 1/2 ||y - scale A h||^2 + lambda ||h||_1 with accelerated proximal gradient and
/// function-value restart; lambda = alpha * ||scale A^H y||_inf.
///
/// The accepted objective sequence never increases: a momentum step that would raise the objective is
/// discarded and replaced by a plain proximal step from the last iterate. Convergence means the
/// optimality violation is at most kkt_rel_tol * lambda. `lipschitz` may be passed in when the same
/// operator is reused; otherwise it is estimated by power iteration.
template <LinearOperator Op>
LassoResult lasso_solve(Op &op, const Eigen::VectorXcd &y, double scale, const LassoParams &params,
                        double lipschitz = 0.0)
{
    params.validate();
    if (y.size() != op.rows())
        throw std::invalid_argument("lasso_solve: observation length does not match the operator");
    if (!(scale > 0.0))
        throw std::invalid_argument("lasso_solve: scale must be positive");

    const Eigen::Index n = op.cols();
    LassoResult res;
    res.h = Eigen::VectorXcd::Zero(n);

    Eigen::VectorXcd c0;
    op.adjoint(y, c0);
    c0 *= scale;
    const double cmax = c0.cwiseAbs().maxCoeff();
    res.lambda = params.alpha * cmax;
    res.objective = 0.5 * y.squaredNorm();
    if (cmax == 0.0)
    {
        res.converged = true;
        return res;
    }
    const double lambda = res.lambda;
    const double kkt_tol = params.kkt_rel_tol * lambda;

    if (!(lipschitz > 0.0))
        lipschitz = scale * scale * spectral_norm_squared(op) * 1.01; // power iteration approaches from below
    const double step = 1.0 / lipschitz;

    auto objective = [&](const Eigen::VectorXcd &ax, const Eigen::VectorXcd &x) {
        return 0.5 * (y - scale * ax).squaredNorm() + lambda * x.cwiseAbs().sum();
    };

    Eigen::VectorXcd x = res.h, ax = Eigen::VectorXcd::Zero(op.rows());
    Eigen::VectorXcd yk = x, ayk = ax;
    Eigen::VectorXcd z(n), az, grad(n), c(n);
    double fx = res.objective;
    double t = 1.0;
    bool momentum = false;

    for (std::size_t it = 1; it <= params.max_iters; ++it)
    {
        res.iterations = it;
        if (it == 1)
            c = c0;
        else
        {
            op.adjoint(y - scale * ayk, c);
            c *= scale;
        }
        for (Eigen::Index j = 0; j < n; ++j)
            z[j] = soft_threshold(yk[j] + step * c[j], step * lambda);
        op.apply(z, az);
        const double fz = objective(az, z);

        if (fz > fx)
        {
            if (momentum)
            {
                // restart from the last accepted iterate
                t = 1.0;
                yk = x;
                ayk = ax;
                momentum = false;
                res.objective_history.push_back(fx);
                continue;
            }
            // a plain proximal step cannot increase the objective except through rounding
            res.objective_history.push_back(fx);
            break;
        }

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double w = (t - 1.0) / t_next;
        yk = z + w * (z - x);
        ayk = az + w * (az - ax);
        momentum = w != 0.0;
        const double rel = (fx - fz) / std::max(fx, std::numeric_limits<double>::min());
        x.swap(z);
        ax.swap(az);
        fx = fz;
        t = t_next;
        res.objective_history.push_back(fx);

        if (rel < params.step_tol || it % 50 == 0)
        {
            op.adjoint(y - scale * ax, grad);
            grad *= scale;
            if (kkt_violation(x, grad, lambda) <= kkt_tol)
            {
                res.converged = true;
                break;
            }
        }
    }

    op.adjoint(y - scale * ax, grad);
    grad *= scale;
    res.h = x;
    res.objective = fx;
    res.kkt_violation = kkt_violation(x, grad, lambda);
    res.converged = res.kkt_violation <= kkt_tol;
    return res;
}

} // namespace isac
