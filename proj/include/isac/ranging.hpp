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

#include "isac/lasso.hpp"
#include "isac/ofdm.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace isac {

/// Strictly ascending range estimates of one ordered BS pair. Element g (1-based) is the g-th smallest.
class RangeSet
{
  public:
    RangeSet() = default;

    /// Sorts and merges exact duplicates; rejects non-positive values.
    explicit RangeSet(std::vector<double> ranges) : r_(std::move(ranges))
    {
        for (double v : r_)
            if (!(v > 0.0))
                throw std::invalid_argument("RangeSet: ranges must be positive");
        std::sort(r_.begin(), r_.end());
        r_.erase(std::unique(r_.begin(), r_.end()), r_.end());
    }

    std::size_t size() const noexcept { return r_.size(); }
    bool empty() const noexcept { return r_.empty(); }

    /// 1-based access.
    double operator()(std::size_t g) const
    {
        if (g == 0 || g > r_.size())
            throw std::out_of_range("RangeSet: index out of range");
        return r_[g - 1];
    }

    std::span<const double> values() const noexcept { return r_; }

  private:
    std::vector<double> r_;
};

/// M x M table of range sets; at(u, m) is D_{u,m}, transmitter u, receiver m (0-based).
class RangeTable
{
  public:
    RangeTable() = default;
    explicit RangeTable(std::size_t num_bs) : m_(num_bs), sets_(num_bs * num_bs) {}

    std::size_t num_bs() const noexcept { return m_; }
    RangeSet &at(std::size_t u, std::size_t m) { return sets_.at(u * m_ + m); }
    const RangeSet &at(std::size_t u, std::size_t m) const { return sets_.at(u * m_ + m); }

  private:
    std::size_t m_ = 0;
    std::vector<RangeSet> sets_;
};

/// Taps (1-based, ascending) per transmitter whose magnitude exceeds tau times the largest |h|.
inline std::vector<std::vector<std::size_t>> extract_support(const Eigen::VectorXcd &h, std::size_t num_tx,
                                                             std::size_t taps, double tau)
{
    if (static_cast<std::size_t>(h.size()) != num_tx * taps)
        throw std::invalid_argument("extract_support: estimate length must be num_tx * taps");
    std::vector<std::vector<std::size_t>> support(num_tx);
    if (h.size() == 0)
        return support;
    const double peak = h.cwiseAbs().maxCoeff();
    if (!(peak > 0.0))
        return support;
    const double thr = tau * peak;
    for (std::size_t u = 0; u < num_tx; ++u)
        for (std::size_t l = 1; l <= taps; ++l)
            if (std::abs(h[static_cast<Eigen::Index>(u * taps + l - 1)]) > thr)
                support[u].push_back(l);
    return support;
}

/// Midpoint range of tap l: (l - 1) c0 / (N df) + c0 / (2 N df).
inline double tap_to_range(std::size_t l, const OfdmConfig &cfg)
{
    if (l == 0 || l > cfg.L)
        throw std::out_of_range("tap_to_range: tap index outside 1..L");
    return (static_cast<double>(l) - 0.5) * cfg.range_bin();
}

inline RangeSet taps_to_ranges(std::span<const std::size_t> taps, const OfdmConfig &cfg)
{
    std::vector<double> r;
    r.reserve(taps.size());
    for (std::size_t l : taps)
        r.push_back(tap_to_range(l, cfg));
    return RangeSet(std::move(r));
}

/// Least-squares refit of the coefficients on a fixed support (0-based dictionary columns).
/// Used for gain reporting only.
inline Eigen::VectorXcd debias(const SensingDictionary &dict, const Eigen::VectorXcd &y, double scale,
                               std::span<const std::size_t> columns)
{
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dict.cols()));
    if (columns.empty())
        return out;
    Eigen::MatrixXcd a(static_cast<Eigen::Index>(dict.rows()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i)
        a.col(static_cast<Eigen::Index>(i)) = scale * dict.column(columns[i]);
    const Eigen::VectorXcd coef = a.colPivHouseholderQr().solve(y);
    for (std::size_t i = 0; i < columns.size(); ++i)
        out[static_cast<Eigen::Index>(columns[i])] = coef[static_cast<Eigen::Index>(i)];
    return out;
}

/// Per-receiver output of Phase I, kept for inspection.
struct ReceiverEstimate
{
    LassoResult lasso;
    std::vector<std::vector<std::size_t>> support; // [u] -> taps
};

struct PhaseOneResult
{
    RangeTable ranges;
    std::vector<ReceiverEstimate> receivers;
};

/// One LASSO per receiving BS over the stacked channel, split by transmitter into D_{u,m}.
inline PhaseOneResult phase_one_detailed(const std::vector<Eigen::VectorXcd> &observations,
                                         const SensingDictionary &dict, const LassoParams &params,
                                         const OfdmConfig &cfg)
{
    params.validate();
    const std::size_t M = dict.num_tx();
    if (observations.size() != M)
        throw std::invalid_argument("phase_one: need one observation per receiving BS");
    if (dict.taps() != cfg.L || dict.rows() != cfg.N)
        throw std::invalid_argument("phase_one: dictionary shape differs from the OFDM config");

    DictionaryOperator op(dict);
    const double scale = std::sqrt(cfg.power);
    const double lipschitz = scale * scale * spectral_norm_squared(op) * 1.01;

    PhaseOneResult out{RangeTable(M), {}};
    out.receivers.reserve(M);
    for (std::size_t m = 0; m < M; ++m)
    {
        ReceiverEstimate est;
        est.lasso = lasso_solve(op, observations[m], scale, params, lipschitz);
        est.support = extract_support(est.lasso.h, M, cfg.L, params.support_tau);
        for (std::size_t u = 0; u < M; ++u)
            out.ranges.at(u, m) = taps_to_ranges(est.support[u], cfg);
        out.receivers.push_back(std::move(est));
    }
    return out;
}

inline RangeTable phase_one(const std::vector<Eigen::VectorXcd> &observations, const SensingDictionary &dict,
                            const LassoParams &params, const OfdmConfig &cfg)
{
    return phase_one_detailed(observations, dict, params, cfg).ranges;
}

/// Writes one JSON record per ordered pair (u, m): range set, support taps and estimated magnitudes.
inline void write_range_records(std::ostream &os, const PhaseOneResult &p1, const OfdmConfig &cfg)
{
    const std::size_t M = p1.ranges.num_bs();
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t u = 0; u < M; ++u)
        {
            nlohmann::json rec;
            rec["tx"] = u + 1;
            rec["rx"] = m + 1;
            const auto r = p1.ranges.at(u, m).values();
            rec["ranges_m"] = std::vector<double>(r.begin(), r.end());
            if (m < p1.receivers.size())
            {
                const auto &est = p1.receivers[m];
                rec["taps"] = est.support[u];
                std::vector<double> mags;
                for (std::size_t l : est.support[u])
                    mags.push_back(std::abs(est.lasso.h[static_cast<Eigen::Index>(u * cfg.L + l - 1)]));
                rec["magnitudes"] = mags;
                rec["lambda"] = est.lasso.lambda;
                rec["iterations"] = est.lasso.iterations;
                rec["converged"] = est.lasso.converged;
            }
            os << rec.dump() << '\n';
        }
}

} // namespace isac
