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

#include "isac/localization.hpp"
#include "isac/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace isac {

/// One target's association: for every ordered pair (u, m) a 1-based index into D_{u,m}.
struct AssociationHypothesis
{
    std::size_t num_bs = 0;
    std::vector<std::size_t> indices; // row-major (u, m)

    AssociationHypothesis() = default;
    explicit AssociationHypothesis(std::size_t m) : num_bs(m), indices(m * m, 0) {}

    std::size_t &at(std::size_t u, std::size_t m) { return indices.at(u * num_bs + m); }
    std::size_t at(std::size_t u, std::size_t m) const { return indices.at(u * num_bs + m); }

    friend bool operator==(const AssociationHypothesis &, const AssociationHypothesis &) = default;
    friend auto operator<=>(const AssociationHypothesis &a, const AssociationHypothesis &b)
    {
        return a.indices <=> b.indices;
    }

    /// Two hypotheses conflict when they claim the same range of some ordered pair.
    bool conflicts_with(const AssociationHypothesis &other) const
    {
        for (std::size_t i = 0; i < indices.size(); ++i)
            if (indices[i] == other.indices[i])
                return true;
        return false;
    }
};

/// The measured sum-distances selected by a hypothesis.
inline RangeMatrix hypothesis_ranges(const RangeTable &table, const AssociationHypothesis &hyp)
{
    const std::size_t M = table.num_bs();
    if (hyp.num_bs != M)
        throw std::invalid_argument("hypothesis_ranges: BS count mismatch");
    RangeMatrix r(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    for (std::size_t u = 0; u < M; ++u)
        for (std::size_t m = 0; m < M; ++m)
            r(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(m)) = table.at(u, m)(hyp.at(u, m));
    return r;
}

struct Thresholds
{
    double delta = 0.75; // meters, sum-distance window
    double beta = 9.0;   // meters^2, localization residual bound

    void validate() const
    {
        if (!(delta > 0.0) || !(beta > 0.0))
            throw std::invalid_argument("Thresholds: delta and beta must be positive");
    }
};

struct SensedTarget
{
    AssociationHypothesis hypothesis;
    LocalizationResult fit;
};

struct SensingOutput
{
    std::size_t k_hat = 0;
    std::vector<SensedTarget> targets;

    // diagnostics
    std::size_t num_candidates = 0;
    std::size_t num_filtered = 0;
    std::size_t num_merged = 0;
};

/// Candidate hypotheses satisfying the index-range and both sum-distance constraints.
///
/// The search runs over tuples of monostatic picks (g_{1,1}, ..., g_{M,M}) in lexicographic order,
/// pruning a partial tuple as soon as one ordered pair u != m has no element of D_{u,m} within delta of
/// D_{u,u}/2 + D_{m,m}/2. A feasible tuple yields one hypothesis per combination of in-window bistatic
/// picks, nearest picks first. When a tuple has more than `max_expansion` combinations only the
/// nearest-pick hypothesis is emitted (nearest match, ties to the smaller range).
inline std::vector<AssociationHypothesis> enumerate_candidates(const RangeTable &table, const Thresholds &thr,
                                                               std::size_t max_expansion = 64)
{
    thr.validate();
    const std::size_t M = table.num_bs();
    std::vector<AssociationHypothesis> out;
    if (M == 0)
        return out;
    for (std::size_t m = 0; m < M; ++m)
        if (table.at(m, m).empty())
            return out;

    // in-window picks of every ordered pair, nearest first
    std::vector<std::vector<std::size_t>> picks(M * M);
    auto window = [&](const RangeSet &set, double expected, std::vector<std::size_t> &dst) {
        dst.clear();
        const auto v = set.values();
        const auto lo = std::lower_bound(v.begin(), v.end(), expected - thr.delta);
        for (auto it = lo; it != v.end() && *it <= expected + thr.delta; ++it)
            if (std::abs(*it - expected) <= thr.delta)
                dst.push_back(static_cast<std::size_t>(it - v.begin()) + 1);
        std::stable_sort(dst.begin(), dst.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(set(a) - expected) < std::abs(set(b) - expected);
        });
        return !dst.empty();
    };

    AssociationHypothesis cur(M);
    auto emit = [&] {
        std::size_t combos = 1;
        std::vector<std::size_t> pairs;
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t m = 0; m < M; ++m)
                if (u != m)
                {
                    pairs.push_back(u * M + m);
                    combos = std::min(combos * picks[u * M + m].size(), max_expansion + 1);
                }
        if (combos > max_expansion)
        {
            for (std::size_t p : pairs)
                cur.indices[p] = picks[p].front();
            out.push_back(cur);
            return;
        }
        // odometer over the in-window picks; the last pair varies fastest
        std::vector<std::size_t> pos(pairs.size(), 0);
        for (;;)
        {
            for (std::size_t i = 0; i < pairs.size(); ++i)
                cur.indices[pairs[i]] = picks[pairs[i]][pos[i]];
            out.push_back(cur);
            std::size_t i = pairs.size();
            while (i > 0)
            {
                --i;
                if (++pos[i] < picks[pairs[i]].size())
                    break;
                pos[i] = 0;
                if (i == 0)
                    return;
            }
            if (pairs.empty())
                return;
        }
    };

    auto recurse = [&](auto &&self, std::size_t m) -> void {
        if (m == M)
        {
            emit();
            return;
        }
        const RangeSet &mono = table.at(m, m);
        for (std::size_t g = 1; g <= mono.size(); ++g)
        {
            cur.at(m, m) = g;
            const double half_m = mono(g) / 2.0;
            bool ok = true;
            for (std::size_t u = 0; u < m && ok; ++u)
            {
                const double expected = table.at(u, u)(cur.at(u, u)) / 2.0 + half_m;
                ok = window(table.at(u, m), expected, picks[u * M + m]) &&
                     window(table.at(m, u), expected, picks[m * M + u]);
            }
            if (ok)
                self(self, m + 1);
        }
        cur.at(m, m) = 0;
    };
    recurse(recurse, 0);
    return out;
}

/// Localizes every candidate (linear init + Gauss-Newton) and keeps those with residual <= beta.
inline std::vector<SensedTarget> filter_by_residual(const std::vector<AssociationHypothesis> &candidates,
                                                    std::span<const Point2D> bs, const RangeTable &table,
                                                    const Thresholds &thr, double area_side,
                                                    const GaussNewtonConfig &gn = {})
{
    thr.validate();
    std::vector<SensedTarget> out;
    for (const auto &hyp : candidates)
    {
        const RangeMatrix r = hypothesis_ranges(table, hyp);
        const Point2D init = initial_position(bs, r, area_side);
        const LocalizationResult fit = gauss_newton_localize(bs, r, init, gn);
        if (fit.residual <= thr.beta)
            out.push_back({hyp, fit});
    }
    return out;
}

/// Drops non-conflicting hypotheses that localize within `radius` of a better-fitting one.
inline std::vector<SensedTarget> merge_duplicates(std::vector<SensedTarget> filtered, double radius = 0.1)
{
    std::stable_sort(filtered.begin(), filtered.end(), [](const SensedTarget &a, const SensedTarget &b) {
        if (a.fit.residual != b.fit.residual)
            return a.fit.residual < b.fit.residual;
        return a.hypothesis < b.hypothesis;
    });
    std::vector<SensedTarget> kept;
    for (auto &t : filtered)
    {
        bool dup = false;
        for (const auto &k : kept)
            if (!t.hypothesis.conflicts_with(k.hypothesis) && distance(t.fit.position, k.fit.position) <= radius)
            {
                dup = true;
                break;
            }
        if (!dup)
            kept.push_back(std::move(t));
    }
    return kept;
}

namespace detail {

/// Small dynamic bitset for the selection search.
class Bits
{
  public:
    explicit Bits(std::size_t n = 0) : n_(n), w_((n + 63) / 64, 0) {}
    void set(std::size_t i) { w_[i / 64] |= std::uint64_t{1} << (i % 64); }
    void reset(std::size_t i) { w_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
    bool test(std::size_t i) const { return (w_[i / 64] >> (i % 64)) & 1U; }
    std::size_t count() const
    {
        std::size_t c = 0;
        for (auto w : w_)
            c += static_cast<std::size_t>(__builtin_popcountll(w));
        return c;
    }
    bool none() const
    {
        return std::all_of(w_.begin(), w_.end(), [](std::uint64_t w) { return w == 0; });
    }
    Bits and_not(const Bits &o) const
    {
        Bits r(n_);
        for (std::size_t i = 0; i < w_.size(); ++i)
            r.w_[i] = w_[i] & ~o.w_[i];
        return r;
    }
    std::size_t count_and(const Bits &o) const
    {
        std::size_t c = 0;
        for (std::size_t i = 0; i < w_.size(); ++i)
            c += static_cast<std::size_t>(__builtin_popcountll(w_[i] & o.w_[i]));
        return c;
    }
    std::size_t size() const noexcept { return n_; }

  private:
    std::size_t n_;
    std::vector<std::uint64_t> w_;
};

struct Selection
{
    std::vector<std::size_t> members; // ascending
    double residual = 0.0;
};

/// Lexicographic preference: more members, then smaller total residual, then smaller member list.
inline bool better(const Selection &a, const Selection &b)
{
    if (a.members.size() != b.members.size())
        return a.members.size() > b.members.size();
    if (a.residual != b.residual)
        return a.residual < b.residual;
    return a.members < b.members;
}

} // namespace detail

/// Maximum set of pairwise non-conflicting hypotheses; ties go to the smallest total residual.
///
/// Exact branch-and-bound over the conflict graph, branching on the candidate of highest remaining
/// degree and bounding by |chosen| + |remaining|. With `greedy` set, hypotheses are taken in order of
/// ascending residual instead.
inline SensingOutput select_max_disjoint(const std::vector<SensedTarget> &filtered, bool greedy = false)
{
    const std::size_t n = filtered.size();
    SensingOutput out;
    if (n == 0)
        return out;

    std::vector<detail::Bits> adj(n, detail::Bits(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (filtered[i].hypothesis.conflicts_with(filtered[j].hypothesis))
            {
                adj[i].set(j);
                adj[j].set(i);
            }

    detail::Selection best;
    if (greedy)
    {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return filtered[a].fit.residual < filtered[b].fit.residual;
        });
        detail::Bits blocked(n);
        for (std::size_t i : order)
        {
            if (blocked.test(i))
                continue;
            best.members.push_back(i);
            best.residual += filtered[i].fit.residual;
            for (std::size_t j = 0; j < n; ++j)
                if (adj[i].test(j))
                    blocked.set(j);
        }
        std::sort(best.members.begin(), best.members.end());
    }
    else
    {
        detail::Selection cur;
        bool have_best = false;
        detail::Bits all(n);
        for (std::size_t i = 0; i < n; ++i)
            all.set(i);

        auto search = [&](auto &&self, const detail::Bits &cand) -> void {
            const std::size_t remaining = cand.count();
            if (have_best)
            {
                const std::size_t bound = cur.members.size() + remaining;
                if (bound < best.members.size())
                    return;
                // residuals are non-negative, so adding members cannot lower the total
                if (bound == best.members.size() && cur.residual > best.residual)
                    return;
            }
            if (remaining == 0)
            {
                detail::Selection s = cur;
                std::sort(s.members.begin(), s.members.end());
                if (!have_best || detail::better(s, best))
                {
                    best = std::move(s);
                    have_best = true;
                }
                return;
            }
            // branch on the remaining vertex of highest degree within cand (lowest index on ties)
            std::size_t v = n;
            std::size_t vdeg = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (cand.test(i))
                {
                    const std::size_t dg = adj[i].count_and(cand);
                    if (v == n || dg > vdeg)
                    {
                        v = i;
                        vdeg = dg;
                    }
                }
            detail::Bits next = cand.and_not(adj[v]);
            next.reset(v);
            cur.members.push_back(v);
            cur.residual += filtered[v].fit.residual;
            self(self, next);
            cur.members.pop_back();
            cur.residual -= filtered[v].fit.residual;
            if (vdeg == 0)
                return; // an isolated vertex belongs to every maximum set
            detail::Bits without = cand;
            without.reset(v);
            self(self, without);
        };
        search(search, all);
    }

    for (std::size_t i : best.members)
        out.targets.push_back(filtered[i]);
    out.k_hat = out.targets.size();
    return out;
}

struct AssociationConfig
{
    Thresholds thresholds;
    GaussNewtonConfig gauss_newton;
    double merge_radius = 0.1; // meters
    bool greedy_selection = false;
};

/// Full Phase II: candidates -> residual filter -> duplicate merge -> maximum disjoint selection.
inline SensingOutput localize_all(const RangeTable &table, std::span<const Point2D> bs, double area_side,
                                  const AssociationConfig &cfg = {})
{
    if (table.num_bs() != bs.size())
        throw std::invalid_argument("localize_all: range table and BS list disagree on M");
    const auto candidates = enumerate_candidates(table, cfg.thresholds);
    auto filtered = filter_by_residual(candidates, bs, table, cfg.thresholds, area_side, cfg.gauss_newton);
    const std::size_t num_filtered = filtered.size();
    auto merged = merge_duplicates(std::move(filtered), cfg.merge_radius);
    SensingOutput out = select_max_disjoint(merged, cfg.greedy_selection);
    out.num_candidates = candidates.size();
    out.num_filtered = num_filtered;
    out.num_merged = num_filtered - merged.size();
    return out;
}

} // namespace isac
