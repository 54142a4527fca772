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
#include "isac/geometry.hpp"
#include "isac/lasso.hpp"
#include "isac/ofdm.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>

namespace isac {

struct ExperimentSettings
{
    std::size_t trials = 500;    // per K
    std::size_t k_min = 2;
    std::size_t k_max = 6;
    double hit_radius = 0.375;   // meters
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::string output_dir = "out";
    bool record_trials = false;  // write trials.jsonl
    bool record_timing = true;   // false writes mean_cpu_s = 0 for byte-reproducible CSVs
};

struct ExperimentConfig
{
    SceneConfig scene;
    PathConfig paths;
    OfdmConfig ofdm;
    LassoParams lasso;
    AssociationConfig association;
    ExperimentSettings experiment;

    void validate() const
    {
        if (scene.num_bs < 2)
            throw std::invalid_argument("config: [scene] num_bs must be >= 2");
        if (!(scene.area_side > 0.0))
            throw std::invalid_argument("config: [scene] area_side must be positive");
        ofdm.validate();
        lasso.validate();
        association.thresholds.validate();
        if (experiment.trials == 0)
            throw std::invalid_argument("config: [experiment] trials must be >= 1");
        if (experiment.k_min > experiment.k_max)
            throw std::invalid_argument("config: [experiment] k_min exceeds k_max");
        if (!(experiment.hit_radius > 0.0))
            throw std::invalid_argument("config: [experiment] hit_radius must be positive");
        if (experiment.jobs == 0)
            throw std::invalid_argument("config: [experiment] jobs must be >= 1");
    }
};

/// beta = M^2 delta^2: per-term residuals at the range-bin scale over all M^2 terms.
inline double default_beta(std::size_t num_bs, double delta)
{
    const auto m = static_cast<double>(num_bs);
    return m * m * delta * delta;
}

namespace detail {

namespace pt = boost::property_tree;

inline const std::map<std::string, std::set<std::string>> &known_keys()
{
    static const std::map<std::string, std::set<std::string>> keys{
        {"scene", {"num_bs", "area_side", "min_bs_separation", "min_target_separation", "min_target_bs_distance"}},
        {"paths",
         {"los_drop_probability", "nlos_rate", "nlos_bias_min", "nlos_bias_max", "clutter_rate",
          "clutter_length_min", "gain_min", "gain_max", "reflection_loss"}},
        {"ofdm", {"subcarriers", "cp_length", "taps", "subcarrier_spacing_hz", "power", "noise_var", "c0"}},
        {"lasso", {"alpha", "max_iters", "step_tol", "kkt_rel_tol", "support_tau"}},
        {"association",
         {"delta", "beta", "merge_radius", "greedy_selection", "gn_max_iters", "gn_step_tol", "gn_initial_damping"}},
        {"experiment",
         {"trials", "k_min", "k_max", "hit_radius", "seed", "jobs", "output_dir", "record_trials", "record_timing"}},
        {"run", {"version", "master_seed"}}, // written into manifests, ignored on load
    };
    return keys;
}

inline std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Parses the INI-style config. Absent keys keep their defaults; unknown sections or keys are errors.
/// When [association] beta is absent it is derived as num_bs^2 * delta^2.
inline ExperimentConfig parse_config(std::istream &in)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try
    {
        pt::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error &e)
    {
        throw std::runtime_error(std::string("config: ") + e.what());
    }
    const auto &known = detail::known_keys();
    for (const auto &[section, body] : tree)
    {
        const auto it = known.find(section);
        if (it == known.end())
            throw std::runtime_error("config: unknown section [" + section + "]");
        for (const auto &[key, value] : body)
            if (!it->second.count(key))
                throw std::runtime_error("config: unknown key '" + key + "' in [" + section + "]");
    }

    ExperimentConfig c;
    auto get = [&](const char *path, auto fallback) {
        // get(path, default) would silently return the default on a malformed value
        const auto node = tree.get_child_optional(path);
        if (!node)
            return fallback;
        try
        {
            return node->template get_value<decltype(fallback)>();
        }
        catch (const pt::ptree_bad_data &)
        {
            throw std::runtime_error(std::string("config: bad value for ") + path + ": '" + node->data() + "'");
        }
    };
    c.scene.num_bs = get("scene.num_bs", c.scene.num_bs);
    c.scene.area_side = get("scene.area_side", c.scene.area_side);
    c.scene.min_bs_separation = get("scene.min_bs_separation", c.scene.min_bs_separation);
    c.scene.min_target_separation = get("scene.min_target_separation", c.scene.min_target_separation);
    c.scene.min_target_bs_distance = get("scene.min_target_bs_distance", c.scene.min_target_bs_distance);

    c.paths.los_drop_probability = get("paths.los_drop_probability", c.paths.los_drop_probability);
    c.paths.nlos_rate = get("paths.nlos_rate", c.paths.nlos_rate);
    c.paths.nlos_bias_min = get("paths.nlos_bias_min", c.paths.nlos_bias_min);
    c.paths.nlos_bias_max = get("paths.nlos_bias_max", c.paths.nlos_bias_max);
    c.paths.clutter_rate = get("paths.clutter_rate", c.paths.clutter_rate);
    c.paths.clutter_length_min = get("paths.clutter_length_min", c.paths.clutter_length_min);
    c.paths.gain_min = get("paths.gain_min", c.paths.gain_min);
    c.paths.gain_max = get("paths.gain_max", c.paths.gain_max);
    c.paths.reflection_loss = get("paths.reflection_loss", c.paths.reflection_loss);

    c.ofdm.N = get("ofdm.subcarriers", c.ofdm.N);
    c.ofdm.Q = get("ofdm.cp_length", c.ofdm.Q);
    c.ofdm.L = get("ofdm.taps", c.ofdm.L);
    c.ofdm.delta_f = get("ofdm.subcarrier_spacing_hz", c.ofdm.delta_f);
    c.ofdm.power = get("ofdm.power", c.ofdm.power);
    c.ofdm.noise_var = get("ofdm.noise_var", c.ofdm.noise_var);
    c.ofdm.c0 = get("ofdm.c0", c.ofdm.c0);

    c.lasso.alpha = get("lasso.alpha", c.lasso.alpha);
    c.lasso.max_iters = get("lasso.max_iters", c.lasso.max_iters);
    c.lasso.step_tol = get("lasso.step_tol", c.lasso.step_tol);
    c.lasso.kkt_rel_tol = get("lasso.kkt_rel_tol", c.lasso.kkt_rel_tol);
    c.lasso.support_tau = get("lasso.support_tau", c.lasso.support_tau);

    auto &a = c.association;
    a.thresholds.delta = get("association.delta", a.thresholds.delta);
    a.thresholds.beta = get("association.beta", default_beta(c.scene.num_bs, a.thresholds.delta));
    a.merge_radius = get("association.merge_radius", a.merge_radius);
    a.greedy_selection = get("association.greedy_selection", a.greedy_selection);
    a.gauss_newton.max_iters = get("association.gn_max_iters", a.gauss_newton.max_iters);
    a.gauss_newton.step_tol = get("association.gn_step_tol", a.gauss_newton.step_tol);
    a.gauss_newton.initial_damping = get("association.gn_initial_damping", a.gauss_newton.initial_damping);

    auto &e = c.experiment;
    e.trials = get("experiment.trials", e.trials);
    e.k_min = get("experiment.k_min", e.k_min);
    e.k_max = get("experiment.k_max", e.k_max);
    e.hit_radius = get("experiment.hit_radius", e.hit_radius);
    e.seed = get("experiment.seed", e.seed);
    e.jobs = get("experiment.jobs", e.jobs);
    e.output_dir = get("experiment.output_dir", e.output_dir);
    e.record_trials = get("experiment.record_trials", e.record_trials);
    e.record_timing = get("experiment.record_timing", e.record_timing);
    return c;
}

inline ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open '" + path + "'");
    try
    {
        return parse_config(in);
    }
    catch (const std::exception &e)
    {
        throw std::runtime_error(path + ": " + e.what());
    }
}

/// Writes every resolved setting; the output parses back to an identical config.
inline void write_config(std::ostream &os, const ExperimentConfig &c)
{
    using detail::fmt_double;
    const auto b = [](bool v) { return v ? "true" : "false"; };
    os << "[scene]\n"
       << "num_bs = " << c.scene.num_bs << '\n'
       << "area_side = " << fmt_double(c.scene.area_side) << '\n'
       << "min_bs_separation = " << fmt_double(c.scene.min_bs_separation) << '\n'
       << "min_target_separation = " << fmt_double(c.scene.min_target_separation) << '\n'
       << "min_target_bs_distance = " << fmt_double(c.scene.min_target_bs_distance) << "\n\n";
    os << "[paths]\n"
       << "los_drop_probability = " << fmt_double(c.paths.los_drop_probability) << '\n'
       << "nlos_rate = " << fmt_double(c.paths.nlos_rate) << '\n'
       << "nlos_bias_min = " << fmt_double(c.paths.nlos_bias_min) << '\n'
       << "nlos_bias_max = " << fmt_double(c.paths.nlos_bias_max) << '\n'
       << "clutter_rate = " << fmt_double(c.paths.clutter_rate) << '\n'
       << "clutter_length_min = " << fmt_double(c.paths.clutter_length_min) << '\n'
       << "gain_min = " << fmt_double(c.paths.gain_min) << '\n'
       << "gain_max = " << fmt_double(c.paths.gain_max) << '\n'
       << "reflection_loss = " << fmt_double(c.paths.reflection_loss) << "\n\n";
    os << "[ofdm]\n"
       << "subcarriers = " << c.ofdm.N << '\n'
       << "cp_length = " << c.ofdm.Q << '\n'
       << "taps = " << c.ofdm.L << '\n'
       << "subcarrier_spacing_hz = " << fmt_double(c.ofdm.delta_f) << '\n'
       << "power = " << fmt_double(c.ofdm.power) << '\n'
       << "noise_var = " << fmt_double(c.ofdm.noise_var) << '\n'
       << "c0 = " << fmt_double(c.ofdm.c0) << "\n\n";
    os << "[lasso]\n"
       << "alpha = " << fmt_double(c.lasso.alpha) << '\n'
       << "max_iters = " << c.lasso.max_iters << '\n'
       << "step_tol = " << fmt_double(c.lasso.step_tol) << '\n'
       << "kkt_rel_tol = " << fmt_double(c.lasso.kkt_rel_tol) << '\n'
       << "support_tau = " << fmt_double(c.lasso.support_tau) << "\n\n";
    const auto &a = c.association;
    os << "[association]\n"
       << "delta = " << fmt_double(a.thresholds.delta) << '\n'
       << "beta = " << fmt_double(a.thresholds.beta) << '\n'
       << "merge_radius = " << fmt_double(a.merge_radius) << '\n'
       << "greedy_selection = " << b(a.greedy_selection) << '\n'
       << "gn_max_iters = " << a.gauss_newton.max_iters << '\n'
       << "gn_step_tol = " << fmt_double(a.gauss_newton.step_tol) << '\n'
       << "gn_initial_damping = " << fmt_double(a.gauss_newton.initial_damping) << "\n\n";
    const auto &e = c.experiment;
    os << "[experiment]\n"
       << "trials = " << e.trials << '\n'
       << "k_min = " << e.k_min << '\n'
       << "k_max = " << e.k_max << '\n'
       << "hit_radius = " << fmt_double(e.hit_radius) << '\n'
       << "seed = " << e.seed << '\n'
       << "jobs = " << e.jobs << '\n'
       << "output_dir = " << e.output_dir << '\n'
       << "record_trials = " << b(e.record_trials) << '\n'
       << "record_timing = " << b(e.record_timing) << '\n';
}

} // namespace isac
