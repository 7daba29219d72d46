/*
   Copyright 2026 The levelcross Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

/**
 * @file config.hpp
 * @brief YAML run configuration: parsing with defaults, validation, and
 * serialization of the resolved form.
 */

#pragma once

#include "levelcross/covariance.hpp"
#include "levelcross/errors.hpp"
#include "levelcross/experiments.hpp"
#include "levelcross/rice.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace levelcross::app {

struct ModelConfig {
    std::string family = "gaussian";
    std::vector<double> params;
    std::optional<double> d;  // Taylor override; both or neither
    std::optional<double> e;
    bool operator==(const ModelConfig&) const = default;

    CovarianceModel build() const {
        if (d.has_value() != e.has_value()) throw ConfigurationError("model: d and e must be given together");
        std::optional<TaylorCoefficients> de;
        if (d) de = TaylorCoefficients{*d, *e};
        return CovarianceModel::from_family(family, params, de);
    }
};

struct Bound {
    std::optional<double> min;
    std::optional<double> max;
    bool operator==(const Bound&) const = default;
    bool contains(double v) const { return (!min || v >= *min) && (!max || v <= *max); }
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ratio;
    std::vector<double> T_list{20.0};
    std::vector<double> u_list{2.0, 3.0, 4.0};
    double T = 2000.0;
    double gamma = 0.6;
    double b = 0.14;
    double c = 0.05;
    double mu = 10.0;
    double ell = 2.0;
    double level = 3.0;
    bool ladder = false;
    double ladder_T_low = 200.0;
    std::size_t ladder_repetitions = 20;
    std::size_t ladder_replicas = 500;
    std::map<std::string, Bound> thresholds;
    bool operator==(const ExperimentConfig&) const = default;
};

struct SimulationConfig {
    double dt = 0.0;  // 0 selects default_dt(u)
    std::size_t replicas = 2000;
    std::uint64_t seed = 1;
    bool operator==(const SimulationConfig&) const = default;
};

struct OutputConfig {
    std::string directory = "out";
    std::vector<std::string> formats{"csv", "json"};
    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    ModelConfig model;
    ExperimentConfig experiment;
    QuadratureConfig quadrature;
    SimulationConfig simulation;
    OutputConfig output;
    bool operator==(const RunConfig&) const = default;
};

/// Acceptance bounds used when the config names none for a statistic.
inline std::map<std::string, Bound> default_thresholds(ExperimentKind kind, bool ladder = false) {
    switch (kind) {
        case ExperimentKind::ratio: return {{"max_ratio_zscore", {std::nullopt, 3.0}}};
        case ExperimentKind::clt: {
            std::map<std::string, Bound> t{
                {"ks_p_value", {0.01, std::nullopt}}, {"variance", {0.9, 1.1}}, {"skewness", {-0.2, 0.2}}};
            if (ladder) t["ladder_median_gain"] = {0.0, std::nullopt};
            return t;
        }
        case ExperimentKind::blocks: return {{"small_block_mass", {std::nullopt, 0.1}}};
        case ExperimentKind::poisson: return {{"tv_distance", {std::nullopt, 0.05}}};
    }
    return {};
}

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string where(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    return m.line >= 0 ? " (line " + std::to_string(m.line + 1) + ")" : "";
}

inline void reject_unknown(const YAML::Node& map, const std::string& section, const std::set<std::string>& allowed) {
    if (!map) return;
    if (!map.IsMap()) throw ConfigurationError(section + ": expected a mapping" + where(map));
    for (const auto& kv : map) {
        const std::string key = kv.first.as<std::string>();
        if (allowed.count(key)) continue;
        std::string best;
        std::size_t best_d = 3;
        for (const auto& cand : allowed) {
            const std::size_t d = edit_distance(key, cand);
            if (d < best_d) {
                best_d = d;
                best = cand;
            }
        }
        std::string msg = "unknown key '" + (section.empty() ? key : section + "." + key) + "'" + where(kv.first);
        if (!best.empty()) msg += "; did you mean '" + best + "'?";
        throw ConfigurationError(msg);
    }
}

template <class T>
void read(const YAML::Node& map, const char* key, T& out, const std::string& section) {
    const YAML::Node n = map[key];
    if (!n) return;
    try {
        out = n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigurationError(section + "." + key + ": invalid value" + where(n));
    }
}

inline void read_list(const YAML::Node& map, const char* key, std::vector<double>& out, const std::string& section) {
    const YAML::Node n = map[key];
    if (!n) return;
    try {
        if (n.IsSequence())
            out = n.as<std::vector<double>>();
        else
            out = {n.as<double>()};
    } catch (const YAML::Exception&) {
        throw ConfigurationError(section + "." + key + ": expected a number or a list of numbers" + where(n));
    }
}

inline ExperimentKind parse_kind(const std::string& s) {
    if (s == "ratio") return ExperimentKind::ratio;
    if (s == "clt") return ExperimentKind::clt;
    if (s == "blocks") return ExperimentKind::blocks;
    if (s == "poisson") return ExperimentKind::poisson;
    throw ConfigurationError("experiment.kind: unknown kind '" + s + "' (known: ratio, clt, blocks, poisson)");
}

}  // namespace detail

/// Checks constraints owned by other modules so that bad configs fail before
/// any work starts.
inline void validate(const RunConfig& c) {
    (void)c.model.build();
    c.quadrature.validate();
    const ExperimentConfig& x = c.experiment;
    if (!(c.simulation.dt >= 0.0)) throw ConfigurationError("simulation.dt must be >= 0");
    if (c.simulation.replicas < 100) throw ConfigurationError("simulation.replicas must be >= 100");
    switch (x.kind) {
        case ExperimentKind::ratio:
            if (x.T_list.empty() || x.u_list.empty())
                throw ConfigurationError("experiment: T_list and u_list must be nonempty");
            break;
        case ExperimentKind::clt:
            (void)level_schedule(x.T, x.gamma);
            if (c.simulation.replicas < 500) throw ConfigurationError("clt: simulation.replicas must be >= 500");
            if (x.ladder) {
                (void)level_schedule(x.ladder_T_low, x.gamma);
                if (x.ladder_replicas < 500) throw ConfigurationError("clt: ladder_replicas must be >= 500");
                if (x.ladder_repetitions == 0) throw ConfigurationError("clt: ladder_repetitions must be > 0");
            }
            break;
        case ExperimentKind::blocks:
            validate_block_exponents(x.gamma, x.b, x.c, x.mu);
            (void)level_schedule(x.T, x.gamma);
            break;
        case ExperimentKind::poisson:
            if (!(x.ell > 0.0)) throw ConfigurationError("experiment.ell must be positive");
            break;
    }
    for (const auto& f : c.output.formats)
        if (f != "csv" && f != "json") throw ConfigurationError("output.formats: unknown format '" + f + "'");
}

namespace detail {

inline RunConfig parse_config_impl(const std::string& text, std::optional<ExperimentKind> kind) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigurationError("config syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    RunConfig c;
    if (!root || root.IsNull()) {
        if (kind) c.experiment.kind = *kind;
        c.experiment.thresholds = default_thresholds(c.experiment.kind);
        validate(c);
        return c;
    }
    reject_unknown(root, "", {"model", "experiment", "quadrature", "simulation", "output"});

    if (const YAML::Node m = root["model"]) {
        if (m.IsScalar()) {
            c.model.family = m.as<std::string>();
        } else {
            reject_unknown(m, "model", {"family", "params", "d", "e"});
            read(m, "family", c.model.family, "model");
            read_list(m, "params", c.model.params, "model");
            if (m["d"]) c.model.d = m["d"].as<double>();
            if (m["e"]) c.model.e = m["e"].as<double>();
        }
    }

    bool thresholds_given = false;
    if (kind) c.experiment.kind = *kind;
    if (const YAML::Node x = root["experiment"]) {
        const std::string s = "experiment";
        reject_unknown(x, s,
                               {"kind", "T_list", "u_list", "T", "gamma", "b", "c", "mu", "ell", "level", "ladder",
                                "ladder_T_low", "ladder_repetitions", "ladder_replicas", "thresholds"});
        auto& e = c.experiment;
        if (x["kind"]) {
            e.kind = parse_kind(x["kind"].as<std::string>());
            if (kind && *kind != e.kind)
                throw ConfigurationError("experiment.kind '" + to_string(e.kind) + "' does not match the requested '" +
                                         to_string(*kind) + "'" + where(x["kind"]));
        } else if (kind) {
            e.kind = *kind;
        }
        read_list(x, "T_list", e.T_list, s);
        read_list(x, "u_list", e.u_list, s);
        read(x, "T", e.T, s);
        read(x, "gamma", e.gamma, s);
        read(x, "b", e.b, s);
        read(x, "c", e.c, s);
        read(x, "mu", e.mu, s);
        read(x, "ell", e.ell, s);
        read(x, "level", e.level, s);
        read(x, "ladder", e.ladder, s);
        read(x, "ladder_T_low", e.ladder_T_low, s);
        read(x, "ladder_repetitions", e.ladder_repetitions, s);
        read(x, "ladder_replicas", e.ladder_replicas, s);
        if (const YAML::Node t = x["thresholds"]) {
            if (!t.IsMap()) throw ConfigurationError("experiment.thresholds: expected a mapping" + where(t));
            thresholds_given = true;
            for (const auto& kv : t) {
                const std::string name = kv.first.as<std::string>();
                reject_unknown(kv.second, "experiment.thresholds." + name, {"min", "max"});
                Bound bd;
                if (kv.second["min"]) bd.min = kv.second["min"].as<double>();
                if (kv.second["max"]) bd.max = kv.second["max"].as<double>();
                e.thresholds[name] = bd;
            }
        }
    }
    if (!thresholds_given) c.experiment.thresholds = default_thresholds(c.experiment.kind, c.experiment.ladder);

    if (const YAML::Node q = root["quadrature"]) {
        const std::string s = "quadrature";
        reject_unknown(q, s, {"hermite_nodes_2d", "hermite_nodes_3d", "tau_min", "diag_cutoff", "rel_tol"});
        read(q, "hermite_nodes_2d", c.quadrature.hermite_nodes_2d, s);
        read(q, "hermite_nodes_3d", c.quadrature.hermite_nodes_3d, s);
        read(q, "tau_min", c.quadrature.tau_min, s);
        read(q, "diag_cutoff", c.quadrature.diag_cutoff, s);
        read(q, "rel_tol", c.quadrature.rel_tol, s);
    }
    if (const YAML::Node m = root["simulation"]) {
        const std::string s = "simulation";
        reject_unknown(m, s, {"dt", "replicas", "seed"});
        read(m, "dt", c.simulation.dt, s);
        read(m, "replicas", c.simulation.replicas, s);
        read(m, "seed", c.simulation.seed, s);
    }
    if (const YAML::Node o = root["output"]) {
        const std::string s = "output";
        reject_unknown(o, s, {"directory", "formats"});
        read(o, "directory", c.output.directory, s);
        if (const YAML::Node f = o["formats"]) c.output.formats = f.as<std::vector<std::string>>();
    }
    validate(c);
    return c;
}

}  // namespace detail

/// Parses a YAML document. Missing fields take defaults; unknown keys,
/// malformed values and constraint violations throw ConfigurationError or
/// the owning module's error.
inline RunConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind = std::nullopt) {
    try {
        return detail::parse_config_impl(text, kind);
    } catch (const YAML::ParserException& e) {
        throw ConfigurationError("config syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    } catch (const YAML::Exception& e) {
        throw ConfigurationError("config error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

/// Resolved config as YAML; parse_config(serialize(c)) == c.
inline std::string serialize(const RunConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "family" << YAML::Value << c.model.family;
    out << YAML::Key << "params" << YAML::Value << YAML::Flow << c.model.params;
    if (c.model.d) out << YAML::Key << "d" << YAML::Value << *c.model.d;
    if (c.model.e) out << YAML::Key << "e" << YAML::Value << *c.model.e;
    out << YAML::EndMap;

    const ExperimentConfig& x = c.experiment;
    out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(x.kind);
    out << YAML::Key << "T_list" << YAML::Value << YAML::Flow << x.T_list;
    out << YAML::Key << "u_list" << YAML::Value << YAML::Flow << x.u_list;
    out << YAML::Key << "T" << YAML::Value << x.T;
    out << YAML::Key << "gamma" << YAML::Value << x.gamma;
    out << YAML::Key << "b" << YAML::Value << x.b;
    out << YAML::Key << "c" << YAML::Value << x.c;
    out << YAML::Key << "mu" << YAML::Value << x.mu;
    out << YAML::Key << "ell" << YAML::Value << x.ell;
    out << YAML::Key << "level" << YAML::Value << x.level;
    out << YAML::Key << "ladder" << YAML::Value << x.ladder;
    out << YAML::Key << "ladder_T_low" << YAML::Value << x.ladder_T_low;
    out << YAML::Key << "ladder_repetitions" << YAML::Value << x.ladder_repetitions;
    out << YAML::Key << "ladder_replicas" << YAML::Value << x.ladder_replicas;
    out << YAML::Key << "thresholds" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, bd] : x.thresholds) {
        out << YAML::Key << name << YAML::Value << YAML::BeginMap;
        if (bd.min) out << YAML::Key << "min" << YAML::Value << *bd.min;
        if (bd.max) out << YAML::Key << "max" << YAML::Value << *bd.max;
        out << YAML::EndMap;
    }
    out << YAML::EndMap << YAML::EndMap;

    out << YAML::Key << "quadrature" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "hermite_nodes_2d" << YAML::Value << c.quadrature.hermite_nodes_2d;
    out << YAML::Key << "hermite_nodes_3d" << YAML::Value << c.quadrature.hermite_nodes_3d;
    out << YAML::Key << "tau_min" << YAML::Value << c.quadrature.tau_min;
    out << YAML::Key << "diag_cutoff" << YAML::Value << c.quadrature.diag_cutoff;
    out << YAML::Key << "rel_tol" << YAML::Value << c.quadrature.rel_tol;
    out << YAML::EndMap;

    out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dt" << YAML::Value << c.simulation.dt;
    out << YAML::Key << "replicas" << YAML::Value << c.simulation.replicas;
    out << YAML::Key << "seed" << YAML::Value << c.simulation.seed;
    out << YAML::EndMap;

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "directory" << YAML::Value << c.output.directory;
    out << YAML::Key << "formats" << YAML::Value << YAML::Flow << c.output.formats;
    out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace levelcross::app
