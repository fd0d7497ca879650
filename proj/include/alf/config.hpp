#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "alf/environments.hpp"

namespace alf {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Components {
    bool sss = true;
    bool dap = true;
    bool fbgo = true;

    bool operator==(const Components&) const = default;
};

/// Name of a symbiosis in ablation tables, e.g. "SSS+FBGO" or "No component".
inline std::string symbiosis_name(const Components& c)
{
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on)
            return;
        if (!out.empty())
            out += '+';
        out += name;
    };
    add(c.sss, "SSS");
    add(c.dap, "DAP");
    add(c.fbgo, "FBGO");
    return out.empty() ? "No component" : out;
}

struct EvolutionConfig {
    // Population (DAP)
    std::size_t p_init = 150;
    std::size_t p_max = 300;
    double ebb = 0.05;
    std::size_t staleness = 15;
    double c3 = 0.4;
    double c4 = 0.5;
    double o_init = 0.1;
    double cull_min_fraction = 0.4;

    // Operators (FBGO)
    double m_o = 0.1;
    std::size_t m_a = 5;
    std::size_t v_max = 5;
    double p_cross = 0.7;
    double p_change = 0.7;
    double p_create = 0.2;
    double p_delete = 0.1;
    double init_weight_range = 1.0;
    double baseline_p_mut = 0.5;  // structural mutation probability with FBGO off

    // Speciation (SSS)
    double c1 = 0.25;
    double c2 = 0.75;
    double delta_t = 0.3;
    double confidence = 0.8;
    std::size_t sample_capacity = 256;
    std::size_t samples_per_generation = 32;
    std::size_t semantic_samples = 64;

    // Run
    std::string environment = "xor";
    std::optional<double> f_t;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    bool allow_recurrent = false;
    Components components;
    std::size_t max_generations = 300;
    double timeout_seconds = 600.0;

    /// Fitness threshold: the override when set, else the environment's.
    double fitness_threshold() const { return f_t ? *f_t : make_environment(environment)->fitness_threshold(); }

    /// Throws ConfigError naming the first offending key.
    void validate() const
    {
        auto fail = [](const std::string& what) { throw ConfigError(what); };
        if (p_init < 2)
            fail("p_init must be at least 2");
        if (p_max < p_init)
            fail("p_max must be at least p_init");
        if (!(ebb >= 0.0 && ebb <= 1.0))
            fail("ebb must lie in [0, 1]");
        if (staleness < 1)
            fail("staleness must be at least 1");
        if (!(c3 >= 0.0) || !(c4 >= 0.0))
            fail("c3 and c4 must be non-negative");
        if (!(o_init >= 0.0 && o_init <= 1.0))
            fail("o_init must lie in [0, 1]");
        if (!(cull_min_fraction >= 0.0 && cull_min_fraction <= 0.5))
            fail("cull_min_fraction must lie in [0, 0.5]");
        if (!(m_o >= 0.0))
            fail("m_o must be non-negative");
        if (m_a < 1)
            fail("m_a must be at least 1");
        if (v_max < 1)
            fail("v_max must be at least 1");
        if (!(p_cross >= 0.0 && p_cross <= 1.0))
            fail("p_cross must lie in [0, 1]");
        if (!(p_change >= 0.0 && p_create >= 0.0 && p_delete >= 0.0) || std::fabs(p_change + p_create + p_delete - 1.0) > 1e-9)
            fail("p_change, p_create and p_delete must be non-negative and sum to 1");
        if (!(baseline_p_mut >= 0.0 && baseline_p_mut <= 1.0))
            fail("baseline_p_mut must lie in [0, 1]");
        if (!(init_weight_range > 0.0))
            fail("init_weight_range must be positive");
        if (!(c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0))
            fail("c1 and c2 must be non-negative with a positive sum");
        if (!(delta_t > 0.0 && delta_t <= 1.0))
            fail("delta_t must lie in (0, 1]");
        if (!(confidence > 0.0 && confidence < 1.0))
            fail("confidence must lie in (0, 1)");
        if (sample_capacity < 30)
            fail("sample_capacity must be at least 30");
        if (semantic_samples < 30 || semantic_samples > sample_capacity)
            fail("semantic_samples must lie in [30, sample_capacity]");
        if (samples_per_generation < 1)
            fail("samples_per_generation must be at least 1");
        try {
            make_environment(environment);
        } catch (const std::invalid_argument& e) {
            fail(std::string("environment: ") + e.what());
        }
        if (f_t && !(*f_t > 0.0))
            fail("f_t must be positive");
        if (workers < 1)
            fail("workers must be at least 1");
        if (max_generations < 1)
            fail("max_generations must be at least 1");
        if (!(timeout_seconds > 0.0))
            fail("timeout_seconds must be positive");
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j{
            {"p_init", p_init},
            {"p_max", p_max},
            {"ebb", ebb},
            {"m_o", m_o},
            {"m_a", m_a},
            {"v_max", v_max},
            {"p_cross", p_cross},
            {"staleness", staleness},
            {"c4", c4},
            {"c3", c3},
            {"o_init", o_init},
            {"c2", c2},
            {"c1", c1},
            {"delta_t", delta_t},
            {"confidence", confidence},
            {"cull_min_fraction", cull_min_fraction},
            {"p_change", p_change},
            {"p_create", p_create},
            {"p_delete", p_delete},
            {"init_weight_range", init_weight_range},
            {"baseline_p_mut", baseline_p_mut},
            {"sample_capacity", sample_capacity},
            {"samples_per_generation", samples_per_generation},
            {"semantic_samples", semantic_samples},
            {"environment", environment},
            {"f_t", f_t ? nlohmann::json(*f_t) : nlohmann::json(nullptr)},
            {"seed", seed},
            {"workers", workers},
            {"allow_recurrent", allow_recurrent},
            {"sss", components.sss},
            {"dap", components.dap},
            {"fbgo", components.fbgo},
            {"max_generations", max_generations},
            {"timeout_seconds", timeout_seconds},
        };
        return j;
    }

    /// Missing keys keep their defaults; unknown keys and type mismatches are rejected.
    static EvolutionConfig from_json(const nlohmann::json& j)
    {
        if (!j.is_object())
            throw ConfigError("config must be a JSON object");
        EvolutionConfig c;
        const nlohmann::json known = c.to_json();
        for (const auto& [key, value] : j.items())
            if (!known.contains(key))
                throw ConfigError("unknown config key '" + key + "'");
        auto read = [&](const char* key, auto& field) {
            if (!j.contains(key))
                return;
            try {
                const auto& v = j.at(key);
                using T = std::decay_t<decltype(field)>;
                if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
                    if (!v.is_number_unsigned())
                        throw ConfigError(std::string(key) + " must be a non-negative integer");
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (!v.is_boolean())
                        throw ConfigError(std::string(key) + " must be a boolean");
                } else if constexpr (std::is_floating_point_v<T>) {
                    if (!v.is_number())
                        throw ConfigError(std::string(key) + " must be a number");
                } else if constexpr (std::is_same_v<T, std::string>) {
                    if (!v.is_string())
                        throw ConfigError(std::string(key) + " must be a string");
                }
                field = v.get<T>();
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string(key) + ": " + e.what());
            }
        };
        read("p_init", c.p_init);
        read("p_max", c.p_max);
        read("ebb", c.ebb);
        read("m_o", c.m_o);
        read("m_a", c.m_a);
        read("v_max", c.v_max);
        read("p_cross", c.p_cross);
        read("staleness", c.staleness);
        read("c4", c.c4);
        read("c3", c.c3);
        read("o_init", c.o_init);
        read("c2", c.c2);
        read("c1", c.c1);
        read("delta_t", c.delta_t);
        read("confidence", c.confidence);
        read("cull_min_fraction", c.cull_min_fraction);
        read("p_change", c.p_change);
        read("p_create", c.p_create);
        read("p_delete", c.p_delete);
        read("init_weight_range", c.init_weight_range);
        read("baseline_p_mut", c.baseline_p_mut);
        read("sample_capacity", c.sample_capacity);
        read("samples_per_generation", c.samples_per_generation);
        read("semantic_samples", c.semantic_samples);
        read("environment", c.environment);
        if (j.contains("f_t") && !j.at("f_t").is_null()) {
            double f = 0.0;
            read("f_t", f);
            c.f_t = f;
        }
        read("seed", c.seed);
        read("workers", c.workers);
        read("allow_recurrent", c.allow_recurrent);
        read("sss", c.components.sss);
        read("dap", c.components.dap);
        read("fbgo", c.components.fbgo);
        read("max_generations", c.max_generations);
        read("timeout_seconds", c.timeout_seconds);
        return c;
    }

    static EvolutionConfig load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot read config " + path.string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
        }
        return from_json(j);
    }
};

/// Parses "sss,dap" style lists. "none" selects the baseline.
inline Components parse_components(const std::string& list)
{
    Components c{false, false, false};
    if (list == "none")
        return c;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        std::size_t end = list.find_first_of(",+", pos);
        if (end == std::string::npos)
            end = list.size();
        std::string item = list.substr(pos, end - pos);
        for (char& ch : item)
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (item == "sss")
            c.sss = true;
        else if (item == "dap")
            c.dap = true;
        else if (item == "fbgo")
            c.fbgo = true;
        else
            throw ConfigError("unknown component '" + item + "'");
        pos = end + 1;
    }
    return c;
}

/// Every subset of {SSS, DAP, FBGO}, in ablation table order.
inline std::vector<Components> all_symbioses()
{
    return {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
            {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true}};
}

}  // namespace alf
