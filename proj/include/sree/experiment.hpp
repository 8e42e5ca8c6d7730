// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "asymptotics.hpp"
#include "channel.hpp"
#include "individual.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "pareto.hpp"
#include "system_params.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sree
{
    inline constexpr std::string_view code_version = "1.0.0";

    using json = nlohmann::json;

    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Every key the config format accepts, with its default. dB quantities carry _db / _dbm suffixes.
    inline json default_config_json()
    {
        return json::parse(R"({
  "kind": "individual",
  "seed": 1,
  "description": "",
  "system": {
    "bandwidth_hz": 1e6,
    "spreading_factor": 128,
    "reflection_efficiency": 1.0,
    "amplifier_inefficiency": 1.2,
    "circuit_power_dbm": 39.0,
    "element_power_dbm": 10.0,
    "max_power_dbm": 40.0,
    "noise_power_dbm": -114.0,
    "antennas": 4,
    "elements": 64
  },
  "geometry": {
    "d0_m": 300.0,
    "theta_deg": 20.0,
    "h_pt_m": 50.0,
    "h_ris_m": 30.0,
    "fc_hz": 3.5e9,
    "alpha_tr": 2.7,
    "alpha_ts": 2.7,
    "alpha_sr": 2.1
  },
  "channel": {
    "k1_db": 2.0,
    "k2_db": 10.0,
    "k3_db": null,
    "rayleigh": false,
    "corr_ts": {"kind": "identity", "r": 0.0},
    "corr_sr": {"kind": "identity", "r": 0.0},
    "ris_nx": 0,
    "ris_nz": 0
  },
  "individual": {
    "n_trials": 1,
    "kappa": 1e-4,
    "max_iter": 500,
    "restarts": 5,
    "T": 10000
  },
  "asymptotic": {
    "model": "pt",
    "sweep": "M",
    "grid": [8, 16, 32, 64, 128, 256],
    "max_power_dbm": [24.0, 26.0, 28.0, 30.0],
    "monte_carlo_trials": 0
  },
  "pareto": {
    "alpha_grid": [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95],
    "epsilon_bisect": 1e-3,
    "kappa1": 1e-5,
    "kappa2": 1e-5,
    "kappa3": 1e-4,
    "T": 200,
    "report_T": 10000,
    "sample_seed": null,
    "n_trials": 1,
    "benchmark": true,
    "max_depth": 40
  },
  "sweep": {
    "parameter": "none",
    "values": []
  },
  "output": {
    "dir": "out"
  }
})");
    }

    namespace detail
    {
        inline bool unsigned_key(const std::string &path) { return path == "/seed" || path == "/pareto/sample_seed"; }

        /// Line of the last path component, found by walking the keys in order through the source text.
        inline int locate_line(std::string_view text, const std::vector<std::string> &keys)
        {
            std::size_t pos = 0;
            for (const auto &k : keys)
            {
                const std::size_t hit = text.find("\"" + k + "\"", pos);
                if (hit == std::string_view::npos)
                    return 0;
                pos = hit + 1;
            }
            if (keys.empty())
                return 0;
            return 1 + int(std::count(text.begin(), text.begin() + std::ptrdiff_t(pos), '\n'));
        }

        inline std::string join_path(const std::vector<std::string> &keys)
        {
            std::string out;
            for (const auto &k : keys)
                out += "/" + k;
            return out.empty() ? "/" : out;
        }

        [[noreturn]] inline void config_fail(std::string_view text, const std::vector<std::string> &keys,
                                             const std::string &what)
        {
            const int line = locate_line(text, keys);
            std::string msg = "config";
            if (line > 0)
                msg += " line " + std::to_string(line);
            throw ConfigError(msg + ": " + join_path(keys) + ": " + what);
        }

        inline std::string type_name(const json &v)
        {
            if (v.is_number_integer())
                return "integer";
            if (v.is_number())
                return "number";
            if (v.is_boolean())
                return "boolean";
            if (v.is_string())
                return "string";
            if (v.is_array())
                return "array";
            if (v.is_object())
                return "object";
            return "null";
        }

        inline bool same_kind(const json &def, const json &v)
        {
            if (def.is_number_integer())
                return v.is_number_integer();
            if (def.is_number())
                return v.is_number();
            if (def.is_boolean())
                return v.is_boolean();
            if (def.is_string())
                return v.is_string();
            return false;
        }

        inline void check_value(std::string_view text, const std::vector<std::string> &keys, const json &def,
                                const json &v)
        {
            const std::string path = join_path(keys);
            if (def.is_null())
            {
                if (v.is_null())
                    return;
                if (unsigned_key(path) ? !v.is_number_unsigned() : !v.is_number())
                    config_fail(text, keys, std::string("expected ") + (unsigned_key(path) ? "a non-negative integer" : "a number") +
                                                " or null, got " + type_name(v));
                return;
            }
            if (def.is_array())
            {
                if (!v.is_array())
                    config_fail(text, keys, "expected an array, got " + type_name(v));
                const bool ints = !def.empty() && def.front().is_number_integer();
                for (const auto &e : v)
                    if (ints ? !e.is_number_integer() : !e.is_number())
                        config_fail(text, keys, std::string("array elements must be ") + (ints ? "integers" : "numbers"));
                return;
            }
            if (!same_kind(def, v))
                config_fail(text, keys, "expected " + type_name(def) + ", got " + type_name(v));
            if (unsigned_key(path) && !v.is_number_unsigned())
                config_fail(text, keys, "expected a non-negative integer");
        }

        inline void merge_checked(std::string_view text, json &base, const json &user, std::vector<std::string> &keys)
        {
            if (!user.is_object())
                config_fail(text, keys, "expected an object, got " + type_name(user));
            for (auto it = user.begin(); it != user.end(); ++it)
            {
                keys.push_back(it.key());
                const std::string path = join_path(keys);
                if (path == "/system/circuit_power_w")
                {
                    if (user.contains("circuit_power_dbm"))
                        config_fail(text, keys, "circuit_power_w and circuit_power_dbm are mutually exclusive");
                    if (!it.value().is_number())
                        config_fail(text, keys, "expected number, got " + type_name(it.value()));
                    base.erase("circuit_power_dbm");
                    base["circuit_power_w"] = it.value();
                }
                else if (!base.contains(it.key()))
                    config_fail(text, keys, "unknown key");
                else if (base[it.key()].is_object())
                    merge_checked(text, base[it.key()], it.value(), keys);
                else
                {
                    check_value(text, keys, base[it.key()], it.value());
                    base[it.key()] = it.value();
                }
                keys.pop_back();
            }
        }

        inline std::uint64_t fnv1a(std::string_view s)
        {
            std::uint64_t h = 0xcbf29ce484222325ull;
            for (unsigned char c : s)
            {
                h ^= c;
                h *= 0x100000001b3ull;
            }
            return h;
        }

        inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag)
        {
            std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            return z ^ (z >> 31);
        }
    }

    /// One fully-resolved system: scalar constants, geometry and fading model.
    struct Scenario
    {
        SystemParams params;
        Geometry geometry;
        ChannelConfig channel;
        double sweep_value = std::numeric_limits<double>::quiet_NaN();
    };

    struct IndividualSettings
    {
        int n_trials = 1;
        AoOptions ao;
        std::size_t T = 10000;
    };

    struct AsymptoticSettings
    {
        std::string model = "pt"; // pt | ris_siso | ris_miso
        std::string sweep = "M";  // M | N
        std::vector<int> grid;
        std::vector<double> max_power_dbm;
        std::size_t monte_carlo_trials = 0;
    };

    struct ParetoSettings
    {
        std::vector<double> alpha_grid;
        ParetoQuery query;
        std::optional<std::uint64_t> sample_seed;
        int n_trials = 1;
        bool benchmark = true;
    };

    struct CliOverrides
    {
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out_dir;
        std::optional<std::vector<double>> alpha_grid;
    };

    struct ExperimentConfig
    {
        std::string kind;
        std::uint64_t seed = 1;
        json effective; // defaults merged with the file and the overrides
        std::string sweep_parameter = "none";
        std::vector<Scenario> scenarios; // one per sweep value
        IndividualSettings individual;
        AsymptoticSettings asymptotic;
        ParetoSettings pareto;
        std::string out_dir = "out";

        /// FNV-1a over the canonical effective config, output location excluded.
        std::string hash() const
        {
            json h = effective;
            h.erase("output");
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(h.dump())));
            return buf;
        }
    };

    inline const std::vector<std::string> &sweep_parameters()
    {
        static const std::vector<std::string> names{"none", "theta_deg", "circuit_power_dbm", "circuit_power_w",
                                                    "max_power_dbm", "element_power_dbm", "antennas", "elements"};
        return names;
    }

    namespace detail
    {
        inline Correlation parse_correlation(std::string_view text, const json &j, const std::string &key)
        {
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "identity")
                return Correlation::identity();
            if (kind == "exponential")
            {
                const double r = j.at("r").get<double>();
                if (!(r >= 0.0 && r < 1.0))
                    config_fail(text, {"channel", key, "r"}, "must lie in [0, 1)");
                return Correlation::exponential(r);
            }
            config_fail(text, {"channel", key, "kind"}, "expected \"identity\" or \"exponential\"");
        }

        inline Scenario build_scenario(std::string_view text, const json &e)
        {
            Scenario sc;
            const json &sys = e.at("system");
            SystemParams &p = sc.params;
            p.bandwidth_hz = sys.at("bandwidth_hz").get<double>();
            p.spreading_factor = sys.at("spreading_factor").get<int>();
            p.reflection_efficiency = sys.at("reflection_efficiency").get<double>();
            p.amplifier_inefficiency = sys.at("amplifier_inefficiency").get<double>();
            p.circuit_power_w = sys.contains("circuit_power_w") ? sys.at("circuit_power_w").get<double>()
                                                                : dbm_to_watt(sys.at("circuit_power_dbm").get<double>());
            p.element_power_w = dbm_to_watt(sys.at("element_power_dbm").get<double>());
            p.max_power_w = dbm_to_watt(sys.at("max_power_dbm").get<double>());
            p.noise_power_w = dbm_to_watt(sys.at("noise_power_dbm").get<double>());
            p.antennas = sys.at("antennas").get<int>();
            p.elements = sys.at("elements").get<int>();
            try
            {
                p.validate();
            }
            catch (const std::invalid_argument &err)
            {
                config_fail(text, {"system"}, err.what());
            }

            const json &geo = e.at("geometry");
            Geometry &g = sc.geometry;
            g.d0 = geo.at("d0_m").get<double>();
            g.theta = geo.at("theta_deg").get<double>() * std::numbers::pi / 180.0;
            g.h_pt = geo.at("h_pt_m").get<double>();
            g.h_ris = geo.at("h_ris_m").get<double>();
            g.fc = geo.at("fc_hz").get<double>();
            g.alpha_tr = geo.at("alpha_tr").get<double>();
            g.alpha_ts = geo.at("alpha_ts").get<double>();
            g.alpha_sr = geo.at("alpha_sr").get<double>();
            try
            {
                g.validate();
            }
            catch (const std::invalid_argument &err)
            {
                config_fail(text, {"geometry"}, err.what());
            }

            const json &ch = e.at("channel");
            ChannelConfig &c = sc.channel;
            if (ch.at("rayleigh").get<bool>())
            {
                c.K1 = c.K2 = 0.0;
                c.K3 = 0.0;
            }
            else
            {
                c.K1 = db_to_linear(ch.at("k1_db").get<double>());
                c.K2 = db_to_linear(ch.at("k2_db").get<double>());
                if (!ch.at("k3_db").is_null())
                    c.K3 = db_to_linear(ch.at("k3_db").get<double>());
            }
            c.corr_ts = parse_correlation(text, ch.at("corr_ts"), "corr_ts");
            c.corr_sr = parse_correlation(text, ch.at("corr_sr"), "corr_sr");
            c.M = p.antennas;
            c.N = p.elements;
            c.ris_nx = ch.at("ris_nx").get<int>();
            c.ris_nz = ch.at("ris_nz").get<int>();
            try
            {
                c.validate();
            }
            catch (const std::invalid_argument &err)
            {
                config_fail(text, {"channel"}, err.what());
            }
            return sc;
        }

        inline void apply_sweep_value(json &e, const std::string &parameter, double v)
        {
            if (parameter == "theta_deg")
                e["geometry"]["theta_deg"] = v;
            else if (parameter == "circuit_power_w")
            {
                e["system"].erase("circuit_power_dbm");
                e["system"]["circuit_power_w"] = v;
            }
            else if (parameter == "circuit_power_dbm")
            {
                e["system"].erase("circuit_power_w");
                e["system"]["circuit_power_dbm"] = v;
            }
            else if (parameter == "antennas" || parameter == "elements")
                e["system"][parameter] = int(std::lround(v));
            else
                e["system"][parameter] = v;
        }
    }

    /// Parses and validates a config for the given experiment kind. Throws ConfigError with the offending line.
    inline ExperimentConfig parse_config(std::string_view text, const std::string &kind, const CliOverrides &ov = {})
    {
        using detail::config_fail;
        if (kind != "individual" && kind != "asymptotic" && kind != "pareto")
            throw ConfigError("unknown experiment kind \"" + kind + "\"");

        json user;
        try
        {
            user = json::parse(text);
        }
        catch (const json::parse_error &err)
        {
            const std::size_t byte = std::min<std::size_t>(err.byte, text.size());
            const int line = 1 + int(std::count(text.begin(), text.begin() + std::ptrdiff_t(byte), '\n'));
            throw ConfigError("config line " + std::to_string(line) + ": malformed JSON: " + err.what());
        }

        json e = default_config_json();
        std::vector<std::string> keys;
        detail::merge_checked(text, e, user, keys);
        if (user.contains("kind") && user["kind"] != kind)
            config_fail(text, {"kind"}, "config is for \"" + user["kind"].get<std::string>() + "\", not \"" + kind + "\"");
        e["kind"] = kind;
        if (ov.seed)
            e["seed"] = *ov.seed;
        if (ov.out_dir)
            e["output"]["dir"] = *ov.out_dir;
        if (ov.alpha_grid)
            e["pareto"]["alpha_grid"] = *ov.alpha_grid;

        ExperimentConfig cfg;
        cfg.kind = kind;
        cfg.seed = e.at("seed").get<std::uint64_t>();
        cfg.out_dir = e.at("output").at("dir").get<std::string>();
        if (cfg.out_dir.empty())
            config_fail(text, {"output", "dir"}, "must not be empty");

        const json &ind = e.at("individual");
        cfg.individual.n_trials = ind.at("n_trials").get<int>();
        cfg.individual.ao.kappa = ind.at("kappa").get<double>();
        cfg.individual.ao.max_iter = ind.at("max_iter").get<int>();
        cfg.individual.ao.restarts = ind.at("restarts").get<int>();
        const long long ind_t = ind.at("T").get<long long>();
        if (cfg.individual.n_trials < 1)
            config_fail(text, {"individual", "n_trials"}, "must be >= 1");
        if (!(cfg.individual.ao.kappa > 0.0))
            config_fail(text, {"individual", "kappa"}, "must be positive");
        if (cfg.individual.ao.max_iter < 1)
            config_fail(text, {"individual", "max_iter"}, "must be >= 1");
        if (cfg.individual.ao.restarts < 1)
            config_fail(text, {"individual", "restarts"}, "must be >= 1");
        if (ind_t < 1)
            config_fail(text, {"individual", "T"}, "must be >= 1");
        cfg.individual.T = std::size_t(ind_t);

        const json &as = e.at("asymptotic");
        cfg.asymptotic.model = as.at("model").get<std::string>();
        cfg.asymptotic.sweep = as.at("sweep").get<std::string>();
        cfg.asymptotic.grid = as.at("grid").get<std::vector<int>>();
        cfg.asymptotic.max_power_dbm = as.at("max_power_dbm").get<std::vector<double>>();
        const long long mc = as.at("monte_carlo_trials").get<long long>();
        if (cfg.asymptotic.model != "pt" && cfg.asymptotic.model != "ris_siso" && cfg.asymptotic.model != "ris_miso")
            config_fail(text, {"asymptotic", "model"}, "expected \"pt\", \"ris_siso\" or \"ris_miso\"");
        if (cfg.asymptotic.sweep != "M" && cfg.asymptotic.sweep != "N")
            config_fail(text, {"asymptotic", "sweep"}, "expected \"M\" or \"N\"");
        if (cfg.asymptotic.model == "ris_siso" && cfg.asymptotic.sweep == "M")
            config_fail(text, {"asymptotic", "sweep"}, "the SISO model has a single antenna; sweep N");
        if (cfg.asymptotic.grid.empty())
            config_fail(text, {"asymptotic", "grid"}, "must not be empty");
        for (int v : cfg.asymptotic.grid)
            if (v < 1)
                config_fail(text, {"asymptotic", "grid"}, "entries must be >= 1");
        if (cfg.asymptotic.max_power_dbm.empty())
            config_fail(text, {"asymptotic", "max_power_dbm"}, "must not be empty");
        if (mc < 0)
            config_fail(text, {"asymptotic", "monte_carlo_trials"}, "must be >= 0");
        cfg.asymptotic.monte_carlo_trials = std::size_t(mc);

        const json &pa = e.at("pareto");
        ParetoSettings &ps = cfg.pareto;
        ps.alpha_grid = pa.at("alpha_grid").get<std::vector<double>>();
        std::sort(ps.alpha_grid.begin(), ps.alpha_grid.end());
        ps.query.epsilon_bisect = pa.at("epsilon_bisect").get<double>();
        ps.query.kappas = {pa.at("kappa1").get<double>(), pa.at("kappa2").get<double>(), pa.at("kappa3").get<double>()};
        const long long pt_t = pa.at("T").get<long long>(), pr_t = pa.at("report_T").get<long long>();
        if (pt_t < 1)
            config_fail(text, {"pareto", "T"}, "must be >= 1");
        if (pr_t < 1)
            config_fail(text, {"pareto", "report_T"}, "must be >= 1");
        ps.query.T = std::size_t(pt_t);
        ps.query.report_T = std::size_t(pr_t);
        ps.query.max_depth = pa.at("max_depth").get<int>();
        ps.query.anchor_options = cfg.individual.ao;
        if (!pa.at("sample_seed").is_null())
            ps.sample_seed = pa.at("sample_seed").get<std::uint64_t>();
        ps.n_trials = pa.at("n_trials").get<int>();
        ps.benchmark = pa.at("benchmark").get<bool>();
        if (ps.alpha_grid.empty())
            config_fail(text, {"pareto", "alpha_grid"}, "must not be empty");
        for (double a : ps.alpha_grid)
            if (!(a > 0.0 && a < 1.0))
                config_fail(text, {"pareto", "alpha_grid"}, "entries must lie in (0, 1)");
        if (ps.n_trials < 1)
            config_fail(text, {"pareto", "n_trials"}, "must be >= 1");
        try
        {
            ps.query.validate();
        }
        catch (const std::invalid_argument &err)
        {
            config_fail(text, {"pareto"}, err.what());
        }

        const json &sw = e.at("sweep");
        cfg.sweep_parameter = sw.at("parameter").get<std::string>();
        const auto values = sw.at("values").get<std::vector<double>>();
        const auto &names = sweep_parameters();
        if (std::find(names.begin(), names.end(), cfg.sweep_parameter) == names.end())
            config_fail(text, {"sweep", "parameter"}, "unsupported sweep parameter \"" + cfg.sweep_parameter + "\"");
        if (cfg.sweep_parameter != "none" && kind != "pareto")
            config_fail(text, {"sweep", "parameter"}, "sweeps apply to pareto runs only");
        if (cfg.sweep_parameter != "none" && values.empty())
            config_fail(text, {"sweep", "values"}, "must not be empty");
        if (cfg.sweep_parameter == "none" && !values.empty())
            config_fail(text, {"sweep", "values"}, "values given without a sweep parameter");

        if (cfg.sweep_parameter == "none")
            cfg.scenarios.push_back(detail::build_scenario(text, e));
        else
            for (double v : values)
            {
                json ev = e;
                detail::apply_sweep_value(ev, cfg.sweep_parameter, v);
                Scenario sc = detail::build_scenario(text, ev);
                sc.sweep_value = v;
                cfg.scenarios.push_back(sc);
            }
        cfg.effective = std::move(e);
        return cfg;
    }

    inline ExperimentConfig load_config(const std::filesystem::path &path, const std::string &kind,
                                        const CliOverrides &ov = {})
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("cannot read config file " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str(), kind, ov);
    }

    /// Named columns plus string cells; numbers are formatted once, so output is byte-stable.
    struct Table
    {
        std::vector<std::string> columns;
        std::vector<std::vector<std::string>> rows;

        std::size_t column(const std::string &name) const
        {
            const auto it = std::find(columns.begin(), columns.end(), name);
            if (it == columns.end())
                throw std::out_of_range("Table: no column " + name);
            return std::size_t(it - columns.begin());
        }
    };

    inline std::string fmt_num(double v)
    {
        if (std::isnan(v))
            return "";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return buf;
    }

    inline std::string fmt_bool(bool b) { return b ? "1" : "0"; }

    inline std::string csv_escape(const std::string &s)
    {
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string out = "\"";
        for (char c : s)
            out += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
        return out + "\"";
    }

    struct Report
    {
        std::string kind;
        std::vector<std::pair<std::string, Table>> tables; // file stem, table
        json sidecar = json::object();
        std::vector<std::string> failures; // one line per failed work unit
        bool fatal = false;                // nothing usable was produced
    };

    namespace detail
    {
        inline json complex_array(const ComplexVec &v)
        {
            json a = json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                a.push_back({v(i).real(), v(i).imag()});
            return a;
        }

        inline json solution_json(const BeamformingSolution &sol)
        {
            return {{"w", complex_array(sol.w)}, {"phi", complex_array(sol.phi)}, {"unit_modulus", sol.unit_modulus}};
        }

        /// Mean and standard error of each listed column over the given rows; empty cells are skipped.
        inline std::pair<std::vector<std::string>, std::vector<std::string>>
        summarize_columns(const Table &t, const std::vector<std::size_t> &rows, const std::vector<std::string> &cols)
        {
            std::vector<std::string> mean(t.columns.size()), se(t.columns.size());
            for (const auto &name : cols)
            {
                const std::size_t c = t.column(name);
                std::vector<double> v;
                for (std::size_t r : rows)
                    if (!t.rows[r][c].empty())
                        v.push_back(std::stod(t.rows[r][c]));
                if (v.empty())
                    continue;
                const MonteCarloMean m = summarize(v);
                mean[c] = fmt_num(m.mean);
                se[c] = v.size() > 1 ? fmt_num(m.standard_error) : "";
            }
            return {mean, se};
        }

        inline DerivedChannel draw_channel(const Scenario &sc, std::uint64_t seed, int trial)
        {
            const ChannelSampler sampler(sc.geometry, sc.channel);
            RngStream rng(seed, 0x1000u + std::uint64_t(trial));
            return derive_normalized(sampler.sample(rng), sc.params);
        }
    }

    /// Both individual maximizers per trial: anchor EE pairs, AO traces and solutions.
    inline Report run_individual(const ExperimentConfig &cfg, unsigned threads = 1)
    {
        const Scenario &sc = cfg.scenarios.front();
        const int n = cfg.individual.n_trials;
        struct Trial
        {
            IndividualResult pt, ris;
            std::string error;
        };
        std::vector<Trial> trials(static_cast<std::size_t>(n));
        parallel_for(std::size_t(n), threads, [&](std::size_t t)
                     {
                         try
                         {
                             const DerivedChannel dc = detail::draw_channel(sc, cfg.seed, int(t));
                             const SampleSet s = SampleSet::generate(cfg.individual.T, detail::mix_seed(cfg.seed, 0x5a00 + t));
                             AoOptions ao = cfg.individual.ao;
                             ao.seed = detail::mix_seed(cfg.seed, 0xa000 + t);
                             trials[t].pt = max_ee_pt(dc, sc.params, s, ao);
                             trials[t].ris = max_ee_ris(dc, sc.params, s, ao);
                         }
                         catch (const std::exception &e)
                         {
                             trials[t].error = e.what();
                         } });

        const std::string hash = cfg.hash(), seed = std::to_string(cfg.seed);
        Table main{{"row", "trial", "eta_pt_1", "eta_ris_1", "eta_pt_2", "eta_ris_2", "eta_pt_1_sampled",
                    "eta_pt_2_sampled", "power_1_w", "power_2_w", "iterations_1", "iterations_2", "converged_1",
                    "converged_2", "error", "config_hash", "seed"},
                   {}};
        Table traces{{"trial", "solver", "iteration", "objective", "config_hash", "seed"}, {}};
        Report rep;
        rep.kind = "individual";
        json sols = json::array();
        std::vector<std::size_t> ok_rows;
        for (int t = 0; t < n; ++t)
        {
            const Trial &tr = trials[std::size_t(t)];
            if (!tr.error.empty())
            {
                std::vector<std::string> row(main.columns.size());
                row[0] = "trial";
                row[1] = std::to_string(t);
                row[main.column("error")] = tr.error;
                row[main.column("config_hash")] = hash;
                row[main.column("seed")] = seed;
                main.rows.push_back(row);
                rep.failures.push_back("trial " + std::to_string(t) + ": " + tr.error);
                continue;
            }
            ok_rows.push_back(main.rows.size());
            main.rows.push_back({"trial", std::to_string(t), fmt_num(tr.pt.ee_upper.ee_pt), fmt_num(tr.pt.ee_upper.ee_ris),
                                 fmt_num(tr.ris.ee_upper.ee_pt), fmt_num(tr.ris.ee_upper.ee_ris),
                                 fmt_num(tr.pt.ee_sampled.ee_pt), fmt_num(tr.ris.ee_sampled.ee_pt),
                                 fmt_num(tr.pt.solution.power()), fmt_num(tr.ris.solution.power()),
                                 std::to_string(tr.pt.trace.iterations), std::to_string(tr.ris.trace.iterations),
                                 fmt_bool(tr.pt.trace.converged), fmt_bool(tr.ris.trace.converged), "", hash, seed});
            for (const auto &[name, res] : {std::pair{"pt", &tr.pt}, std::pair{"ris", &tr.ris}})
                for (std::size_t i = 0; i < res->trace.objective.size(); ++i)
                    traces.rows.push_back({std::to_string(t), name, std::to_string(i), fmt_num(res->trace.objective[i]),
                                           hash, seed});
            sols.push_back({{"trial", t},
                            {"pt", detail::solution_json(tr.pt.solution)},
                            {"ris", detail::solution_json(tr.ris.solution)}});
        }
        auto [mean, se] = detail::summarize_columns(main, ok_rows,
                                                    {"eta_pt_1", "eta_ris_1", "eta_pt_2", "eta_ris_2", "eta_pt_1_sampled",
                                                     "eta_pt_2_sampled", "power_1_w", "power_2_w", "iterations_1",
                                                     "iterations_2"});
        for (auto *r : {&mean, &se})
        {
            (*r)[main.column("config_hash")] = hash;
            (*r)[main.column("seed")] = seed;
        }
        mean[0] = "mean";
        se[0] = "se";
        mean[1] = se[1] = std::to_string(ok_rows.size());
        main.rows.push_back(mean);
        main.rows.push_back(se);

        rep.fatal = ok_rows.empty();
        rep.sidecar["solutions"] = sols;
        rep.tables.emplace_back("individual", std::move(main));
        rep.tables.emplace_back("individual_traces", std::move(traces));
        return rep;
    }

    /// Closed-form EE curves over the M or N grid for each Pmax level, with optional Monte-Carlo overlays.
    inline Report run_asymptotic_sweep(const ExperimentConfig &cfg, unsigned threads = 1)
    {
        const Scenario &sc = cfg.scenarios.front();
        const AsymptoticSettings &as = cfg.asymptotic;
        const PathLosses b = path_losses(sc.geometry);
        const std::string hash = cfg.hash(), seed = std::to_string(cfg.seed);
        Table t{{"model", "pmax_dbm", "M", "N", "ee", "power_w", "mc_mean", "mc_se", "mc_trials", "config_hash", "seed"},
                {}};
        std::size_t point = 0;
        for (double pdbm : as.max_power_dbm)
            for (int v : as.grid)
            {
                SystemParams params = sc.params;
                params.max_power_w = dbm_to_watt(pdbm);
                int m = as.sweep == "M" ? v : sc.params.antennas;
                const int n = as.sweep == "N" ? v : sc.params.elements;
                if (as.model == "ris_siso")
                    m = 1;
                params.antennas = m;
                params.elements = n;

                double ee = 0.0, power = params.max_power_w;
                if (as.model == "pt")
                {
                    power = opt_power_asymptotic(m, n, b, params);
                    ee = ee_pt_asymptotic(power, m, n, b, params);
                }
                else if (as.model == "ris_siso")
                    ee = ee_ris_asymptotic_siso(n, b, sc.channel.K2, sc.channel.k3(), params);
                else
                    ee = ee_ris_asymptotic_miso(m, n, b, params);

                MonteCarloMean mcm;
                if (as.monte_carlo_trials > 0)
                {
                    ChannelConfig cc = sc.channel;
                    cc.M = m;
                    cc.N = n;
                    cc.ris_nx = cc.ris_nz = 0;
                    const ChannelSampler sampler(sc.geometry, cc);
                    const std::uint64_t mseed = detail::mix_seed(cfg.seed, 0xc000 + point);
                    if (as.model == "pt")
                        mcm = mc_ee_pt_random_phase(sampler, params, as.monte_carlo_trials, mseed, threads);
                    else if (as.model == "ris_siso")
                        mcm = mc_ee_ris_siso(sampler, params, as.monte_carlo_trials, mseed, threads);
                    else
                        mcm = mc_ee_ris_mrt(sampler, params, as.monte_carlo_trials, mseed, threads);
                }
                const bool mc = as.monte_carlo_trials > 0;
                t.rows.push_back({as.model, fmt_num(pdbm), std::to_string(m), std::to_string(n), fmt_num(ee),
                                  fmt_num(power), mc ? fmt_num(mcm.mean) : "", mc ? fmt_num(mcm.standard_error) : "",
                                  std::to_string(mcm.trials), hash, seed});
                ++point;
            }
        Report rep;
        rep.kind = "asymptotic";
        rep.sidecar["path_losses"] = {{"tr", b.tr}, {"ts", b.ts}, {"sr", b.sr}};
        rep.tables.emplace_back("asymptotic", std::move(t));
        return rep;
    }

    /// Boundary points over the alpha grid, anchors and the rate-max benchmark for every (sweep value, trial).
    inline Report run_pareto(const ExperimentConfig &cfg, unsigned threads = 1)
    {
        const ParetoSettings &ps = cfg.pareto;
        const std::size_t n_sc = cfg.scenarios.size(), n_tr = std::size_t(ps.n_trials), n_a = ps.alpha_grid.size();
        const std::uint64_t sample_base = ps.sample_seed.value_or(cfg.seed);

        struct Instance
        {
            DerivedChannel dc;
            ParetoQuery q;
            SampleSet s, report;
            Anchors anchors;
            IndividualResult benchmark;
            std::string error;
        };
        std::vector<Instance> inst(n_sc * n_tr);
        parallel_for(inst.size(), threads, [&](std::size_t i)
                     {
                         const Scenario &sc = cfg.scenarios[i / n_tr];
                         const int trial = int(i % n_tr);
                         Instance &in = inst[i];
                         try
                         {
                             in.dc = detail::draw_channel(sc, cfg.seed, trial);
                             in.q = ps.query;
                             in.q.sample_seed = detail::mix_seed(sample_base, std::uint64_t(trial));
                             in.q.anchor_options.seed = detail::mix_seed(cfg.seed, 0xa000 + std::uint64_t(trial));
                             in.s = SampleSet::generate(in.q.T, in.q.sample_seed);
                             in.report = report_samples(in.q);
                             in.anchors = make_anchors(in.dc, sc.params, in.s, in.q.anchor_options);
                             if (ps.benchmark)
                                 in.benchmark = rate_max_benchmark(in.dc, sc.params, in.s, in.q.anchor_options);
                         }
                         catch (const std::exception &e)
                         {
                             in.error = e.what();
                         } });

        std::vector<ParetoPoint> pts(inst.size() * n_a);
        parallel_for(pts.size(), threads, [&](std::size_t k)
                     {
                         const std::size_t i = k / n_a;
                         const Instance &in = inst[i];
                         ParetoQuery q = in.q;
                         q.alpha = ps.alpha_grid[k % n_a];
                         if (!in.error.empty())
                         {
                             pts[k].alpha = clamp_alpha(q.alpha);
                             pts[k].error = in.error;
                             return;
                         }
                         try
                         {
                             pts[k] = pareto_point(in.dc, q, cfg.scenarios[i / n_tr].params, in.s, in.anchors, in.report);
                         }
                         catch (const std::exception &e)
                         {
                             pts[k].alpha = clamp_alpha(q.alpha);
                             pts[k].error = e.what();
                         } });

        const std::string hash = cfg.hash(), seed = std::to_string(cfg.seed);
        Table t{{"row", "sweep_parameter", "sweep_value", "trial", "alpha", "eta_star", "eta_lower", "eta_upper",
                 "ee_pt", "ee_ris", "ee_pt_report", "ee_pt_upper", "power_w", "bisection_steps", "relaxed", "on_ray",
                 "short_circuit", "error", "config_hash", "seed"},
                {}};
        const std::string sweep_name = cfg.sweep_parameter == "none" ? "" : cfg.sweep_parameter;
        Report rep;
        rep.kind = "pareto";
        json boundaries = json::array();
        std::size_t ok_points = 0;

        auto solution_row = [&](const std::string &kind, const Scenario &sc, std::size_t trial, const Instance &in,
                                 const BeamformingSolution &sol)
        {
            const EEPair opt = ee_pair_samples(in.dc, sol, in.s, sc.params);
            const EEPair rep_pair = ee_pair_samples(in.dc, sol, in.report, sc.params);
            const EEPair up = ee_pair_upper(in.dc, sol, sc.params);
            std::vector<std::string> row(t.columns.size());
            row[0] = kind;
            row[1] = sweep_name;
            row[2] = fmt_num(sc.sweep_value);
            row[3] = std::to_string(trial);
            row[t.column("ee_pt")] = fmt_num(opt.ee_pt);
            row[t.column("ee_ris")] = fmt_num(opt.ee_ris);
            row[t.column("ee_pt_report")] = fmt_num(rep_pair.ee_pt);
            row[t.column("ee_pt_upper")] = fmt_num(up.ee_pt);
            row[t.column("power_w")] = fmt_num(sol.power());
            row[t.column("relaxed")] = fmt_bool(!sol.unit_modulus);
            row[t.column("config_hash")] = hash;
            row[t.column("seed")] = seed;
            return row;
        };

        for (std::size_t si = 0; si < n_sc; ++si)
        {
            const Scenario &sc = cfg.scenarios[si];
            std::vector<std::vector<std::size_t>> by_alpha(n_a);
            for (std::size_t tr = 0; tr < n_tr; ++tr)
            {
                const std::size_t i = si * n_tr + tr;
                const Instance &in = inst[i];
                if (in.error.empty())
                {
                    t.rows.push_back(solution_row("anchor_pt", sc, tr, in, in.anchors.pt.solution));
                    t.rows.push_back(solution_row("anchor_ris", sc, tr, in, in.anchors.ris.solution));
                    if (ps.benchmark)
                        t.rows.push_back(solution_row("benchmark", sc, tr, in, in.benchmark.solution));
                }
                else
                    rep.failures.push_back("sweep point " + std::to_string(si) + ", trial " + std::to_string(tr) +
                                           ": " + in.error);
                json pts_json = json::array();
                for (std::size_t a = 0; a < n_a; ++a)
                {
                    const ParetoPoint &p = pts[i * n_a + a];
                    std::vector<std::string> row(t.columns.size());
                    row[0] = "boundary";
                    row[1] = sweep_name;
                    row[2] = fmt_num(sc.sweep_value);
                    row[3] = std::to_string(tr);
                    row[4] = fmt_num(p.alpha);
                    row[t.column("config_hash")] = hash;
                    row[t.column("seed")] = seed;
                    if (!p.ok())
                    {
                        row[t.column("error")] = p.error;
                        if (in.error.empty())
                            rep.failures.push_back("sweep point " + std::to_string(si) + ", trial " + std::to_string(tr) +
                                                   ", alpha " + fmt_num(p.alpha) + ": " + p.error);
                        t.rows.push_back(row);
                        continue;
                    }
                    ++ok_points;
                    by_alpha[a].push_back(t.rows.size());
                    row[5] = fmt_num(p.eta_star);
                    row[6] = fmt_num(p.eta_lower);
                    row[7] = fmt_num(p.eta_upper);
                    row[8] = fmt_num(p.ee_pair.ee_pt);
                    row[9] = fmt_num(p.ee_pair.ee_ris);
                    row[10] = fmt_num(p.ee_pair_report.ee_pt);
                    row[11] = fmt_num(p.ee_pair_upper.ee_pt);
                    row[12] = fmt_num(p.solution.power());
                    row[13] = std::to_string(p.bisection_steps);
                    row[14] = fmt_bool(p.relaxed);
                    row[15] = fmt_bool(p.on_ray);
                    row[16] = fmt_bool(p.short_circuit);
                    t.rows.push_back(row);
                    pts_json.push_back({{"alpha", p.alpha}, {"solution", detail::solution_json(p.solution)}});
                }
                boundaries.push_back({{"sweep_value", std::isnan(sc.sweep_value) ? json(nullptr) : json(sc.sweep_value)},
                                      {"trial", tr},
                                      {"points", pts_json}});
            }
            if (n_tr > 1)
                for (std::size_t a = 0; a < n_a; ++a)
                {
                    if (by_alpha[a].empty())
                        continue;
                    auto [mean, se] = detail::summarize_columns(t, by_alpha[a], {"eta_star", "ee_pt", "ee_ris",
                                                                                 "ee_pt_report", "ee_pt_upper", "power_w"});
                    for (auto *r : {&mean, &se})
                    {
                        (*r)[1] = sweep_name;
                        (*r)[2] = fmt_num(sc.sweep_value);
                        (*r)[3] = std::to_string(by_alpha[a].size());
                        (*r)[4] = fmt_num(clamp_alpha(ps.alpha_grid[a]));
                        (*r)[t.column("config_hash")] = hash;
                        (*r)[t.column("seed")] = seed;
                    }
                    mean[0] = "mean";
                    se[0] = "se";
                    t.rows.push_back(mean);
                    t.rows.push_back(se);
                }
        }
        rep.fatal = ok_points == 0;
        rep.sidecar["boundaries"] = boundaries;
        rep.tables.emplace_back("pareto", std::move(t));
        return rep;
    }

    inline Report run_experiment(const ExperimentConfig &cfg, unsigned threads = 1)
    {
        if (cfg.kind == "individual")
            return run_individual(cfg, threads);
        if (cfg.kind == "asymptotic")
            return run_asymptotic_sweep(cfg, threads);
        return run_pareto(cfg, threads);
    }

    inline std::string render_csv(const Table &t, const ExperimentConfig &cfg, const std::string &stem)
    {
        std::ostringstream out;
        out << "# sr-ee " << code_version << "\n"
            << "# table: " << stem << "\n"
            << "# kind: " << cfg.kind << "\n"
            << "# config_hash: " << cfg.hash() << "\n"
            << "# seed: " << cfg.seed << "\n";
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            out << (i ? "," : "") << t.columns[i];
        out << "\n";
        for (const auto &row : t.rows)
        {
            for (std::size_t i = 0; i < row.size(); ++i)
                out << (i ? "," : "") << csv_escape(row[i]);
            out << "\n";
        }
        return out.str();
    }

    /// Writes <stem>.csv for each table and <kind>.json; returns the paths written.
    inline std::vector<std::filesystem::path> write_report(const Report &rep, const ExperimentConfig &cfg)
    {
        namespace fs = std::filesystem;
        const fs::path dir(cfg.out_dir);
        fs::create_directories(dir);
        std::vector<fs::path> written;
        json side = rep.sidecar;
        side["tool"] = "sr-ee";
        side["version"] = code_version;
        side["kind"] = rep.kind;
        side["config_hash"] = cfg.hash();
        side["seed"] = cfg.seed;
        side["config"] = cfg.effective;
        side["config"].erase("output");
        side["failures"] = rep.failures;
        json files = json::array();
        for (const auto &[stem, table] : rep.tables)
        {
            const fs::path p = dir / (stem + ".csv");
            std::ofstream out(p, std::ios::binary);
            out << render_csv(table, cfg, stem);
            if (!out)
                throw std::runtime_error("cannot write " + p.string());
            written.push_back(p);
            files.push_back(p.filename().string());
        }
        side["files"] = files;
        const fs::path sp = dir / (rep.kind + ".json");
        std::ofstream out(sp, std::ios::binary);
        out << side.dump(2) << "\n";
        if (!out)
            throw std::runtime_error("cannot write " + sp.string());
        written.push_back(sp);
        return written;
    }
}
