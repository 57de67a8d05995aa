// SPDX-License-Identifier: Apache-2.0
//
// nfloc: near-field MIMO radar localization toolkit
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

#ifndef NFLOC_CONFIG_HPP
#define NFLOC_CONFIG_HPP

#include "nfloc/harness.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nfloc
{
    using json = nlohmann::json;

    inline constexpr int config_schema_version = 1;

    struct UpaConfig
    {
        int nx = 1;
        int ny = 1;
        double spacing = 0.0;
        Vec3 center = Vec3::Zero();
        Plane plane = Plane::xy;

        Positions build() const { return build_upa(nx, ny, spacing, center, plane); }
        bool operator==(const UpaConfig &o) const
        {
            return nx == o.nx && ny == o.ny && spacing == o.spacing && center == o.center && plane == o.plane;
        }
    };

    struct WaveformConfig
    {
        std::string type = "isotropic"; // isotropic | directed | identity
        Eigen::Index length = 1;
        std::uint64_t seed = 0;
        std::vector<int> directed_targets;
    };

    struct NoiseConfig
    {
        bool structured = false;
        double sigma2 = 1.0;
        double rho = 0.0;
        double phase_step = 0.0;
        double scale = 1.0; // structured: Q = scale * Q_shape
        std::uint64_t seed = 0; // noise draw used by synth
    };

    struct EstimatorConfig
    {
        Criterion criterion = Criterion::Aco;
        int k_max = 1;
        double epsilon = 1e-5;
        GridSchedule schedule;
    };

    struct SweepConfig
    {
        std::vector<double> snr_db;
        int trials = 100;
        std::uint64_t base_seed = 0;
        std::vector<Criterion> estimators{Criterion::Aco, Criterion::CoWgn};
        std::vector<AmplitudeMode> modes;
        SnrReference snr_reference = SnrReference::Received;
    };

    struct Scenario
    {
        UpaConfig tx_array;
        UpaConfig rx_array;
        ArrayGeometry geometry;
        TargetScene scene;
        WaveformConfig waveform;
        NoiseConfig noise;
        AmplitudeMode mode;
        std::optional<EstimatorConfig> estimator;
        std::optional<SweepConfig> sweep;
        json source;
    };

    namespace detail
    {
        [[noreturn]] inline void config_fail(const std::string &where, const std::string &what)
        {
            throw ConfigError(where + ": " + what);
        }

        inline const json &require(const json &j, const char *key, const std::string &where)
        {
            if (!j.is_object() || !j.contains(key))
                config_fail(where, std::string("missing required field '") + key + "'");
            return j.at(key);
        }

        inline double get_number(const json &j, const std::string &where)
        {
            if (!j.is_number())
                config_fail(where, "expected a number");
            const double v = j.get<double>();
            if (!std::isfinite(v))
                config_fail(where, "expected a finite number");
            return v;
        }

        inline long long get_integer(const json &j, const std::string &where)
        {
            if (!j.is_number_integer())
                config_fail(where, "expected an integer");
            return j.get<long long>();
        }

        inline std::uint64_t get_seed(const json &j, const std::string &where)
        {
            if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0))
                config_fail(where, "expected a non-negative integer");
            return j.get<std::uint64_t>();
        }

        inline Vec3 get_vec3(const json &j, const std::string &where)
        {
            if (!j.is_array() || j.size() != 3)
                config_fail(where, "expected an array of three numbers");
            return {get_number(j[0], where + "[0]"), get_number(j[1], where + "[1]"), get_number(j[2], where + "[2]")};
        }

        inline UpaConfig parse_array(const json &j, const CarrierSpec &carrier, const std::string &where)
        {
            const std::string type = require(j, "type", where).is_string() ? j.at("type").get<std::string>() : "";
            if (type != "upa")
                config_fail(where + ".type", "only \"upa\" arrays are supported");
            const long long nx = get_integer(require(j, "nx", where), where + ".nx");
            const long long ny = get_integer(require(j, "ny", where), where + ".ny");
            if (nx < 1 || ny < 1 || nx > 100000 || ny > 100000)
                config_fail(where, "nx and ny must be positive");
            double spacing = 0.0;
            const bool has_m = j.contains("spacing_m");
            const bool has_half = j.contains("spacing_half_wavelength");
            if (has_m == has_half)
                config_fail(where, "exactly one of spacing_m or spacing_half_wavelength is required");
            if (has_m)
                spacing = get_number(j.at("spacing_m"), where + ".spacing_m");
            else
            {
                if (!j.at("spacing_half_wavelength").is_boolean() || !j.at("spacing_half_wavelength").get<bool>())
                    config_fail(where + ".spacing_half_wavelength", "must be true when present");
                spacing = carrier.wavelength() / 2.0;
            }
            if (!(spacing > 0.0))
                config_fail(where + ".spacing_m", "must be positive");
            const Vec3 center = get_vec3(require(j, "center", where), where + ".center");
            Plane plane = Plane::xy;
            if (j.contains("plane"))
            {
                if (!j.at("plane").is_string())
                    config_fail(where + ".plane", "expected a string");
                try
                {
                    plane = plane_from_string(j.at("plane").get<std::string>());
                }
                catch (const std::invalid_argument &e)
                {
                    config_fail(where + ".plane", e.what());
                }
            }
            return {static_cast<int>(nx), static_cast<int>(ny), spacing, center, plane};
        }

        inline AmplitudeMode parse_mode(const json &j, const ArrayGeometry &g, const std::string &where)
        {
            std::string type;
            if (j.is_string())
                type = j.get<std::string>();
            else if (j.is_object() && j.contains("type") && j.at("type").is_string())
                type = j.at("type").get<std::string>();
            else
                config_fail(where, "expected \"exact\", \"constant\" or an object with a type");
            if (type == "exact")
                return AmplitudeMode::exact();
            if (type != "constant")
                config_fail(where, "unknown amplitude mode '" + type + "'");
            Vec3 rr = g.rx_centroid(), rt = g.tx_centroid();
            if (j.is_object() && j.contains("reference_rx"))
                rr = get_vec3(j.at("reference_rx"), where + ".reference_rx");
            if (j.is_object() && j.contains("reference_tx"))
                rt = get_vec3(j.at("reference_tx"), where + ".reference_tx");
            return AmplitudeMode::constant(rr, rt);
        }

        inline Criterion parse_criterion(const json &j, const std::string &where)
        {
            if (!j.is_string())
                config_fail(where, "expected a string");
            try
            {
                return criterion_from_string(j.get<std::string>());
            }
            catch (const std::invalid_argument &e)
            {
                config_fail(where, e.what());
            }
        }

        inline EstimatorConfig parse_estimator(const json &j, const std::string &where)
        {
            EstimatorConfig e;
            e.criterion = parse_criterion(require(j, "type", where), where + ".type");
            e.k_max = static_cast<int>(get_integer(require(j, "k_max", where), where + ".k_max"));
            if (e.k_max < 1)
                config_fail(where + ".k_max", "must be at least 1");
            if (j.contains("epsilon"))
                e.epsilon = get_number(j.at("epsilon"), where + ".epsilon");
            if (!(e.epsilon > 0.0))
                config_fail(where + ".epsilon", "must be positive");
            const json &region = require(j, "region_m", where);
            e.schedule.region_min = get_vec3(require(region, "min", where + ".region_m"), where + ".region_m.min");
            e.schedule.region_max = get_vec3(require(region, "max", where + ".region_m"), where + ".region_m.max");
            if (j.contains("grid"))
            {
                const json &g = j.at("grid");
                const std::string w = where + ".grid";
                if (!g.is_object())
                    config_fail(w, "expected an object");
                if (g.contains("points_per_axis"))
                    e.schedule.points_per_axis = static_cast<int>(get_integer(g.at("points_per_axis"), w + ".points_per_axis"));
                if (g.contains("levels"))
                    e.schedule.levels = static_cast<int>(get_integer(g.at("levels"), w + ".levels"));
                if (g.contains("factor"))
                    e.schedule.factor = get_number(g.at("factor"), w + ".factor");
                if (g.contains("span"))
                    e.schedule.span = static_cast<int>(get_integer(g.at("span"), w + ".span"));
            }
            try
            {
                e.schedule.validate();
            }
            catch (const std::invalid_argument &ex)
            {
                config_fail(where, ex.what());
            }
            return e;
        }
    } // namespace detail

    // Builds a Scenario from a parsed document. Every schema or consistency
    // problem is reported as ConfigError with the offending field path.
    inline Scenario scenario_from_json(const json &doc)
    {
        using namespace detail;
        if (!doc.is_object())
            config_fail("config", "top level must be an object");
        const long long version = get_integer(require(doc, "schema_version", "config"), "schema_version");
        if (version != config_schema_version)
            config_fail("schema_version", "unsupported version " + std::to_string(version));

        const double fc = get_number(require(doc, "carrier_hz", "config"), "carrier_hz");
        if (!(fc > 0.0))
            config_fail("carrier_hz", "must be positive");
        const CarrierSpec carrier(fc);

        const json &arrays = require(doc, "arrays", "config");
        std::optional<ArrayGeometry> geometry;
        const UpaConfig tx = parse_array(require(arrays, "tx", "arrays"), carrier, "arrays.tx");
        const UpaConfig rx = arrays.contains("rx") ? parse_array(arrays.at("rx"), carrier, "arrays.rx") : tx;
        try
        {
            geometry.emplace(tx.build(), rx.build());
        }
        catch (const std::invalid_argument &e)
        {
            config_fail("arrays", e.what());
        }

        const json &tj = require(doc, "targets", "config");
        if (!tj.is_array() || tj.empty())
            config_fail("targets", "expected a non-empty array");
        std::vector<Target> targets;
        for (std::size_t i = 0; i < tj.size(); ++i)
        {
            const std::string w = "targets[" + std::to_string(i) + "]";
            Target t;
            t.position = get_vec3(require(tj[i], "position_m", w), w + ".position_m");
            t.reflection = cplx(1.0, 0.0);
            if (tj[i].contains("b"))
            {
                const json &b = tj[i].at("b");
                if (b.is_number())
                    t.reflection = cplx(get_number(b, w + ".b"), 0.0);
                else if (b.is_array() && b.size() == 2)
                    t.reflection = cplx(get_number(b[0], w + ".b[0]"), get_number(b[1], w + ".b[1]"));
                else
                    config_fail(w + ".b", "expected [re, im] or a real number");
            }
            targets.push_back(t);
        }
        TargetScene scene(targets, carrier);
        try
        {
            validate_scene(*geometry, scene);
        }
        catch (const std::invalid_argument &e)
        {
            config_fail("targets", e.what());
        }

        Scenario sc{tx, rx, *geometry, scene, {}, {}, AmplitudeMode::exact(), std::nullopt, std::nullopt, doc};

        if (doc.contains("waveform"))
        {
            const json &w = doc.at("waveform");
            if (!w.is_object() || !w.contains("type") || !w.at("type").is_string())
                config_fail("waveform", "expected an object with a string type");
            sc.waveform.type = w.at("type").get<std::string>();
            if (sc.waveform.type != "isotropic" && sc.waveform.type != "directed" && sc.waveform.type != "identity")
                config_fail("waveform.type", "unknown waveform '" + sc.waveform.type + "'");
            const long long L = get_integer(require(w, "L", "waveform"), "waveform.L");
            if (L < 1)
                config_fail("waveform.L", "must be at least 1");
            sc.waveform.length = static_cast<Eigen::Index>(L);
            if (w.contains("seed"))
                sc.waveform.seed = get_seed(w.at("seed"), "waveform.seed");
            if (sc.waveform.type == "directed")
            {
                const json &d = require(w, "directed_targets", "waveform");
                if (!d.is_array() || d.empty() || d.size() > 2)
                    config_fail("waveform.directed_targets", "expected one or two target indices");
                for (std::size_t i = 0; i < d.size(); ++i)
                {
                    const long long k = get_integer(d[i], "waveform.directed_targets");
                    if (k < 0 || k >= static_cast<long long>(scene.size()))
                        config_fail("waveform.directed_targets", "index " + std::to_string(k) + " out of range");
                    sc.waveform.directed_targets.push_back(static_cast<int>(k));
                }
            }
        }
        else
            config_fail("config", "missing required field 'waveform'");

        if (doc.contains("noise"))
        {
            const json &n = doc.at("noise");
            if (!n.is_object() || !n.contains("type") || !n.at("type").is_string())
                config_fail("noise", "expected an object with a string type");
            const std::string type = n.at("type").get<std::string>();
            if (n.contains("seed"))
                sc.noise.seed = get_seed(n.at("seed"), "noise.seed");
            if (type == "wgn")
            {
                sc.noise.sigma2 = get_number(require(n, "sigma2", "noise"), "noise.sigma2");
                if (!(sc.noise.sigma2 > 0.0))
                    config_fail("noise.sigma2", "must be positive");
            }
            else if (type == "structured")
            {
                sc.noise.structured = true;
                sc.noise.rho = get_number(require(n, "rho", "noise"), "noise.rho");
                sc.noise.phase_step = get_number(require(n, "phase_step_rad", "noise"), "noise.phase_step_rad");
                if (!(sc.noise.rho > 0.0 && sc.noise.rho < 1.0))
                    config_fail("noise.rho", "must lie in (0, 1)");
                if (n.contains("scale"))
                    sc.noise.scale = get_number(n.at("scale"), "noise.scale");
                if (!(sc.noise.scale > 0.0))
                    config_fail("noise.scale", "must be positive");
            }
            else
                config_fail("noise.type", "unknown noise type '" + type + "'");
        }

        if (doc.contains("amplitude_mode"))
            sc.mode = parse_mode(doc.at("amplitude_mode"), sc.geometry, "amplitude_mode");

        if (doc.contains("estimator"))
        {
            sc.estimator = parse_estimator(doc.at("estimator"), "estimator");
            if (sc.estimator->k_max != static_cast<int>(scene.size()) && doc.contains("sweep"))
                config_fail("estimator.k_max", "must equal the number of targets when a sweep is configured");
        }

        if (doc.contains("sweep"))
        {
            const json &s = doc.at("sweep");
            SweepConfig sw;
            const json &snr = require(s, "snr_db", "sweep");
            if (!snr.is_array() || snr.empty())
                config_fail("sweep.snr_db", "expected a non-empty array");
            for (std::size_t i = 0; i < snr.size(); ++i)
            {
                sw.snr_db.push_back(get_number(snr[i], "sweep.snr_db"));
                if (i > 0 && !(sw.snr_db[i] > sw.snr_db[i - 1]))
                    config_fail("sweep.snr_db", "must be strictly increasing");
            }
            sw.trials = static_cast<int>(get_integer(require(s, "trials", "sweep"), "sweep.trials"));
            if (sw.trials < 1)
                config_fail("sweep.trials", "must be at least 1");
            if (s.contains("base_seed"))
                sw.base_seed = get_seed(s.at("base_seed"), "sweep.base_seed");
            if (s.contains("estimators"))
            {
                const json &e = s.at("estimators");
                if (!e.is_array() || e.empty())
                    config_fail("sweep.estimators", "expected a non-empty array");
                sw.estimators.clear();
                for (const json &x : e)
                    sw.estimators.push_back(parse_criterion(x, "sweep.estimators"));
            }
            if (s.contains("amplitude_modes"))
            {
                const json &m = s.at("amplitude_modes");
                if (!m.is_array() || m.empty())
                    config_fail("sweep.amplitude_modes", "expected a non-empty array");
                for (const json &x : m)
                    sw.modes.push_back(parse_mode(x, sc.geometry, "sweep.amplitude_modes"));
            }
            else
                sw.modes.push_back(sc.mode);
            if (s.contains("snr_reference"))
            {
                if (!s.at("snr_reference").is_string())
                    config_fail("sweep.snr_reference", "expected a string");
                try
                {
                    sw.snr_reference = snr_reference_from_string(s.at("snr_reference").get<std::string>());
                }
                catch (const std::invalid_argument &e)
                {
                    config_fail("sweep.snr_reference", e.what());
                }
            }
            if (!sc.estimator)
                config_fail("sweep", "a sweep requires an estimator section (search region and grid)");
            if (sc.waveform.type == "identity")
                config_fail("sweep", "the identity waveform has no snapshots; use isotropic or directed");
            sc.sweep = sw;
        }
        return sc;
    }

    inline json read_json_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw IoError("cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        try
        {
            return json::parse(ss.str());
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
        }
    }

    inline Scenario load_scenario(const std::string &path) { return scenario_from_json(read_json_file(path)); }

    // Transmit covariance R_X requested by the waveform section (before sampling).
    inline CMatrix waveform_target_covariance(const Scenario &sc)
    {
        const Eigen::Index n = sc.geometry.n_tx();
        if (sc.waveform.type != "directed")
            return CMatrix::Identity(n, n);
        const auto &t = sc.scene.targets();
        const auto &d = sc.waveform.directed_targets;
        const CVector v1 = steering_tx(sc.geometry, t[static_cast<std::size_t>(d[0])].position, sc.scene.carrier(),
                                       AmplitudeMode::exact());
        const CVector v2 = d.size() > 1 ? steering_tx(sc.geometry, t[static_cast<std::size_t>(d[1])].position,
                                                      sc.scene.carrier(), AmplitudeMode::exact())
                                        : v1;
        return build_nonisotropic_cov(v1, v2, sc.geometry.n_rx());
    }

    // Snapshot matrix X. The identity waveform is a covariance-only description and has no snapshots.
    inline CMatrix build_waveform(const Scenario &sc)
    {
        if (sc.waveform.type == "identity")
            throw ConfigError("waveform.type: the identity waveform has no snapshots; use isotropic or directed");
        if (sc.waveform.type == "isotropic")
            return isotropic_waveform(sc.geometry.n_tx(), sc.waveform.length, sc.waveform.seed).snapshots();
        return directed_waveform(waveform_target_covariance(sc), sc.waveform.length, sc.waveform.seed).snapshots();
    }

    // R_X used by CRB computations: exact identity for the identity waveform, else the sample covariance of X.
    inline TxCovariance tx_covariance(const Scenario &sc)
    {
        if (sc.waveform.type == "identity")
            return TxCovariance::identity(sc.geometry.n_tx());
        return TxCovariance::from_snapshots(build_waveform(sc));
    }

    inline NoiseModel noise_model(const Scenario &sc)
    {
        if (!sc.noise.structured)
            return NoiseModel::wgn(sc.noise.sigma2);
        return NoiseModel::structured(sc.noise.scale *
                                      structured_clutter_cov(sc.geometry.n_rx(), sc.noise.rho, sc.noise.phase_step));
    }

    inline LocalizeOptions localize_options(const Scenario &sc, unsigned threads)
    {
        if (!sc.estimator)
            throw ConfigError("config: missing required field 'estimator'");
        LocalizeOptions o;
        o.criterion = sc.estimator->criterion;
        o.k_max = sc.estimator->k_max;
        o.epsilon = sc.estimator->epsilon;
        o.schedule = sc.estimator->schedule;
        o.threads = threads;
        return o;
    }

    inline SweepSpec sweep_spec(const Scenario &sc, unsigned threads, std::optional<std::uint64_t> seed_override = {})
    {
        if (!sc.sweep)
            throw ConfigError("config: missing required field 'sweep'");
        SweepSpec s(sc.geometry, sc.scene, build_waveform(sc));
        s.noise = sc.noise.structured ? NoiseShape::clutter(sc.noise.rho, sc.noise.phase_step) : NoiseShape::wgn();
        s.snr_db = sc.sweep->snr_db;
        s.trials = sc.sweep->trials;
        s.estimators = sc.sweep->estimators;
        s.modes = sc.sweep->modes;
        s.base_seed = seed_override.value_or(sc.sweep->base_seed);
        s.localize = localize_options(sc, 1);
        s.snr_reference = sc.sweep->snr_reference;
        s.threads = threads;
        return s;
    }

} // namespace nfloc

#endif
