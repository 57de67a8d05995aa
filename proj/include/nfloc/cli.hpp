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

#ifndef NFLOC_CLI_HPP
#define NFLOC_CLI_HPP

#include "nfloc/config.hpp"
#include "nfloc/io.hpp"

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace nfloc::cli
{
    enum ExitCode : int
    {
        exit_ok = 0,
        exit_config = 2,
        exit_numerical = 3,
        exit_io = 4
    };

    struct DistanceSweep
    {
        double start = 0.0;
        double stop = 0.0;
        int count = 0;

        std::vector<double> values() const
        {
            std::vector<double> d(static_cast<std::size_t>(count));
            for (int i = 0; i < count; ++i)
                d[static_cast<std::size_t>(i)] =
                    count == 1 ? start : start + (stop - start) * static_cast<double>(i) / (count - 1);
            return d;
        }
    };

    // "start:stop:count", e.g. "1:50:50".
    inline DistanceSweep parse_distance_sweep(const std::string &s)
    {
        DistanceSweep d;
        const auto a = s.find(':');
        const auto b = a == std::string::npos ? std::string::npos : s.find(':', a + 1);
        if (b == std::string::npos)
            throw ConfigError("--distance-sweep: expected start:stop:count");
        const auto num = [&](const std::string &t) {
            double v = 0.0;
            const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
            if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
                throw ConfigError("--distance-sweep: '" + t + "' is not a number");
            return v;
        };
        d.start = num(s.substr(0, a));
        d.stop = num(s.substr(a + 1, b - a - 1));
        const double c = num(s.substr(b + 1));
        if (c < 1 || c != std::floor(c) || c > 1e7)
            throw ConfigError("--distance-sweep: count must be a positive integer");
        d.count = static_cast<int>(c);
        if (!(d.start > 0.0) || !(d.stop > 0.0))
            throw ConfigError("--distance-sweep: distances must be positive");
        return d;
    }

    inline std::vector<AmplitudeMode> parse_modes(const std::string &list, const Scenario &sc)
    {
        std::vector<AmplitudeMode> modes;
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            if (item == "exact")
                modes.push_back(AmplitudeMode::exact());
            else if (item == "constant")
                modes.push_back(sc.mode.is_exact()
                                    ? AmplitudeMode::constant(sc.geometry.rx_centroid(), sc.geometry.tx_centroid())
                                    : sc.mode);
            else
                throw ConfigError("--modes: unknown amplitude mode '" + item + "'");
        }
        if (modes.empty())
            throw ConfigError("--modes: at least one mode is required");
        return modes;
    }

    // Square odd n x n monostatic UPA in the xy-plane centred at the origin, one on-axis target,
    // R_X = I and white noise: the setting of the on-axis closed form and its far-distance limit.
    inline bool on_axis_monostatic(const Scenario &sc, const Vec3 &target)
    {
        const UpaConfig &a = sc.tx_array;
        return a == sc.rx_array && a.nx == a.ny && a.nx % 2 == 1 && a.center.isZero(0.0) && a.plane == Plane::xy &&
               sc.scene.size() == 1 && target.z() > 0.0 && std::abs(target.x()) <= 1e-9 * target.z() &&
               std::abs(target.y()) <= 1e-9 * target.z() &&
               sc.waveform.type == "identity" && !sc.noise.structured;
    }

    struct CrbOptions
    {
        std::optional<DistanceSweep> distances;
        std::string modes = "exact,constant";
    };

    // Distance sweep: every target moves along the ray from the Tx array centroid
    // through its configured position, to distance d from that centroid.
    inline std::string crb_csv(const Scenario &sc, const CrbOptions &opt)
    {
        const std::vector<AmplitudeMode> modes = parse_modes(opt.modes, sc);
        const TxCovariance rx = tx_covariance(sc);
        const NoiseModel noise = noise_model(sc);
        const Eigen::Index L = sc.waveform.length;
        const Vec3 origin = sc.geometry.tx_centroid();
        const bool sweep = opt.distances.has_value();

        std::ostringstream out;
        if (sweep)
            out << "d_m,";
        out << "target,crb_x,crb_y,crb_z,crb_sum,mode,method\n";

        std::vector<double> ds = sweep ? opt.distances->values() : std::vector<double>{0.0};
        for (double d : ds)
        {
            TargetScene scene = sc.scene;
            if (sweep)
            {
                Positions p = scene.positions();
                for (Eigen::Index k = 0; k < p.cols(); ++k)
                {
                    const Vec3 dir = p.col(k) - origin;
                    if (!(dir.norm() > 0.0))
                        throw ConfigError("--distance-sweep: target " + std::to_string(k + 1) +
                                          " coincides with the Tx centroid");
                    p.col(k) = origin + d * dir.normalized();
                }
                scene = scene.with_positions(p);
            }
            try
            {
                validate_scene(sc.geometry, scene);
            }
            catch (const std::invalid_argument &e)
            {
                throw ConfigError(e.what());
            }
            const auto row = [&](std::size_t k, double x, double y, double z, const char *mode, const char *method) {
                if (sweep)
                    out << format_double(d) << ',';
                out << k << ',' << format_double(x) << ',' << format_double(y) << ',' << format_double(z) << ','
                    << format_double(x + y + z) << ',' << mode << ',' << method << '\n';
            };
            for (const AmplitudeMode &mode : modes)
            {
                const CrbReport r = crb_multi(sc.geometry, scene, rx, noise, L, mode);
                for (std::size_t k = 0; k < r.targets.size(); ++k)
                    row(k, r.targets[k].x, r.targets[k].y, r.targets[k].z, mode.name(), "matrix");
                if (scene.size() == 1 && !sc.noise.structured)
                {
                    const AxisCrb c = crb_single_wgn(sc.geometry, scene, rx, sc.noise.sigma2, L, mode);
                    row(0, c.x, c.y, c.z, mode.name(), "closed_form");
                }
                const Vec3 t = scene.targets()[0].position;
                if (mode.is_exact() && on_axis_monostatic(sc, t))
                {
                    const AsymptoticCrb a =
                        crb_asymptotic_far(sc.tx_array.nx, sc.tx_array.spacing, t.z(), scene.carrier(),
                                           sc.noise.sigma2, std::norm(scene.targets()[0].reflection), L);
                    row(0, a.x, a.x, a.z, mode.name(), "asymptotic");
                }
            }
        }
        return out.str();
    }

    // Synthesized data (exact channel model) plus the truth of the scene.
    inline DataContainer synth_container(const Scenario &sc, bool noiseless, std::optional<std::uint64_t> seed)
    {
        const CMatrix x = build_waveform(sc);
        const ReceivedData data = synthesize(sc.geometry, sc.scene, Waveform(x), noise_model(sc),
                                             AmplitudeMode::exact(), seed.value_or(sc.noise.seed),
                                             SynthesisOptions{noiseless});
        DataContainer c;
        c.y = data.y;
        c.x = x;
        c.truth_positions = sc.scene.positions();
        c.truth_reflections = sc.scene.reflections();
        return c;
    }

    inline std::string synth_sidecar(const Scenario &sc, bool noiseless, std::uint64_t noise_seed)
    {
        json j;
        j["format"] = "NFLOCDAT";
        j["format_version"] = container_version;
        j["noiseless"] = noiseless;
        j["noise_seed"] = noise_seed;
        j["channel_model"] = "exact";
        j["config"] = sc.source;
        return j.dump(2) + "\n";
    }

    inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

    inline json estimate_json(const Scenario &sc, const DataContainer &data, unsigned threads)
    {
        if (data.y.rows() != sc.geometry.n_rx() || data.x.rows() != sc.geometry.n_tx())
            throw ConfigError("data file dimensions (M=" + std::to_string(data.y.rows()) +
                              ", N=" + std::to_string(data.x.rows()) + ") do not match the configured arrays (M=" +
                              std::to_string(sc.geometry.n_rx()) + ", N=" + std::to_string(sc.geometry.n_tx()) + ")");
        const LocalizeOptions opt = localize_options(sc, threads);
        const EstimationProblem problem(sc.geometry, sc.scene.carrier(), sc.mode, data.x, data.y);
        const EstimateResult r = localize(problem, opt);

        json j;
        j["criterion"] = criterion_name(r.criterion);
        j["amplitude_mode"] = sc.mode.name();
        j["converged"] = r.converged;
        j["evaluations"] = r.evaluations;
        json pos = json::array(), coef = json::array();
        for (Eigen::Index k = 0; k < r.positions.cols(); ++k)
        {
            pos.push_back(json::array({r.positions(0, k), r.positions(1, k), r.positions(2, k)}));
            coef.push_back(complex_json(r.coefficients(k)));
        }
        j["positions_m"] = pos;
        j["coefficients"] = coef;
        json trace = json::array();
        for (const TraceEntry &t : r.trace)
            trace.push_back({{"k_hat", t.k_hat}, {"iteration", t.iteration}, {"value", t.value}});
        j["trace"] = trace;
        if (r.sigma2_hat)
            j["sigma2_hat"] = *r.sigma2_hat;
        if (r.q_hat)
        {
            json q = json::array();
            for (Eigen::Index a = 0; a < r.q_hat->rows(); ++a)
            {
                json rowj = json::array();
                for (Eigen::Index b = 0; b < r.q_hat->cols(); ++b)
                    rowj.push_back(complex_json((*r.q_hat)(a, b)));
                q.push_back(rowj);
            }
            j["q_hat"] = q;
        }
        if (data.has_truth() && data.truth_positions.cols() == r.positions.cols())
        {
            const auto perm = match_targets(r.positions, data.truth_positions);
            json m = json::array();
            for (Eigen::Index k = 0; k < data.truth_positions.cols(); ++k)
            {
                const Eigen::Index e = perm[static_cast<std::size_t>(k)];
                const Vec3 diff = r.positions.col(e) - data.truth_positions.col(k);
                m.push_back({{"truth", k},
                             {"estimate", e},
                             {"error_m", json::array({diff.x(), diff.y(), diff.z()})},
                             {"squared_error_m2", diff.squaredNorm()}});
            }
            j["matched"] = m;
        }
        return j;
    }

    inline constexpr const char *sweep_header =
        "snr_db,sigma2,estimator,amplitude_mode,target,mse_m2,crb_m2,trials_used,failed_trials";

    inline std::string sweep_row(const SweepRecord &r)
    {
        std::ostringstream o;
        o << format_double(r.snr_db) << ',' << format_double(r.sigma2) << ',' << criterion_name(r.estimator) << ','
          << r.amplitude_mode << ',' << r.target << ',' << format_double(r.mse) << ',' << format_double(r.crb) << ','
          << r.trials_used << ',' << r.failed_trials;
        return o.str();
    }

    // Streams the sweep CSV; each record is written and flushed as it completes.
    inline void run_sweep(const SweepSpec &spec, std::ostream &out)
    {
        out << sweep_header << '\n';
        out.flush();
        mse_sweep(spec, [&](const SweepRecord &r) {
            out << sweep_row(r) << '\n';
            out.flush();
        });
    }

} // namespace nfloc::cli

#endif
