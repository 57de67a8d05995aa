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

#ifndef NFLOC_HARNESS_HPP
#define NFLOC_HARNESS_HPP

#include "nfloc/crb.hpp"
#include "nfloc/estimators.hpp"
#include "nfloc/synthesis.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nfloc
{
    enum class SnrReference
    {
        Received, // |A diag(b) V^T X|_F^2 / (L M)
        Nominal   // L |A diag(b) V^T|_F^2 / (L M), i.e. R_X = I
    };

    inline SnrReference snr_reference_from_string(const std::string &s)
    {
        if (s == "received")
            return SnrReference::Received;
        if (s == "nominal")
            return SnrReference::Nominal;
        throw std::invalid_argument("unknown snr_reference '" + s + "' (expected received or nominal)");
    }

    // Noise family; the overall level is set per SNR point.
    struct NoiseShape
    {
        bool structured = false;
        double rho = 0.0;
        double phase_step = 0.0;

        static NoiseShape wgn() { return {}; }
        static NoiseShape clutter(double rho, double phase_step) { return {true, rho, phase_step}; }

        // Noise with average per-antenna power tr(Q)/M = sigma2.
        NoiseModel at_power(Eigen::Index m, double sigma2) const
        {
            if (!structured)
                return NoiseModel::wgn(sigma2);
            const CMatrix q = structured_clutter_cov(m, rho, phase_step);
            const double avg = q.diagonal().real().mean();
            return NoiseModel::structured(q * (sigma2 / avg));
        }
    };

    struct SweepSpec
    {
        SweepSpec(ArrayGeometry g, TargetScene s, CMatrix waveform)
            : geometry(std::move(g)), scene(std::move(s)), x(std::move(waveform))
        {
        }

        ArrayGeometry geometry;
        TargetScene scene;
        CMatrix x; // fixed for the whole sweep
        NoiseShape noise = NoiseShape::wgn();
        std::vector<double> snr_db;
        int trials = 100;
        std::vector<Criterion> estimators{Criterion::Aco, Criterion::CoWgn};
        std::vector<AmplitudeMode> modes{AmplitudeMode::exact()};
        std::uint64_t base_seed = 0;
        LocalizeOptions localize; // criterion is overridden per estimator
        SnrReference snr_reference = SnrReference::Received;
        unsigned threads = 1;     // trial-level workers
        double max_failure_fraction = 0.2;

        void validate() const
        {
            validate_scene(geometry, scene);
            if (x.rows() != geometry.n_tx() || x.cols() < 1)
                throw std::invalid_argument("SweepSpec: waveform does not match the Tx array");
            if (snr_db.empty())
                throw std::invalid_argument("SweepSpec: SNR grid is empty");
            for (std::size_t i = 0; i < snr_db.size(); ++i)
            {
                if (!std::isfinite(snr_db[i]))
                    throw std::invalid_argument("SweepSpec: non-finite SNR");
                if (i > 0 && !(snr_db[i] > snr_db[i - 1]))
                    throw std::invalid_argument("SweepSpec: SNR grid must be strictly increasing");
            }
            if (trials < 1)
                throw std::invalid_argument("SweepSpec: trials must be at least 1");
            if (estimators.empty() || modes.empty())
                throw std::invalid_argument("SweepSpec: at least one estimator and one amplitude mode are required");
            if (localize.k_max != static_cast<int>(scene.size()))
                throw std::invalid_argument("SweepSpec: k_max must equal the number of true targets");
        }
    };

    struct SweepRecord
    {
        double snr_db = 0.0;
        double sigma2 = 0.0; // tr(Q)/M at this point
        Criterion estimator = Criterion::Aco;
        std::string amplitude_mode;
        int target = 0;
        double mse = 0.0; // m^2, summed over x, y, z
        double crb = 0.0; // m^2, crb_x + crb_y + crb_z
        int trials_used = 0;
        int failed_trials = 0;
    };

    // Noise level for a given SNR (dB); the signal is always the exact-amplitude model.
    inline double noise_power_for_snr(const SweepSpec &spec, double snr_db)
    {
        const AmplitudeMode exact = AmplitudeMode::exact();
        double signal = 0.0;
        const double L = static_cast<double>(spec.x.cols());
        const double M = static_cast<double>(spec.geometry.n_rx());
        if (spec.snr_reference == SnrReference::Received)
        {
            signal = signal_matrix(spec.geometry, spec.scene, spec.x, exact).squaredNorm() / (L * M);
        }
        else
        {
            const CMatrix eye = CMatrix::Identity(spec.geometry.n_tx(), spec.geometry.n_tx());
            signal = signal_matrix(spec.geometry, spec.scene, eye, exact).squaredNorm() / M;
        }
        if (!(signal > 0.0))
            throw DegenerateSceneError("noise_power_for_snr: zero signal power");
        return signal / std::pow(10.0, snr_db / 10.0);
    }

    // Squared position errors per true target for one (estimator, mode) run, or empty on failure.
    struct TrialRun
    {
        Criterion estimator = Criterion::Aco;
        std::string amplitude_mode;
        std::optional<std::vector<double>> squared_errors;
        std::string failure;
    };

    struct TrialOutcome
    {
        std::vector<TrialRun> runs; // estimator-major, then mode, in spec order
    };

    inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t snr_index, std::size_t trial_index)
    {
        return derive_seed(base_seed, {static_cast<std::uint64_t>(snr_index), static_cast<std::uint64_t>(trial_index)});
    }

    // One Monte Carlo trial: synthesize (exact model) and run every requested estimator/mode on the same Y.
    inline TrialOutcome run_trial(const SweepSpec &spec, std::size_t snr_index, std::size_t trial_index)
    {
        const double sigma2 = noise_power_for_snr(spec, spec.snr_db.at(snr_index));
        const NoiseModel noise = spec.noise.at_power(spec.geometry.n_rx(), sigma2);
        const ReceivedData data = synthesize(spec.geometry, spec.scene, Waveform(spec.x), noise, AmplitudeMode::exact(),
                                             trial_seed(spec.base_seed, snr_index, trial_index));
        const Positions truth = spec.scene.positions();
        TrialOutcome out;
        for (const Criterion est : spec.estimators)
            for (const AmplitudeMode &mode : spec.modes)
            {
                TrialRun run;
                run.estimator = est;
                run.amplitude_mode = mode.name();
                try
                {
                    const EstimationProblem problem(spec.geometry, spec.scene.carrier(), mode, spec.x, data.y);
                    LocalizeOptions opt = spec.localize;
                    opt.criterion = est;
                    opt.threads = 1;
                    const EstimateResult r = localize(problem, opt);
                    const auto perm = match_targets(r.positions, truth);
                    std::vector<double> e(static_cast<std::size_t>(truth.cols()));
                    for (Eigen::Index k = 0; k < truth.cols(); ++k)
                        e[static_cast<std::size_t>(k)] =
                            (r.positions.col(perm[static_cast<std::size_t>(k)]) - truth.col(k)).squaredNorm();
                    run.squared_errors = std::move(e);
                }
                catch (const NumericalError &ex)
                {
                    run.failure = ex.what();
                }
                out.runs.push_back(std::move(run));
            }
        return out;
    }

    // CRB (sum over axes) per target for the given mode at noise power sigma2.
    inline std::vector<double> crb_per_target(const SweepSpec &spec, const AmplitudeMode &mode, double sigma2)
    {
        const NoiseModel noise = spec.noise.at_power(spec.geometry.n_rx(), sigma2);
        const CrbReport r =
            crb_multi(spec.geometry, spec.scene, TxCovariance::from_snapshots(spec.x), noise, spec.x.cols(), mode);
        std::vector<double> out;
        for (const AxisCrb &t : r.targets)
            out.push_back(t.sum());
        return out;
    }

    // MSE-versus-SNR sweep. Records are emitted (and passed to on_record as they
    // complete) in SNR, estimator, mode, target order. A point where more than
    // max_failure_fraction of the trials fail aborts the sweep after its records
    // are flushed.
    inline std::vector<SweepRecord> mse_sweep(const SweepSpec &spec,
                                              const std::function<void(const SweepRecord &)> &on_record = {})
    {
        spec.validate();
        std::vector<SweepRecord> records;
        const std::size_t K = spec.scene.size();
        for (std::size_t si = 0; si < spec.snr_db.size(); ++si)
        {
            const double sigma2 = noise_power_for_snr(spec, spec.snr_db[si]);
            std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.trials));
            parallel_for(outcomes.size(), spec.threads,
                         [&](std::size_t t) { outcomes[t] = run_trial(spec, si, t); });

            bool abort = false;
            std::size_t run_index = 0;
            for (const Criterion est : spec.estimators)
                for (const AmplitudeMode &mode : spec.modes)
                {
                    const std::vector<double> crb = crb_per_target(spec, mode, sigma2);
                    std::vector<double> sum(K, 0.0);
                    int used = 0, failed = 0;
                    for (const TrialOutcome &o : outcomes)
                    {
                        const TrialRun &run = o.runs[run_index];
                        if (!run.squared_errors)
                        {
                            ++failed;
                            continue;
                        }
                        ++used;
                        for (std::size_t k = 0; k < K; ++k)
                            sum[k] += (*run.squared_errors)[k];
                    }
                    for (std::size_t k = 0; k < K; ++k)
                    {
                        SweepRecord rec;
                        rec.snr_db = spec.snr_db[si];
                        rec.sigma2 = sigma2;
                        rec.estimator = est;
                        rec.amplitude_mode = mode.name();
                        rec.target = static_cast<int>(k);
                        rec.mse = used > 0 ? sum[k] / used : std::numeric_limits<double>::quiet_NaN();
                        rec.crb = crb[k];
                        rec.trials_used = used;
                        rec.failed_trials = failed;
                        records.push_back(rec);
                        if (on_record)
                            on_record(rec);
                    }
                    if (static_cast<double>(failed) > spec.max_failure_fraction * spec.trials)
                        abort = true;
                    ++run_index;
                }
            if (abort)
                throw NumericalError("sweep aborted: more than " +
                                     std::to_string(static_cast<int>(spec.max_failure_fraction * 100)) +
                                     "% of trials failed at SNR " + std::to_string(spec.snr_db[si]) + " dB");
        }
        return records;
    }

} // namespace nfloc

#endif
