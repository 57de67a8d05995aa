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

#ifndef NFLOC_SYNTHESIS_HPP
#define NFLOC_SYNTHESIS_HPP

#include "nfloc/channel.hpp"
#include "nfloc/waveform.hpp"

#include <Eigen/Cholesky>

#include <cstdint>

namespace nfloc
{
    // Receive-side noise plus interference: sigma^2 I, or a full Hermitian PD Q.
    class NoiseModel
    {
    public:
        static NoiseModel wgn(double sigma2)
        {
            if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
                throw std::invalid_argument("NoiseModel: sigma2 must be positive and finite");
            NoiseModel n;
            n.sigma2_ = sigma2;
            return n;
        }

        static NoiseModel structured(CMatrix q)
        {
            if (q.rows() != q.cols() || q.rows() == 0)
                throw std::invalid_argument("NoiseModel: Q must be square and non-empty");
            if (!q.allFinite() || !is_hermitian(q, 1e-12))
                throw std::invalid_argument("NoiseModel: Q must be finite and Hermitian");
            NoiseModel n;
            n.white_ = false;
            n.q_ = 0.5 * (q + q.adjoint());
            Eigen::LLT<CMatrix> llt(n.q_);
            if (llt.info() != Eigen::Success)
                throw NumericalError("NoiseModel: Q is not positive definite (Cholesky failed)");
            n.chol_ = llt.matrixL();
            return n;
        }

        bool is_white() const noexcept { return white_; }
        double sigma2() const noexcept { return sigma2_; }

        // tr(Q) / M
        double average_power() const
        {
            return white_ ? sigma2_ : q_.diagonal().real().mean();
        }

        CMatrix covariance(Eigen::Index m) const
        {
            if (white_)
                return sigma2_ * CMatrix::Identity(m, m);
            require_size(m);
            return q_;
        }

        NoiseModel scaled(double c) const
        {
            if (!(c > 0.0))
                throw std::invalid_argument("NoiseModel: scale must be positive");
            if (white_)
                return wgn(sigma2_ * c);
            NoiseModel n = *this;
            n.q_ *= c;
            n.chol_ *= std::sqrt(c);
            return n;
        }

        // U^H Q^{-1} W
        CMatrix inv_form(const CMatrix &u, const CMatrix &w) const
        {
            if (white_)
                return (u.adjoint() * w) / sigma2_;
            require_size(u.rows());
            const auto lower = chol_.triangularView<Eigen::Lower>();
            const CMatrix wu = lower.solve(u);
            const CMatrix ww = lower.solve(w);
            return wu.adjoint() * ww;
        }

        // C^{-1} B where Q = C C^H.
        CMatrix whiten(const CMatrix &b) const
        {
            if (white_)
                return b / std::sqrt(sigma2_);
            require_size(b.rows());
            return chol_.triangularView<Eigen::Lower>().solve(b);
        }

        // m x l matrix with i.i.d. CN(0, Q) columns, generated as C W with W ~ CN(0, I).
        CMatrix sample(Eigen::Index m, Eigen::Index l, ComplexGaussian &gen) const
        {
            CMatrix w = gen.matrix(m, l);
            if (white_)
                return std::sqrt(sigma2_) * w;
            require_size(m);
            return chol_.triangularView<Eigen::Lower>() * w;
        }

    private:
        NoiseModel() = default;

        void require_size(Eigen::Index m) const
        {
            if (m != q_.rows())
                throw std::invalid_argument("NoiseModel: dimension mismatch with receive array");
        }

        bool white_ = true;
        double sigma2_ = 1.0;
        CMatrix q_;
        CMatrix chol_;
    };

    // Q[p, q] = rho^|p - q| exp(j (p - q) phase_step)
    inline CMatrix structured_clutter_cov(Eigen::Index m, double rho, double phase_step)
    {
        if (m < 1)
            throw std::invalid_argument("structured_clutter_cov: M must be positive");
        if (!(rho > 0.0 && rho < 1.0))
            throw std::invalid_argument("structured_clutter_cov: rho must lie in (0, 1)");
        CMatrix q(m, m);
        for (Eigen::Index p = 0; p < m; ++p)
            for (Eigen::Index c = 0; c < m; ++c)
            {
                const auto diff = static_cast<double>(p - c);
                q(p, c) = std::polar(std::pow(rho, std::abs(diff)), diff * phase_step);
            }
        return q;
    }

    struct ReceivedData
    {
        CMatrix y; // M x L
    };

    // A diag(b) V^T X for the channel model of `mode` (b replaced by the
    // path-loss-normalised coefficients in constant-amplitude mode).
    inline CMatrix signal_matrix(const ArrayGeometry &geometry, const TargetScene &scene, const CMatrix &x,
                                 const AmplitudeMode &mode)
    {
        if (x.rows() != geometry.n_tx())
            throw std::invalid_argument("waveform has " + std::to_string(x.rows()) + " rows but the Tx array has " +
                                        std::to_string(geometry.n_tx()) + " antennas");
        const Positions p = scene.positions();
        const CVector b = effective_reflections(scene, mode);
        CMatrix a(geometry.n_rx(), p.cols());
        CMatrix v(geometry.n_tx(), p.cols());
        for (Eigen::Index k = 0; k < p.cols(); ++k)
        {
            a.col(k) = detail::steering(geometry.rx(), p.col(k), scene.carrier(), mode);
            v.col(k) = detail::steering(geometry.tx(), p.col(k), scene.carrier(), mode);
        }
        return a * b.asDiagonal() * (v.transpose() * x);
    }

    struct SynthesisOptions
    {
        bool noiseless = false;
    };

    // Y = A diag(b) V^T X + Z, columns of Z i.i.d. CN(0, Q). Deterministic in `seed`.
    inline ReceivedData synthesize(const ArrayGeometry &geometry, const TargetScene &scene, const Waveform &waveform,
                                   const NoiseModel &noise, const AmplitudeMode &mode, std::uint64_t seed,
                                   SynthesisOptions options = {})
    {
        validate_scene(geometry, scene);
        ReceivedData out{signal_matrix(geometry, scene, waveform.snapshots(), mode)};
        if (!options.noiseless)
        {
            ComplexGaussian gen(seed);
            out.y += noise.sample(geometry.n_rx(), waveform.length(), gen);
        }
        if (!out.y.allFinite())
            throw NumericalError("synthesize: non-finite received sample");
        return out;
    }

} // namespace nfloc

#endif
