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

#ifndef NFLOC_CHANNEL_HPP
#define NFLOC_CHANNEL_HPP

#include "nfloc/geometry.hpp"

#include <array>

namespace nfloc
{
    // Exact: free-space amplitude lambda / (4 pi r) per antenna.
    // ConstantAtReference: unit amplitude per antenna; the round-trip path loss
    // towards the two reference points is folded into the reflection coefficient.
    struct AmplitudeMode
    {
        enum class Kind
        {
            Exact,
            ConstantAtReference
        };

        Kind kind = Kind::Exact;
        Vec3 reference_rx = Vec3::Zero();
        Vec3 reference_tx = Vec3::Zero();

        static AmplitudeMode exact() { return {}; }
        static AmplitudeMode constant(const Vec3 &ref_rx, const Vec3 &ref_tx)
        {
            if (!all_finite(ref_rx) || !all_finite(ref_tx))
                throw std::invalid_argument("AmplitudeMode: reference points must be finite");
            return {Kind::ConstantAtReference, ref_rx, ref_tx};
        }

        bool is_exact() const noexcept { return kind == Kind::Exact; }
        const char *name() const noexcept { return is_exact() ? "exact" : "constant"; }
    };

    namespace detail
    {
        // out(m) = alpha_m exp(-j nu r_m), r_m = |p_m - target|.
        inline void steering_into(const Positions &antennas, const Vec3 &target, const CarrierSpec &carrier,
                                  bool exact, Eigen::Ref<CVector> out)
        {
            const double nu = carrier.wavenumber();
            const double amp = carrier.wavelength() / (4.0 * pi);
            for (Eigen::Index m = 0; m < antennas.cols(); ++m)
            {
                const double r = (antennas.col(m) - target).norm();
                if (!(r > 0.0))
                    throw SingularityError("steering vector: target coincides with an antenna");
                out(m) = std::polar(exact ? amp / r : 1.0, -nu * r);
            }
        }

        // Derivatives of the steering vector w.r.t. the target's x, y and z coordinates.
        inline void steering_derivatives_into(const Positions &antennas, const Vec3 &target,
                                              const CarrierSpec &carrier, bool exact, const CVector &steer,
                                              std::array<Eigen::Ref<CVector>, 3> out)
        {
            const double nu = carrier.wavenumber();
            for (Eigen::Index m = 0; m < antennas.cols(); ++m)
            {
                const Vec3 diff = antennas.col(m) - target;
                const double r = diff.norm();
                const double r2 = r * r;
                for (int u = 0; u < 3; ++u)
                {
                    const double re = exact ? diff(u) / r2 : 0.0;
                    out[static_cast<std::size_t>(u)](m) = steer(m) * cplx(re, nu * diff(u) / r);
                }
            }
        }

        inline CVector steering(const Positions &antennas, const Vec3 &target, const CarrierSpec &carrier,
                                const AmplitudeMode &mode)
        {
            CVector out(antennas.cols());
            steering_into(antennas, target, carrier, mode.is_exact(), out);
            return out;
        }
    } // namespace detail

    inline CVector steering_rx(const ArrayGeometry &geometry, const Vec3 &target, const CarrierSpec &carrier,
                               const AmplitudeMode &mode = AmplitudeMode::exact())
    {
        return detail::steering(geometry.rx(), target, carrier, mode);
    }

    inline CVector steering_tx(const ArrayGeometry &geometry, const Vec3 &target, const CarrierSpec &carrier,
                               const AmplitudeMode &mode = AmplitudeMode::exact())
    {
        return detail::steering(geometry.tx(), target, carrier, mode);
    }

    // Steering matrices (one column per target) and their coordinate derivatives.
    // d_rx[u].col(k) is the derivative of a(l_k) w.r.t. the u-th coordinate of l_k.
    struct SteeringBundle
    {
        CMatrix rx;                  // A, M x K
        CMatrix tx;                  // V, N x K
        std::array<CMatrix, 3> d_rx; // dA/dx, dA/dy, dA/dz
        std::array<CMatrix, 3> d_tx; // dV/dx, dV/dy, dV/dz
        AmplitudeMode mode;
    };

    inline SteeringBundle steering_bundle(const ArrayGeometry &geometry, const Positions &targets,
                                          const CarrierSpec &carrier, const AmplitudeMode &mode)
    {
        const Eigen::Index K = targets.cols();
        const Eigen::Index M = geometry.n_rx();
        const Eigen::Index N = geometry.n_tx();
        SteeringBundle b;
        b.mode = mode;
        b.rx.resize(M, K);
        b.tx.resize(N, K);
        for (int u = 0; u < 3; ++u)
        {
            b.d_rx[static_cast<std::size_t>(u)].resize(M, K);
            b.d_tx[static_cast<std::size_t>(u)].resize(N, K);
        }
        for (Eigen::Index k = 0; k < K; ++k)
        {
            const Vec3 t = targets.col(k);
            CVector a(M), v(N), da0(M), da1(M), da2(M), dv0(N), dv1(N), dv2(N);
            detail::steering_into(geometry.rx(), t, carrier, mode.is_exact(), a);
            detail::steering_into(geometry.tx(), t, carrier, mode.is_exact(), v);
            detail::steering_derivatives_into(geometry.rx(), t, carrier, mode.is_exact(), a, {da0, da1, da2});
            detail::steering_derivatives_into(geometry.tx(), t, carrier, mode.is_exact(), v, {dv0, dv1, dv2});
            b.rx.col(k) = a;
            b.tx.col(k) = v;
            b.d_rx[0].col(k) = da0;
            b.d_rx[1].col(k) = da1;
            b.d_rx[2].col(k) = da2;
            b.d_tx[0].col(k) = dv0;
            b.d_tx[1].col(k) = dv1;
            b.d_tx[2].col(k) = dv2;
        }
        return b;
    }

    inline SteeringBundle steering_bundle(const ArrayGeometry &geometry, const TargetScene &scene,
                                          const AmplitudeMode &mode)
    {
        return steering_bundle(geometry, scene.positions(), scene.carrier(), mode);
    }

    // Reflection coefficients as seen by the channel model of `mode`: b itself for
    // Exact, b scaled by the round-trip path loss to the reference points otherwise.
    inline CVector effective_reflections(const TargetScene &scene, const AmplitudeMode &mode)
    {
        CVector b = scene.reflections();
        if (mode.is_exact())
            return b;
        const double amp = scene.carrier().wavelength() / (4.0 * pi);
        for (std::size_t k = 0; k < scene.size(); ++k)
        {
            const Vec3 &p = scene.targets()[k].position;
            const double dr = (mode.reference_rx - p).norm();
            const double dt = (mode.reference_tx - p).norm();
            if (!(dr > 0.0) || !(dt > 0.0))
                throw SingularityError("constant-amplitude model: target coincides with a reference point");
            b(static_cast<Eigen::Index>(k)) *= amp * amp / (dr * dt);
        }
        return b;
    }

} // namespace nfloc

#endif
