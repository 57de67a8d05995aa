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

#ifndef NFLOC_CRB_HPP
#define NFLOC_CRB_HPP

#include "nfloc/channel.hpp"
#include "nfloc/synthesis.hpp"
#include "nfloc/waveform.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <array>
#include <limits>
#include <vector>

namespace nfloc
{
    // Fisher information of theta = [x_1..x_K, y_1..y_K, z_1..z_K, bR_1..bR_K, bI_1..bI_K].
    struct FimResult
    {
        RMatrix F;                                  // 5K x 5K
        std::array<std::array<CMatrix, 3>, 3> f_uv; // position blocks (u, v in x, y, z)
        std::array<CMatrix, 3> f_ub;                // position / reflection blocks
        CMatrix f_bb;                               // reflection block
        Eigen::Index K = 0;
        Eigen::Index L = 0;
    };

    struct AxisCrb
    {
        double x = 0.0;
        double y = 0.0;
        double z = 0.0;
        double sum() const noexcept { return x + y + z; }
    };

    struct CrbReport
    {
        RMatrix C; // F^{-1}
        std::vector<AxisCrb> targets;
        double fim_condition_number = 0.0;
    };

    namespace detail
    {
        // X (.) (B^* Y B): entry (k, j) is X_kj conj(b_k) Y_kj b_j.
        inline CMatrix weighted_hadamard(const CMatrix &x, const CMatrix &y, const CVector &b)
        {
            return x.cwiseProduct(b.conjugate().asDiagonal() * y * b.asDiagonal());
        }
    } // namespace detail

    // FIM of the deterministic-coefficient model Y = A diag(b) V^T X + Z, Z ~ CN(0, Q).
    // Only the mean-derivative term contributes to the theta block.
    inline FimResult fim_multi(const ArrayGeometry &geometry, const TargetScene &scene, const TxCovariance &rx,
                               const NoiseModel &noise, Eigen::Index L, const AmplitudeMode &mode)
    {
        if (L < 1)
            throw std::invalid_argument("fim_multi: L must be at least 1");
        if (rx.size() != geometry.n_tx())
            throw std::invalid_argument("fim_multi: R_X dimension does not match the Tx array");
        validate_scene(geometry, scene);
        const Eigen::Index K = static_cast<Eigen::Index>(scene.size());
        const CVector b = effective_reflections(scene, mode);
        for (Eigen::Index k = 0; k < K; ++k)
            if (b(k) == cplx(0.0, 0.0))
                throw DegenerateSceneError("fim_multi: target " + std::to_string(k + 1) +
                                           " has zero reflection coefficient");

        const SteeringBundle sb = steering_bundle(geometry, scene, mode);
        const Eigen::Index M = geometry.n_rx();
        const Eigen::Index N = geometry.n_tx();

        // Stacked [A, dA_x, dA_y, dA_z] and [V, dV_x, dV_y, dV_z].
        CMatrix as(M, 4 * K), vs(N, 4 * K);
        as.leftCols(K) = sb.rx;
        vs.leftCols(K) = sb.tx;
        for (int u = 0; u < 3; ++u)
        {
            as.middleCols((u + 1) * K, K) = sb.d_rx[static_cast<std::size_t>(u)];
            vs.middleCols((u + 1) * K, K) = sb.d_tx[static_cast<std::size_t>(u)];
        }
        const CMatrix ga = noise.inv_form(as, as);
        const CMatrix gv = rx.conj_form(vs, vs);
        auto GA = [&](int i, int j) { return ga.block(i * K, j * K, K, K); };
        auto GV = [&](int i, int j) { return gv.block(i * K, j * K, K, K); };

        FimResult out;
        out.K = K;
        out.L = L;
        const double ld = static_cast<double>(L);
        using detail::weighted_hadamard;
        for (int u = 0; u < 3; ++u)
        {
            for (int v = 0; v < 3; ++v)
            {
                out.f_uv[u][v] = ld * (weighted_hadamard(GA(u + 1, v + 1), GV(0, 0), b) +
                                       weighted_hadamard(GA(u + 1, 0), GV(0, v + 1), b) +
                                       weighted_hadamard(GA(0, v + 1), GV(u + 1, 0), b) +
                                       weighted_hadamard(GA(0, 0), GV(u + 1, v + 1), b));
            }
            // Derivative w.r.t. b_j carries no factor b_j.
            out.f_ub[u] = ld * (GA(u + 1, 0).cwiseProduct(b.conjugate().asDiagonal() * GV(0, 0)) +
                                GA(0, 0).cwiseProduct(b.conjugate().asDiagonal() * GV(u + 1, 0)));
        }
        out.f_bb = ld * GA(0, 0).cwiseProduct(GV(0, 0));

        RMatrix &F = out.F;
        F.setZero(5 * K, 5 * K);
        for (int u = 0; u < 3; ++u)
        {
            for (int v = 0; v < 3; ++v)
                F.block(u * K, v * K, K, K) = 2.0 * out.f_uv[u][v].real();
            F.block(u * K, 3 * K, K, K) = 2.0 * out.f_ub[u].real();
            F.block(u * K, 4 * K, K, K) = -2.0 * out.f_ub[u].imag();
            F.block(3 * K, u * K, K, K) = F.block(u * K, 3 * K, K, K).transpose();
            F.block(4 * K, u * K, K, K) = F.block(u * K, 4 * K, K, K).transpose();
        }
        F.block(3 * K, 3 * K, K, K) = 2.0 * out.f_bb.real();
        F.block(3 * K, 4 * K, K, K) = -2.0 * out.f_bb.imag();
        F.block(4 * K, 3 * K, K, K) = 2.0 * out.f_bb.imag();
        F.block(4 * K, 4 * K, K, K) = 2.0 * out.f_bb.real();
        if (!F.allFinite())
            throw NumericalError("fim_multi: non-finite Fisher information");
        return out;
    }

    // Condition number of F after symmetric Jacobi scaling D^{-1/2} F D^{-1/2}, D = diag(F).
    inline double fim_condition_number(const RMatrix &F)
    {
        const RVector d = F.diagonal();
        if ((d.array() <= 0.0).any())
            return std::numeric_limits<double>::infinity();
        const RVector s = d.cwiseSqrt().cwiseInverse();
        const RMatrix e = s.asDiagonal() * F * s.asDiagonal();
        Eigen::SelfAdjointEigenSolver<RMatrix> eig(0.5 * (e + e.transpose()), Eigen::EigenvaluesOnly);
        const double lmin = eig.eigenvalues().minCoeff();
        const double lmax = eig.eigenvalues().maxCoeff();
        if (!(lmin > 0.0))
            return std::numeric_limits<double>::infinity();
        return lmax / lmin;
    }

    inline CrbReport crb_from_fim(const RMatrix &F, Eigen::Index K)
    {
        if (F.rows() != 5 * K || F.cols() != 5 * K)
            throw std::invalid_argument("crb_from_fim: F must be 5K x 5K");
        CrbReport rep;
        rep.fim_condition_number = fim_condition_number(F);
        if (!(rep.fim_condition_number < 1e12))
            throw SingularFimError("Fisher information is numerically singular (condition number " +
                                       std::to_string(rep.fim_condition_number) + "); scene is not identifiable",
                                   rep.fim_condition_number);

        const Eigen::Index n = F.rows();
        const RVector s = F.diagonal().cwiseSqrt().cwiseInverse();
        const RMatrix e = s.asDiagonal() * (0.5 * (F + F.transpose())) * s.asDiagonal();
        const RMatrix I = RMatrix::Identity(n, n);
        RMatrix inv;
        Eigen::LLT<RMatrix> llt(e);
        if (llt.info() == Eigen::Success)
            inv = llt.solve(I);
        else
            inv = Eigen::LDLT<RMatrix>(e).solve(I);
        // One step of iterative refinement on the scaled system.
        inv += inv * (I - e * inv);
        inv = 0.5 * (inv + inv.transpose()).eval();
        rep.C = s.asDiagonal() * inv * s.asDiagonal();

        rep.targets.resize(static_cast<std::size_t>(K));
        for (Eigen::Index k = 0; k < K; ++k)
            rep.targets[static_cast<std::size_t>(k)] = {rep.C(k, k), rep.C(k + K, k + K), rep.C(k + 2 * K, k + 2 * K)};
        return rep;
    }

    inline CrbReport crb_from_fim(const FimResult &fim) { return crb_from_fim(fim.F, fim.K); }

    inline CrbReport crb_multi(const ArrayGeometry &geometry, const TargetScene &scene, const TxCovariance &rx,
                               const NoiseModel &noise, Eigen::Index L, const AmplitudeMode &mode)
    {
        return crb_from_fim(fim_multi(geometry, scene, rx, noise, L, mode));
    }

    namespace detail
    {
#if defined(__SIZEOF_FLOAT128__)
        using quad = __float128;
#else
        using quad = long double;
#endif

        inline quad quad_sqrt(quad x)
        {
            if (!(x > 0))
                return 0;
            quad y = std::sqrt(static_cast<long double>(x));
            y = (y + x / y) / 2;
            y = (y + x / y) / 2;
            return y;
        }

        struct qcplx
        {
            quad re = 0;
            quad im = 0;
        };
        inline qcplx operator+(qcplx a, qcplx b) { return {a.re + b.re, a.im + b.im}; }
        inline qcplx operator-(qcplx a, qcplx b) { return {a.re - b.re, a.im - b.im}; }
        inline qcplx operator*(qcplx a, qcplx b) { return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re}; }
        inline qcplx conj(qcplx a) { return {a.re, -a.im}; }

        using QGram = std::array<std::array<qcplx, 4>, 4>;

        // Gram matrix of [s, ds/dx, ds/dy, ds/dz] for one steering vector. With
        // ds_u = s (.) c_u the phases cancel: G(i, j) = sum_m |s_m|^2 conj(c_i,m) c_j,m.
        inline QGram phase_free_gram(const Positions &antennas, const Vec3 &target, const CarrierSpec &carrier,
                                     bool exact)
        {
            const quad lambda = static_cast<quad>(speed_of_light) / static_cast<quad>(carrier.frequency());
            const quad pi_q = static_cast<quad>(3.141592653589793238462643383279502884L);
            const quad nu = 2 * pi_q / lambda;
            const quad amp = lambda / (4 * pi_q);
            QGram g{};
            for (Eigen::Index m = 0; m < antennas.cols(); ++m)
            {
                quad diff[3];
                quad r2 = 0;
                for (int u = 0; u < 3; ++u)
                {
                    diff[u] = static_cast<quad>(antennas(u, m)) - static_cast<quad>(target(u));
                    r2 += diff[u] * diff[u];
                }
                if (!(r2 > 0))
                    throw SingularityError("steering vector: target coincides with an antenna");
                const quad r = quad_sqrt(r2);
                const quad w = exact ? amp * amp / r2 : quad(1);
                qcplx c[4];
                c[0] = {1, 0};
                for (int u = 0; u < 3; ++u)
                    c[u + 1] = {exact ? diff[u] / r2 : quad(0), nu * diff[u] / r};
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                    {
                        const qcplx t = conj(c[i]) * c[j];
                        g[i][j].re += w * t.re;
                        g[i][j].im += w * t.im;
                    }
            }
            return g;
        }

        using cld = std::complex<long double>;
        using CMatrixLd = Eigen::Matrix<cld, Eigen::Dynamic, Eigen::Dynamic>;

        // Columns [s, ds/dx, ds/dy, ds/dz] of one steering vector in long double.
        inline CMatrixLd steering_stack_ld(const Positions &antennas, const Vec3 &target, const CarrierSpec &carrier,
                                           bool exact)
        {
            const long double lambda = static_cast<long double>(speed_of_light) / carrier.frequency();
            const long double nu = 2.0L * 3.141592653589793238462643383279502884L / lambda;
            const long double amp = lambda / (4.0L * 3.141592653589793238462643383279502884L);
            CMatrixLd out(antennas.cols(), 4);
            for (Eigen::Index m = 0; m < antennas.cols(); ++m)
            {
                long double diff[3];
                long double r2 = 0.0L;
                for (int u = 0; u < 3; ++u)
                {
                    diff[u] = static_cast<long double>(antennas(u, m)) - static_cast<long double>(target(u));
                    r2 += diff[u] * diff[u];
                }
                const long double r = std::sqrt(r2);
                if (!(r > 0.0L))
                    throw SingularityError("steering vector: target coincides with an antenna");
                const cld a = std::polar(exact ? amp / r : 1.0L, -nu * r);
                out(m, 0) = a;
                for (int u = 0; u < 3; ++u)
                    out(m, u + 1) = a * cld(exact ? diff[u] / r2 : 0.0L, nu * diff[u] / r);
            }
            return out;
        }

        // scale * adj(D) / det(D), diagonal only.
        inline AxisCrb crb_from_reduced(const quad D[3][3], quad scale)
        {
            const quad c00 = D[1][1] * D[2][2] - D[1][2] * D[1][2];
            const quad c11 = D[0][0] * D[2][2] - D[0][2] * D[0][2];
            const quad c22 = D[0][0] * D[1][1] - D[0][1] * D[0][1];
            const quad det = D[0][0] * c00 - D[0][1] * (D[0][1] * D[2][2] - D[1][2] * D[0][2]) +
                             D[0][2] * (D[0][1] * D[1][2] - D[1][1] * D[0][2]);
            if (!(det > 0))
                throw SingularFimError("closed-form CRB: reduced information matrix is singular",
                                       std::numeric_limits<double>::infinity());
            return {static_cast<double>(scale * c00 / det), static_cast<double>(scale * c11 / det),
                    static_cast<double>(scale * c22 / det)};
        }
    } // namespace detail

    // Single-target CRB under WGN from steering vectors and derivatives only
    // (3x3 reduced information matrix, no 5x5 inversion). The inner products
    // are formed in extended precision because the z entry is a small
    // difference of large terms once the target is far from the arrays.
    inline AxisCrb crb_single_wgn(const ArrayGeometry &geometry, const TargetScene &scene, const TxCovariance &rx,
                                  double sigma2, Eigen::Index L, const AmplitudeMode &mode)
    {
        if (scene.size() != 1)
            throw std::invalid_argument("crb_single_wgn: exactly one target is required");
        if (!(sigma2 > 0.0))
            throw std::invalid_argument("crb_single_wgn: sigma2 must be positive");
        if (L < 1)
            throw std::invalid_argument("crb_single_wgn: L must be at least 1");
        if (rx.size() != geometry.n_tx())
            throw std::invalid_argument("crb_single_wgn: R_X dimension does not match the Tx array");
        validate_scene(geometry, scene);
        using detail::qcplx;
        using detail::quad;
        const cplx b = effective_reflections(scene, mode)(0);
        const quad b2 = static_cast<quad>(b.real()) * b.real() + static_cast<quad>(b.imag()) * b.imag();
        if (!(b2 > 0))
            throw DegenerateSceneError("crb_single_wgn: zero reflection coefficient");

        const Vec3 &t = scene.targets()[0].position;
        const detail::QGram ga = detail::phase_free_gram(geometry.rx(), t, scene.carrier(), mode.is_exact());
        detail::QGram gv;
        if (rx.form() == TxCovariance::Form::Identity)
        {
            gv = detail::phase_free_gram(geometry.tx(), t, scene.carrier(), mode.is_exact());
            const quad p = static_cast<quad>(rx.to_dense()(0, 0).real());
            for (auto &row : gv)
                for (auto &e : row)
                    e = {e.re * p, e.im * p};
        }
        else
        {
            const detail::CMatrixLd vs = detail::steering_stack_ld(geometry.tx(), t, scene.carrier(), mode.is_exact());
            const detail::CMatrixLd g = rx.conj_form(vs, vs);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    gv[i][j] = {static_cast<quad>(g(i, j).real()), static_cast<quad>(g(i, j).imag())};
        }

        // f~_uv, and h_u = da_u^H a v^H R^* v + |a|^2 dv_u^H R^* v so that f^R_uv = h_u conj(h_v) / n0.
        const quad n0 = (ga[0][0] * gv[0][0]).re;
        qcplx h[3];
        for (int u = 0; u < 3; ++u)
            h[u] = ga[u + 1][0] * gv[0][0] + ga[0][0] * gv[u + 1][0];
        quad D[3][3];
        for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v)
            {
                const qcplx ft = ga[u + 1][v + 1] * gv[0][0] + ga[u + 1][0] * gv[0][v + 1] +
                                 ga[0][v + 1] * gv[u + 1][0] + ga[0][0] * gv[u + 1][v + 1];
                D[u][v] = ((ft * qcplx{n0, 0}) - h[u] * detail::conj(h[v])).re / n0;
            }
        const quad scale = static_cast<quad>(sigma2) / (2 * b2 * static_cast<quad>(L));
        return detail::crb_from_reduced(D, scale);
    }

    // Monostatic square n x n UPA (spacing s) centred on the z-axis, R_X = I, target at (0, 0, d).
    // Lattice sums evaluated in extended precision.
    inline AxisCrb crb_monostatic_axis(int n, double s, double d, const CarrierSpec &carrier, double sigma2,
                                       double b_mag2, Eigen::Index L)
    {
        if (n < 1 || n % 2 == 0)
            throw std::invalid_argument("crb_monostatic_axis: n must be a positive odd integer");
        if (!(s > 0.0) || !(d > 0.0) || !(sigma2 > 0.0) || !(b_mag2 > 0.0) || L < 1)
            throw std::invalid_argument("crb_monostatic_axis: s, d, sigma2, |b|^2 and L must be positive");
        if (n == 1)
            throw NumericalError("crb_monostatic_axis: a single antenna cannot resolve the transverse coordinates");

        using detail::quad;
        const quad pi_q = static_cast<quad>(3.141592653589793238462643383279502884L);
        const quad nu = 2 * pi_q / (static_cast<quad>(speed_of_light) / static_cast<quad>(carrier.frequency()));
        const quad dd = d;
        const quad d2 = dd * dd;
        const quad s2 = static_cast<quad>(s) * static_cast<quad>(s);
        const int h = (n - 1) / 2;

        quad sum_a = 0, d1x = 0, d2x = 0, d1z = 0, d2z = 0, d3z = 0;
        for (int i = 0; i <= h; ++i)
            for (int k = 1; k <= h; ++k)
            {
                const quad q = d2 + static_cast<quad>(i * i + k * k) * s2;
                sum_a += 1 / q;
                d1z += 1 / (q * q * q);
                d2z += 1 / (q * q);
                d3z += 1 / (q * detail::quad_sqrt(q));
            }
        for (int i = 1; i <= h; ++i)
            for (int k = 1; k <= h; ++k)
            {
                const quad q = d2 + static_cast<quad>(i * i + k * k) * s2;
                const quad k2s2 = static_cast<quad>(k * k) * s2;
                d1x += 4 * k2s2 / (q * q * q);
                d2x += 4 * k2s2 / (q * q);
            }
        for (int k = 1; k <= h; ++k)
        {
            const quad q = d2 + static_cast<quad>(k * k) * s2;
            const quad k2s2 = static_cast<quad>(k * k) * s2;
            d1x += 2 * k2s2 / (q * q * q);
            d2x += 2 * k2s2 / (q * q);
        }
        d1z = 1 / (d2 * d2 * d2) + 4 * d1z;
        d2z = 1 / (d2 * d2) + 4 * d2z;
        d3z = 1 / (d2 * dd) + 4 * d3z;

        const quad nu2 = nu * nu;
        const quad a2 = (1 / d2 + 4 * sum_a) / (4 * nu2);
        const quad ax2 = (d1x + nu2 * d2x) / (4 * nu2);
        const quad az2 = d2 / (4 * nu2) * (d1z + nu2 * d2z);
        // |da_z^H a|^2 with da_z^H a = d / (4 nu^2) (-D2z + j nu D3z)
        const quad cross2 = d2 / (16 * nu2 * nu2) * (d2z * d2z + nu2 * d3z * d3z);

        const quad scale = static_cast<quad>(sigma2) / (4 * static_cast<quad>(b_mag2) * static_cast<quad>(L));
        const quad cx = scale / (a2 * ax2);
        const quad zden = a2 * az2 - cross2;
        if (!(zden > 0))
            throw NumericalError("crb_monostatic_axis: z information vanished to rounding");
        const quad cz = scale / zden;
        return {static_cast<double>(cx), static_cast<double>(cx), static_cast<double>(cz)};
    }

    struct AsymptoticCrb
    {
        double x = 0.0;
        double z = 0.0;
    };

    // Far-distance approximations of crb_monostatic_axis (d much larger than the aperture).
    inline AsymptoticCrb crb_asymptotic_far(int n, double s, double d, const CarrierSpec &carrier, double sigma2,
                                            double b_mag2, Eigen::Index L)
    {
        if (n < 1)
            throw std::invalid_argument("crb_asymptotic_far: n must be positive");
        if (!(s > 0.0) || !(d > 0.0) || !(sigma2 > 0.0) || !(b_mag2 > 0.0) || L < 1)
            throw std::invalid_argument("crb_asymptotic_far: s, d, sigma2, |b|^2 and L must be positive");
        const double n2 = static_cast<double>(n) * n;
        if (n2 - 1.0 == 0.0 || n2 - 4.0 == 0.0)
            throw NumericalError("crb_asymptotic_far: approximation undefined for n = " + std::to_string(n));
        const double nu = carrier.wavenumber();
        const double c = sigma2 / (b_mag2 * static_cast<double>(L));
        const double d2 = d * d;
        const double d6 = d2 * d2 * d2;
        const double s2 = s * s;
        AsymptoticCrb out;
        out.x = 48.0 * c * nu * nu * d6 / ((n2 - 1.0) * n2 * n2 * s2);
        out.z = 1440.0 * c * nu * nu * d6 * d2 / ((n2 - 1.0) * n2 * n2 * (n2 - 4.0) * s2 * s2);
        return out;
    }

} // namespace nfloc

#endif
