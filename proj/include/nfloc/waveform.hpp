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

#ifndef NFLOC_WAVEFORM_HPP
#define NFLOC_WAVEFORM_HPP

#include "nfloc/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cstdint>

namespace nfloc
{
    // Transmit covariance R_X in one of three storage forms. Only the
    // conjugate quadratic form U^H R_X^* W is needed downstream, so large
    // arrays never materialise an N x N matrix.
    class TxCovariance
    {
    public:
        enum class Form
        {
            Identity,
            Dense,
            Snapshots
        };

        static TxCovariance identity(Eigen::Index n, double power = 1.0)
        {
            TxCovariance c;
            c.form_ = Form::Identity;
            c.n_ = n;
            c.power_ = power;
            return c;
        }

        static TxCovariance dense(CMatrix r)
        {
            if (r.rows() != r.cols() || !is_hermitian(r, 1e-12))
                throw std::invalid_argument("TxCovariance: matrix must be square and Hermitian");
            TxCovariance c;
            c.form_ = Form::Dense;
            c.n_ = r.rows();
            c.data_ = std::move(r);
            return c;
        }

        // R_X = X X^H / L
        static TxCovariance from_snapshots(CMatrix x)
        {
            if (x.cols() < 1)
                throw std::invalid_argument("TxCovariance: at least one snapshot is required");
            TxCovariance c;
            c.form_ = Form::Snapshots;
            c.n_ = x.rows();
            c.data_ = std::move(x);
            return c;
        }

        Form form() const noexcept { return form_; }
        Eigen::Index size() const noexcept { return n_; }

        // U^H R_X^* W, evaluated in the scalar type of U (double or long double).
        template <class DerivedU, class DerivedW>
        auto conj_form(const Eigen::MatrixBase<DerivedU> &u, const Eigen::MatrixBase<DerivedW> &w) const
        {
            using S = typename DerivedU::Scalar;
            using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
            using Real = typename S::value_type;
            if (u.rows() != n_ || w.rows() != n_)
                throw std::invalid_argument("TxCovariance: dimension mismatch with Tx array");
            switch (form_)
            {
            case Form::Identity:
                return Mat(S(static_cast<Real>(power_)) * (u.adjoint() * w));
            case Form::Dense:
                return Mat(u.adjoint() * (data_.conjugate().template cast<S>() * w));
            case Form::Snapshots:
                break;
            }
            // R^* = X^* X^T / L  =>  U^H R^* W = (X^T U)^H (X^T W) / L
            const Mat xt = data_.transpose().template cast<S>();
            const Mat xu = xt * u;
            const Mat xw = xt * w;
            return Mat(xu.adjoint() * xw / S(static_cast<Real>(data_.cols())));
        }

        CMatrix to_dense() const
        {
            switch (form_)
            {
            case Form::Identity:
                return power_ * CMatrix::Identity(n_, n_);
            case Form::Dense:
                return data_;
            case Form::Snapshots:
                return data_ * data_.adjoint() / static_cast<double>(data_.cols());
            }
            return {};
        }

    private:
        TxCovariance() = default;
        Form form_ = Form::Identity;
        Eigen::Index n_ = 0;
        double power_ = 1.0;
        CMatrix data_;
    };

    // Transmit snapshot matrix X (N x L).
    class Waveform
    {
    public:
        explicit Waveform(CMatrix x) : x_(std::move(x))
        {
            if (x_.rows() < 1 || x_.cols() < 1)
                throw std::invalid_argument("Waveform: N and L must be at least 1");
            if (!x_.allFinite())
                throw std::invalid_argument("Waveform: non-finite sample");
        }

        const CMatrix &snapshots() const noexcept { return x_; }
        Eigen::Index n_tx() const noexcept { return x_.rows(); }
        Eigen::Index length() const noexcept { return x_.cols(); }

        CMatrix sample_covariance() const { return x_ * x_.adjoint() / static_cast<double>(x_.cols()); }
        TxCovariance covariance() const { return TxCovariance::from_snapshots(x_); }

    private:
        CMatrix x_;
    };

    // Columns i.i.d. CN(0, I). Deterministic in `seed`.
    inline Waveform isotropic_waveform(Eigen::Index n, Eigen::Index length, std::uint64_t seed)
    {
        if (n < 1 || length < 1)
            throw std::invalid_argument("isotropic_waveform: N and L must be at least 1");
        ComplexGaussian gen(seed);
        return Waveform(gen.matrix(n, length));
    }

    // F with F F^H = R for Hermitian PSD R. Cholesky when R is positive definite,
    // otherwise an eigen-factor with eigenvalues below 1e-10 * lambda_max clipped to zero.
    inline CMatrix psd_square_root(const CMatrix &r)
    {
        if (!is_hermitian(r, 1e-12))
            throw std::invalid_argument("covariance must be Hermitian");
        const CMatrix h = 0.5 * (r + r.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
        if (eig.info() != Eigen::Success)
            throw NumericalError("covariance eigendecomposition failed");
        const RVector &lambda = eig.eigenvalues();
        const double lmax = lambda.maxCoeff();
        const double lmin = lambda.minCoeff();
        const double tol = 1e-10 * std::max(lmax, 0.0);
        if (lmin < -tol)
            throw std::invalid_argument("covariance must be positive semi-definite");
        if (lmin > tol)
        {
            Eigen::LLT<CMatrix> llt(h);
            if (llt.info() == Eigen::Success)
                return llt.matrixL();
        }
        RVector root(lambda.size());
        for (Eigen::Index i = 0; i < lambda.size(); ++i)
            root(i) = lambda(i) > tol ? std::sqrt(lambda(i)) : 0.0;
        return eig.eigenvectors() * root.asDiagonal();
    }

    // Columns i.i.d. CN(0, R_target): X = F W with W isotropic and F F^H = R_target.
    inline Waveform directed_waveform(const CMatrix &r_target, Eigen::Index length, std::uint64_t seed)
    {
        const CMatrix f = psd_square_root(r_target);
        const Waveform iso = isotropic_waveform(r_target.rows(), length, seed);
        return Waveform(f * iso.snapshots());
    }

    // 1/2 I + 1/2 t1 t1^H + 1/2 t2 t2^H with t1 = sqrt(3M/4) v1^*/|v1|, t2 = sqrt(M/4) v2^*/|v2|:
    // a transmit covariance that steers extra power toward two known targets
    // while keeping tr = M when N = M.
    inline CMatrix build_nonisotropic_cov(const CVector &v1, const CVector &v2, Eigen::Index m)
    {
        if (v1.size() != v2.size() || v1.size() == 0)
            throw std::invalid_argument("build_nonisotropic_cov: steering columns must have equal, non-zero length");
        const double n1 = v1.norm();
        const double n2 = v2.norm();
        if (!(n1 > 0.0) || !(n2 > 0.0))
            throw std::invalid_argument("build_nonisotropic_cov: zero-norm steering column");
        const double md = static_cast<double>(m);
        const CVector t1 = std::sqrt(3.0 * md / 4.0) * v1.conjugate() / n1;
        const CVector t2 = std::sqrt(md / 4.0) * v2.conjugate() / n2;
        const Eigen::Index n = v1.size();
        return 0.5 * CMatrix::Identity(n, n) + 0.5 * (t1 * t1.adjoint()) + 0.5 * (t2 * t2.adjoint());
    }

} // namespace nfloc

#endif
