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

#ifndef NFLOC_TYPES_HPP
#define NFLOC_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace nfloc
{
    using cplx = std::complex<double>;
    using Vec3 = Eigen::Vector3d;
    using Positions = Eigen::Matrix3Xd; // one antenna/target per column
    using CVector = Eigen::VectorXcd;
    using CMatrix = Eigen::MatrixXcd;
    using RVector = Eigen::VectorXd;
    using RMatrix = Eigen::MatrixXd;

    inline constexpr double speed_of_light = 299792458.0; // m/s, exact
    inline constexpr double pi = 3.14159265358979323846;

    // Numerical failures (singular matrices, degenerate scenes). Mapped to exit code 3 by the CLI.
    class NumericalError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // A target coincides with an antenna or reference point.
    class SingularityError : public NumericalError
    {
    public:
        using NumericalError::NumericalError;
    };

    // Zero reflection, coincident candidate locations, singular inner systems.
    class DegenerateSceneError : public NumericalError
    {
    public:
        using NumericalError::NumericalError;
    };

    // S S^H not invertible (fewer snapshots than targets, or unexcited target).
    class RankError : public NumericalError
    {
    public:
        using NumericalError::NumericalError;
    };

    class SingularFimError : public NumericalError
    {
    public:
        SingularFimError(const std::string &what, double condition)
            : NumericalError(what), condition_(condition) {}
        double condition() const noexcept { return condition_; }

    private:
        double condition_;
    };

    // Malformed or inconsistent scenario configuration. Exit code 2.
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // File system / container format failures. Exit code 4.
    class IoError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline bool all_finite(const Vec3 &p)
    {
        return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
    }

    // ||M - M^H||_F <= tol * ||M||_F
    inline bool is_hermitian(const CMatrix &m, double rel_tol)
    {
        if (m.rows() != m.cols())
            return false;
        const double scale = m.norm();
        return (m - m.adjoint()).norm() <= rel_tol * (scale > 0.0 ? scale : 1.0);
    }

} // namespace nfloc

#endif
