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

#ifndef NFLOC_ESTIMATORS_HPP
#define NFLOC_ESTIMATORS_HPP

#include "nfloc/channel.hpp"
#include "nfloc/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace nfloc
{
    enum class Criterion
    {
        Aco,
        CoWgn
    };

    inline const char *criterion_name(Criterion c) { return c == Criterion::Aco ? "aco" : "co-wgn"; }

    inline Criterion criterion_from_string(const std::string &s)
    {
        if (s == "aco")
            return Criterion::Aco;
        if (s == "co-wgn" || s == "co_wgn" || s == "wgn")
            return Criterion::CoWgn;
        throw std::invalid_argument("unknown estimator '" + s + "' (expected aco or co-wgn)");
    }

    struct GridSchedule
    {
        Vec3 region_min = Vec3::Zero();
        Vec3 region_max = Vec3::Ones();
        int points_per_axis = 21;
        int levels = 3;
        double factor = 5.0;
        int span = 2;

        void validate() const
        {
            if (!all_finite(region_min) || !all_finite(region_max) || !(region_max.array() > region_min.array()).all())
                throw std::invalid_argument("GridSchedule: region must be a non-degenerate finite box");
            if (points_per_axis < 2)
                throw std::invalid_argument("GridSchedule: points_per_axis must be at least 2");
            if (levels < 0)
                throw std::invalid_argument("GridSchedule: levels must be non-negative");
            if (!(factor > 1.0) || !std::isfinite(factor))
                throw std::invalid_argument("GridSchedule: factor must exceed 1");
            if (span < 1)
                throw std::invalid_argument("GridSchedule: span must be at least 1");
        }

        Vec3 initial_spacing() const { return (region_max - region_min) / static_cast<double>(points_per_axis - 1); }
        Vec3 final_spacing() const { return initial_spacing() / std::pow(factor, levels); }

        bool contains(const Vec3 &p) const
        {
            return (p.array() >= region_min.array()).all() && (p.array() <= region_max.array()).all();
        }
    };

    namespace detail
    {
        // Cholesky succeeded and (max/min diagonal of the factor)^2, a cheap condition estimate, is at most 1e12.
        inline bool usable_cholesky(const Eigen::LLT<CMatrix> &llt)
        {
            if (llt.info() != Eigen::Success)
                return false;
            const RVector d = llt.matrixLLT().diagonal().real();
            if (!(d.minCoeff() > 0.0) || !d.allFinite())
                return false;
            const double ratio = d.maxCoeff() / d.minCoeff();
            return ratio * ratio <= 1e12;
        }

        // Cholesky pivot below 1e-12 of the largest diagonal of G = S S^H counts as rank deficiency.
        inline void require_full_row_rank(const Eigen::LLT<CMatrix> &llt, const CMatrix &g)
        {
            const double scale = g.diagonal().real().maxCoeff();
            if (llt.info() != Eigen::Success || !(scale > 0.0))
                throw RankError("S S^H is singular: fewer snapshots than targets or a target receives no power");
            const RVector d = llt.matrixLLT().diagonal().real();
            if (!(d.minCoeff() * d.minCoeff() > 1e-12 * scale))
                throw RankError("S S^H is singular: fewer snapshots than targets or a target receives no power");
        }

        inline double cholesky_ratio2(const Eigen::LLT<CMatrix> &llt)
        {
            const RVector d = llt.matrixLLT().diagonal().real();
            const double r = d.maxCoeff() / d.minCoeff();
            return r * r;
        }
    } // namespace detail

    // Candidate columns: A (M x K), S = V^T X (K x L) and, when the data Gram
    // is well conditioned, the whitened A_w = L_Y^{-1} A and L_Y^{-1} Y S^H.
    struct CandidateColumns
    {
        CMatrix a;
        CMatrix s;
        CMatrix aw;
        CMatrix yds;
    };

    // Received data plus everything needed to form steering columns for candidate locations.
    class EstimationProblem
    {
    public:
        EstimationProblem(ArrayGeometry geometry, CarrierSpec carrier, AmplitudeMode mode, CMatrix x, CMatrix y)
            : geometry_(std::move(geometry)), carrier_(carrier), mode_(std::move(mode)), x_(std::move(x)),
              y_(std::move(y))
        {
            if (x_.rows() != geometry_.n_tx())
                throw std::invalid_argument("EstimationProblem: X has " + std::to_string(x_.rows()) +
                                            " rows, Tx array has " + std::to_string(geometry_.n_tx()));
            if (y_.rows() != geometry_.n_rx())
                throw std::invalid_argument("EstimationProblem: Y has " + std::to_string(y_.rows()) +
                                            " rows, Rx array has " + std::to_string(geometry_.n_rx()));
            if (x_.cols() != y_.cols() || x_.cols() < 1)
                throw std::invalid_argument("EstimationProblem: X and Y must share a non-zero snapshot count");
            if (!x_.allFinite() || !y_.allFinite())
                throw std::invalid_argument("EstimationProblem: non-finite data");
            yyh_ = y_ * y_.adjoint();
            y_norm2_ = y_.squaredNorm();

            // Gamma = Y Y^H / L = L_Y L_Y^H
            Eigen::LLT<CMatrix> llt(yyh_ / static_cast<double>(y_.cols()));
            if (detail::usable_cholesky(llt))
            {
                whitened_ = true;
                ly_ = llt.matrixL();
                gamma_ratio2_ = detail::cholesky_ratio2(llt);
                logdet_gamma_ = 2.0 * ly_.diagonal().real().array().log().sum();
                ydot_ = ly_.triangularView<Eigen::Lower>().solve(y_);
            }
        }

        const ArrayGeometry &geometry() const noexcept { return geometry_; }
        const CarrierSpec &carrier() const noexcept { return carrier_; }
        const AmplitudeMode &mode() const noexcept { return mode_; }
        const CMatrix &x() const noexcept { return x_; }
        const CMatrix &y() const noexcept { return y_; }
        const CMatrix &yyh() const noexcept { return yyh_; }
        double y_norm2() const noexcept { return y_norm2_; }
        Eigen::Index snapshots() const noexcept { return y_.cols(); }

        bool whitened() const noexcept { return whitened_; }
        double logdet_gamma() const noexcept { return logdet_gamma_; }
        double gamma_ratio2() const noexcept { return gamma_ratio2_; }

        // Rx steering column a(l) and transmit row s(l) = v(l)^T X, written into column k of A and row k of S.
        void fill_column(const Vec3 &p, Eigen::Index k, CMatrix &a, CMatrix &s) const
        {
            detail::steering_into(geometry_.rx(), p, carrier_, mode_.is_exact(), a.col(k));
            CVector v(geometry_.n_tx());
            detail::steering_into(geometry_.tx(), p, carrier_, mode_.is_exact(), v);
            s.row(k).noalias() = v.transpose() * x_;
        }

        void build(const Positions &p, CMatrix &a, CMatrix &s) const
        {
            a.resize(geometry_.n_rx(), p.cols());
            s.resize(p.cols(), x_.cols());
            for (Eigen::Index k = 0; k < p.cols(); ++k)
                fill_column(p.col(k), k, a, s);
        }

        void set_column(const Vec3 &p, Eigen::Index k, CandidateColumns &c) const
        {
            fill_column(p, k, c.a, c.s);
            if (whitened_)
            {
                c.aw.col(k) = ly_.triangularView<Eigen::Lower>().solve(c.a.col(k));
                c.yds.col(k).noalias() = ydot_ * c.s.row(k).adjoint();
            }
        }

        CandidateColumns columns(const Positions &p) const
        {
            CandidateColumns c;
            c.a.resize(geometry_.n_rx(), p.cols());
            c.s.resize(p.cols(), x_.cols());
            if (whitened_)
            {
                c.aw.resize(geometry_.n_rx(), p.cols());
                c.yds.resize(geometry_.n_rx(), p.cols());
            }
            for (Eigen::Index k = 0; k < p.cols(); ++k)
                set_column(p.col(k), k, c);
            return c;
        }

    private:
        ArrayGeometry geometry_;
        CarrierSpec carrier_;
        AmplitudeMode mode_;
        CMatrix x_;
        CMatrix y_;
        CMatrix yyh_;
        double y_norm2_ = 0.0;
        bool whitened_ = false;
        CMatrix ly_;
        CMatrix ydot_;
        double logdet_gamma_ = 0.0;
        double gamma_ratio2_ = 0.0;
    };

    struct AcoFit
    {
        CVector b;
        double f3 = 0.0;          // L ln det W, -inf on a perfect fit
        bool perfect_fit = false; // residual energy below 1e-24 |Y|_F^2
        bool regularized = false; // J was replaced by the explicit-residual Gram plus a ridge
    };

    struct WgnFit
    {
        CVector b;
        double f3 = 0.0; // |Y - A diag(b) S|_F^2
        double sigma2_hat = 0.0;
    };

    namespace detail
    {
        struct AcoWork
        {
            Eigen::LLT<CMatrix> g_llt;
            CMatrix ys;        // Y S^H
            CMatrix j;         // J, possibly regularized
            CMatrix lj;        // Cholesky factor of J
            CMatrix c;         // (Y S^H G^{-1} - A diag(b)) L_G
            CVector b;
            bool regularized = false;
            bool perfect_fit = false;
        };

        // Shared AML pipeline. Returns the pieces needed for f3 and Q_hat.
        inline AcoWork aco_work(const CMatrix &a, const CMatrix &s, const CMatrix &y, const CMatrix &yyh,
                                double y_norm2)
        {
            const Eigen::Index M = y.rows();
            const double L = static_cast<double>(y.cols());
            AcoWork w;
            const CMatrix g = s * s.adjoint();
            w.g_llt.compute(g);
            require_full_row_rank(w.g_llt, g);
            w.ys.noalias() = y * s.adjoint();
            const auto lg = w.g_llt.matrixL();

            // J = (Y Y^H - Y S^H G^{-1} S Y^H) / L
            CMatrix z = lg.solve(w.ys.adjoint()); // K x M, Z^H with Z = YS L_G^{-H}
            w.j = (yyh - z.adjoint() * z) / L;
            w.j = 0.5 * (w.j + w.j.adjoint()).eval();
            double j_trace = w.j.trace().real();
            Eigen::LLT<CMatrix> j_llt(w.j);
            if (!usable_cholesky(j_llt))
            {
                // Explicit residual Gram, which stays PSD, plus a ridge.
                const CMatrix p = y - w.ys * w.g_llt.solve(s);
                w.j = p * p.adjoint() / L;
                j_trace = w.j.trace().real();
                const double delta = j_trace > 0.0 ? 1e-12 * j_trace / static_cast<double>(M) : 1e-18;
                w.j.diagonal().array() += delta;
                j_llt.compute(w.j);
                if (j_llt.info() != Eigen::Success)
                    throw NumericalError("residual covariance is not positive definite after regularization");
                w.regularized = true;
            }
            w.lj = j_llt.matrixL();
            const auto ljv = w.lj.triangularView<Eigen::Lower>();

            // b = [(A^H J^{-1} A) (.) G^T]^{-1} vecd(A^H J^{-1} Y S^H)
            const CMatrix xa = ljv.solve(a);
            const CMatrix xys = ljv.solve(w.ys);
            const CMatrix aja = xa.adjoint() * xa;
            const CVector rhs = (xa.adjoint() * xys).diagonal();
            const CMatrix sys = aja.cwiseProduct(g.transpose());
            Eigen::PartialPivLU<CMatrix> lu(sys);
            const double rc = lu.rcond();
            if (!(rc > 1e-13))
                throw DegenerateSceneError("coefficient system is singular (coincident or unexcited candidates)");
            w.b = lu.solve(rhs);

            // Residual R = E S + P with E = Y S^H G^{-1} - A diag(b) and P S^H = 0,
            // so W = R R^H = L J_unreg + E G E^H = L J_unreg + C C^H, C = E L_G.
            const CMatrix e = w.g_llt.solve(w.ys.adjoint()).adjoint() - a * w.b.asDiagonal();
            w.c = e * lg;
            w.perfect_fit = L * std::max(j_trace, 0.0) + w.c.squaredNorm() <= 1e-24 * y_norm2;
            return w;
        }
    } // namespace detail

    // AML reflection estimates for the DGC model Y = A diag(b) S + Z with unknown Q.
    inline CVector aml_coefficients(const CMatrix &a, const CMatrix &s, const CMatrix &y)
    {
        return detail::aco_work(a, s, y, y * y.adjoint(), y.squaredNorm()).b;
    }

    inline AcoFit aco_fit(const CMatrix &a, const CMatrix &s, const CMatrix &y, const CMatrix &yyh, double y_norm2)
    {
        const detail::AcoWork w = detail::aco_work(a, s, y, yyh, y_norm2);
        AcoFit fit;
        fit.b = w.b;
        fit.regularized = w.regularized;
        fit.perfect_fit = w.perfect_fit;
        if (w.perfect_fit)
        {
            fit.f3 = -std::numeric_limits<double>::infinity();
            return fit;
        }
        const Eigen::Index M = y.rows();
        const Eigen::Index K = a.cols();
        const double L = static_cast<double>(y.cols());
        // ln det W = M ln L + ln det J + ln det(I_K + H^H H / L), H = L_J^{-1} C
        const CMatrix h = w.lj.triangularView<Eigen::Lower>().solve(w.c);
        CMatrix inner = CMatrix::Identity(K, K) + h.adjoint() * h / L;
        Eigen::LLT<CMatrix> inner_llt(inner);
        double logdet = static_cast<double>(M) * std::log(L) + 2.0 * w.lj.diagonal().real().array().log().sum();
        logdet += 2.0 * inner_llt.matrixLLT().diagonal().real().array().log().sum();
        fit.f3 = L * logdet;
        return fit;
    }

    namespace detail
    {
        // Same fit through the data whitening Gamma = L_Y L_Y^H: with U = L_Y^{-1} Y S^H L_G^{-H} / sqrt(L),
        // J = L_Y (I - U U^H) L_Y^H and Omega = I_K - U^H U, so every M x M inverse and determinant
        // reduces to K x K work (Woodbury and Sylvester). Empty when J is too ill-conditioned for it.
        inline std::optional<AcoFit> aco_fit_whitened(const EstimationProblem &problem, const CandidateColumns &c)
        {
            const Eigen::Index M = c.a.rows();
            const Eigen::Index K = c.a.cols();
            const double L = static_cast<double>(problem.snapshots());
            const CMatrix g = c.s * c.s.adjoint();
            Eigen::LLT<CMatrix> g_llt(g);
            require_full_row_rank(g_llt, g);
            const auto lg = g_llt.matrixL();
            const CMatrix uh = lg.solve(c.yds.adjoint()) / std::sqrt(L);
            const CMatrix omega = CMatrix::Identity(K, K) - uh * uh.adjoint();
            Eigen::SelfAdjointEigenSolver<CMatrix> eig(omega, Eigen::EigenvaluesOnly);
            const double lmin = eig.eigenvalues().minCoeff();
            if (!(lmin > 0.0) || problem.gamma_ratio2() / lmin > 1e12)
                return std::nullopt;
            Eigen::LLT<CMatrix> o_llt(omega);
            if (o_llt.info() != Eigen::Success)
                return std::nullopt;
            // P^H (I - U U^H)^{-1} Q
            auto form = [&](const CMatrix &pm, const CMatrix &qm) {
                return CMatrix(pm.adjoint() * qm + (uh * pm).adjoint() * o_llt.solve(uh * qm));
            };
            const CMatrix sys = form(c.aw, c.aw).cwiseProduct(g.transpose());
            const CVector rhs = form(c.aw, c.yds).diagonal();
            Eigen::PartialPivLU<CMatrix> lu(sys);
            if (!(lu.rcond() > 1e-13))
                throw DegenerateSceneError("coefficient system is singular (coincident or unexcited candidates)");
            AcoFit fit;
            fit.b = lu.solve(rhs);
            const CMatrix cw = (g_llt.solve(c.yds.adjoint()).adjoint() - c.aw * fit.b.asDiagonal()) * lg;
            Eigen::LLT<CMatrix> inner(CMatrix::Identity(K, K) + form(cw, cw) / L);
            double logdet = static_cast<double>(M) * std::log(L) + problem.logdet_gamma();
            logdet += 2.0 * o_llt.matrixLLT().diagonal().real().array().log().sum();
            logdet += 2.0 * inner.matrixLLT().diagonal().real().array().log().sum();
            fit.f3 = L * logdet;
            return fit;
        }
    } // namespace detail

    inline AcoFit aco_fit(const EstimationProblem &problem, const CandidateColumns &c)
    {
        if (problem.whitened())
            if (auto fit = detail::aco_fit_whitened(problem, c))
                return *fit;
        return aco_fit(c.a, c.s, problem.y(), problem.yyh(), problem.y_norm2());
    }

    // Q_hat = W / L at the given columns.
    inline CMatrix aco_noise_estimate(const CMatrix &a, const CMatrix &s, const CMatrix &y)
    {
        const CVector b = aml_coefficients(a, s, y);
        const CMatrix r = y - a * b.asDiagonal() * s;
        return r * r.adjoint() / static_cast<double>(y.cols());
    }

    inline AcoFit concentrated_nll_aco(const EstimationProblem &problem, const Positions &locations)
    {
        return aco_fit(problem, problem.columns(locations));
    }

    // Stationarity system of the white-noise fit: Sigma b = lambda, unit diagonal Sigma.
    struct WgnSystem
    {
        CVector lambda;
        CMatrix sigma;
    };

    inline WgnSystem wgn_system(const CMatrix &a, const CMatrix &s, const CMatrix &y)
    {
        const Eigen::Index K = a.cols();
        const CMatrix aha = a.adjoint() * a;
        const CMatrix g = s * s.adjoint();
        const CMatrix ahys = a.adjoint() * (y * s.adjoint());
        WgnSystem sys{CVector(K), CMatrix(K, K)};
        for (Eigen::Index i = 0; i < K; ++i)
        {
            const double den = aha(i, i).real() * g(i, i).real();
            if (!(den > 0.0))
                throw DegenerateSceneError("candidate receives no power (zero steering or transmit row)");
            sys.lambda(i) = ahys(i, i) / den;
            for (Eigen::Index k = 0; k < K; ++k)
                sys.sigma(i, k) = aha(i, k) * g(k, i) / den;
        }
        return sys;
    }

    // Least-squares coefficients under white noise: b = Sigma^{-1} lambda.
    inline CVector wgn_coefficients(const CMatrix &a, const CMatrix &s, const CMatrix &y)
    {
        const WgnSystem sys = wgn_system(a, s, y);
        Eigen::PartialPivLU<CMatrix> lu(sys.sigma);
        if (!(lu.rcond() > 1e-13))
            throw DegenerateSceneError("Sigma is singular (coincident candidate locations)");
        return lu.solve(sys.lambda);
    }

    inline WgnFit wgn_fit(const CMatrix &a, const CMatrix &s, const CMatrix &y)
    {
        WgnFit fit;
        fit.b = wgn_coefficients(a, s, y);
        fit.f3 = (y - a * fit.b.asDiagonal() * s).squaredNorm();
        fit.sigma2_hat = fit.f3 / (static_cast<double>(y.cols()) * static_cast<double>(y.rows()));
        return fit;
    }

    inline WgnFit concentrated_nll_wgn(const EstimationProblem &problem, const Positions &locations)
    {
        CMatrix a, s;
        problem.build(locations, a, s);
        return wgn_fit(a, s, problem.y());
    }

    inline double objective_value(const EstimationProblem &problem, const Positions &locations, Criterion c)
    {
        return c == Criterion::Aco ? concentrated_nll_aco(problem, locations).f3
                                   : concentrated_nll_wgn(problem, locations).f3;
    }

    struct SearchResult
    {
        Vec3 point = Vec3::Zero();
        double value = std::numeric_limits<double>::infinity();
        std::size_t evaluations = 0;
    };

    namespace detail
    {
        // (value, x, y, z) lexicographic order; NaN treated as +inf by the caller.
        inline bool better(double v, const Vec3 &p, double bv, const Vec3 &bp)
        {
            if (v != bv)
                return v < bv;
            return std::tie(p.x(), p.y(), p.z()) < std::tie(bp.x(), bp.y(), bp.z());
        }

        inline std::array<std::vector<double>, 3> level_axes(const GridSchedule &s, int level, const Vec3 &center,
                                                             const Vec3 &spacing)
        {
            std::array<std::vector<double>, 3> axes;
            for (int i = 0; i < 3; ++i)
            {
                auto &ax = axes[static_cast<std::size_t>(i)];
                const double lo = s.region_min(i), hi = s.region_max(i);
                if (level == 0)
                {
                    for (int j = 0; j < s.points_per_axis; ++j)
                        ax.push_back(j == s.points_per_axis - 1 ? hi : lo + j * spacing(i));
                    continue;
                }
                const int half = static_cast<int>(std::ceil(s.span * s.factor - 1e-9));
                for (int j = -half; j <= half; ++j)
                {
                    const double v = center(i) + j * spacing(i);
                    if (v >= lo && v <= hi)
                        ax.push_back(v);
                }
            }
            return axes;
        }
    } // namespace detail

    // Coarse full-grid argmin followed by `levels` local refinements around the
    // incumbent. An optional starting point is evaluated alongside the coarse
    // grid so the result is never worse than it.
    inline SearchResult refine_search(const std::function<double(const Vec3 &)> &objective,
                                      const GridSchedule &schedule, const std::optional<Vec3> &incumbent = std::nullopt,
                                      unsigned threads = 1)
    {
        schedule.validate();
        auto eval = [&](const Vec3 &p) {
            const double v = objective(p);
            return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
        };
        SearchResult best;
        bool have = false;
        if (incumbent)
        {
            best.point = *incumbent;
            best.value = eval(*incumbent);
            best.evaluations = 1;
            have = true;
        }
        Vec3 spacing = schedule.initial_spacing();
        for (int level = 0; level <= schedule.levels; ++level)
        {
            if (level > 0)
                spacing /= schedule.factor;
            const auto axes = detail::level_axes(schedule, level, best.point, spacing);
            const std::size_t nx = axes[0].size(), ny = axes[1].size(), nz = axes[2].size();
            const std::size_t total = nx * ny * nz;
            std::vector<double> values(total);
            auto point = [&](std::size_t idx) {
                const std::size_t ix = idx / (ny * nz), iy = (idx / nz) % ny, iz = idx % nz;
                return Vec3(axes[0][ix], axes[1][iy], axes[2][iz]);
            };
            parallel_for(total, threads, [&](std::size_t idx) { values[idx] = eval(point(idx)); });
            best.evaluations += total;
            for (std::size_t idx = 0; idx < total; ++idx)
            {
                const Vec3 p = point(idx);
                if (!have || detail::better(values[idx], p, best.value, best.point))
                {
                    best.value = values[idx];
                    best.point = p;
                    have = true;
                }
            }
        }
        return best;
    }

    struct TraceEntry
    {
        int k_hat = 0;
        int iteration = 0; // 0 for the search that adds target k_hat
        double value = 0.0;
    };

    struct LocalizeOptions
    {
        Criterion criterion = Criterion::Aco;
        int k_max = 1;
        double epsilon = 1e-5;
        GridSchedule schedule;
        unsigned threads = 1;
        int max_sweeps = 50;
    };

    struct EstimateResult
    {
        Criterion criterion = Criterion::Aco;
        Positions positions;
        CVector coefficients;
        std::vector<TraceEntry> trace;
        std::optional<CMatrix> q_hat;
        std::optional<double> sigma2_hat;
        bool converged = true;
        std::size_t evaluations = 0;
    };

    namespace detail
    {
        // Objective over the location of target p with every other column fixed.
        inline double objective_with(const EstimationProblem &problem, Criterion c, const CandidateColumns &fixed,
                                     Eigen::Index p, const Vec3 &candidate)
        {
            try
            {
                CandidateColumns cols = fixed;
                problem.set_column(candidate, p, cols);
                if (c == Criterion::Aco)
                    return aco_fit(problem, cols).f3;
                return wgn_fit(cols.a, cols.s, problem.y()).f3;
            }
            catch (const NumericalError &)
            {
                // Candidate coincides with an antenna or another target.
                return std::numeric_limits<double>::infinity();
            }
        }

        inline SearchResult search_target(const EstimationProblem &problem, const LocalizeOptions &opt,
                                          const Positions &current, Eigen::Index p, const std::optional<Vec3> &incumbent)
        {
            const CandidateColumns fixed = problem.columns(current);
            auto f = [&](const Vec3 &cand) { return objective_with(problem, opt.criterion, fixed, p, cand); };
            SearchResult r = refine_search(f, opt.schedule, incumbent, opt.threads);
            if (std::isinf(r.value) && r.value > 0)
                throw DegenerateSceneError("objective is infinite over the whole search region");
            return r;
        }
    } // namespace detail

    // Cyclic grid-search localizer (ACO or CO-WGN criterion).
    inline EstimateResult localize(const EstimationProblem &problem, const LocalizeOptions &opt)
    {
        if (opt.k_max < 1)
            throw std::invalid_argument("localize: k_max must be at least 1");
        if (!(opt.epsilon > 0.0))
            throw std::invalid_argument("localize: epsilon must be positive");
        if (opt.max_sweeps < 1)
            throw std::invalid_argument("localize: max_sweeps must be at least 1");
        opt.schedule.validate();

        EstimateResult out;
        out.criterion = opt.criterion;
        Positions L(3, 1);
        L.col(0) = Vec3::Zero();

        // Steps 1-3: first target on its own.
        SearchResult r = detail::search_target(problem, opt, L, 0, std::nullopt);
        out.evaluations += r.evaluations;
        L.col(0) = r.point;
        double f = r.value;
        out.trace.push_back({1, 0, f});

        int k_hat = 1;
        while (k_hat < opt.k_max)
        {
            ++k_hat;
            Positions grown(3, k_hat);
            grown.leftCols(k_hat - 1) = L;
            grown.col(k_hat - 1) = L.col(0); // placeholder, overwritten by the search
            r = detail::search_target(problem, opt, grown, k_hat - 1, std::nullopt);
            out.evaluations += r.evaluations;
            grown.col(k_hat - 1) = r.point;
            L = grown;
            f = r.value;
            out.trace.push_back({k_hat, 0, f});

            double f_old = f + 2.0 * opt.epsilon;
            double f_new = f;
            Eigen::Index p = 0;
            int iteration = 0;
            while (f_old - f_new > opt.epsilon)
            {
                if (iteration >= opt.max_sweeps * k_hat)
                {
                    out.converged = false;
                    break;
                }
                f_old = f_new;
                r = detail::search_target(problem, opt, L, p, Vec3(L.col(p)));
                out.evaluations += r.evaluations;
                L.col(p) = r.point;
                f_new = r.value;
                if (f_new > f_old)
                    throw std::logic_error("localize: objective increased during a cyclic update");
                out.trace.push_back({k_hat, ++iteration, f_new});
                p = (p + 1) % k_hat;
            }
            f = f_new;
        }

        out.positions = L;
        CMatrix a, s;
        problem.build(L, a, s);
        if (opt.criterion == Criterion::Aco)
        {
            out.coefficients = aco_fit(problem, problem.columns(L)).b;
            const CMatrix res = problem.y() - a * out.coefficients.asDiagonal() * s;
            out.q_hat = res * res.adjoint() / static_cast<double>(problem.snapshots());
        }
        else
        {
            const WgnFit w = wgn_fit(a, s, problem.y());
            out.coefficients = w.b;
            out.sigma2_hat = w.sigma2_hat;
        }
        return out;
    }

    // Permutation perm minimising sum_k |est(:, perm[k]) - truth(:, k)|^2 (exhaustive; K is small).
    inline std::vector<Eigen::Index> match_targets(const Positions &estimated, const Positions &truth)
    {
        if (estimated.cols() != truth.cols())
            throw std::invalid_argument("match_targets: estimated and true target counts differ");
        const Eigen::Index K = truth.cols();
        if (K > 9)
            throw std::invalid_argument("match_targets: too many targets for exhaustive matching");
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(K));
        for (Eigen::Index k = 0; k < K; ++k)
            perm[static_cast<std::size_t>(k)] = k;
        std::vector<Eigen::Index> best = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        do
        {
            double cost = 0.0;
            for (Eigen::Index k = 0; k < K; ++k)
                cost += (estimated.col(perm[static_cast<std::size_t>(k)]) - truth.col(k)).squaredNorm();
            if (cost < best_cost)
            {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }

} // namespace nfloc

#endif
