// SPDX-License-Identifier: Apache-2.0
//
// nfloc: near-field MIMO radar localization toolkit
// ------------------------------------------------------------------------

#include "nfloc/channel.hpp"
#include "nfloc/waveform.hpp"

#include <gtest/gtest.h>

using namespace nfloc;

namespace
{
    void expect_valid_covariance(const CMatrix &r)
    {
        EXPECT_TRUE(is_hermitian(r, 1e-12));
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * r.trace().real() / static_cast<double>(r.rows()));
    }
} // namespace

TEST(ComplexGaussian, KnownFirstDrawsAreStable)
{
    ComplexGaussian a(42), b(42), c(43);
    const cplx x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
}

TEST(ComplexGaussian, UnitVarianceCircular)
{
    ComplexGaussian g(1);
    double p = 0.0, re2 = 0.0, im2 = 0.0;
    cplx pseudo = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
    {
        const cplx z = g();
        p += std::norm(z);
        re2 += z.real() * z.real();
        im2 += z.imag() * z.imag();
        pseudo += z * z;
    }
    EXPECT_NEAR(p / n, 1.0, 0.01);
    EXPECT_NEAR(re2 / n, 0.5, 0.01);
    EXPECT_NEAR(im2 / n, 0.5, 0.01);
    EXPECT_LT(std::abs(pseudo / static_cast<double>(n)), 0.01);
}

TEST(DeriveSeed, DistinctPathsGiveDistinctSeeds)
{
    EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
    EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
    EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(IsotropicWaveform, DeterministicInSeed)
{
    const Waveform a = isotropic_waveform(4, 9, 123);
    const Waveform b = isotropic_waveform(4, 9, 123);
    EXPECT_EQ(a.snapshots(), b.snapshots());
    EXPECT_NE(a.snapshots(), isotropic_waveform(4, 9, 124).snapshots());
    EXPECT_THROW(isotropic_waveform(0, 9, 1), std::invalid_argument);
    EXPECT_THROW(isotropic_waveform(4, 0, 1), std::invalid_argument);
}

TEST(IsotropicWaveform, TraceConcentration)
{
    // tr(R_X) = |X|_F^2 / L, a scaled chi-square with mean N and std sqrt(N / L).
    const double bound = 5.0 * std::sqrt(2.0 * 36.0 / 52.0);
    for (std::uint64_t seed = 0; seed < 50; ++seed)
    {
        const Waveform w = isotropic_waveform(36, 52, seed);
        const CMatrix r = w.sample_covariance();
        EXPECT_NEAR(r.trace().real(), 36.0, bound);
        expect_valid_covariance(r);
    }
}

TEST(IsotropicWaveform, LawOfLargeNumbers)
{
    const Waveform w = isotropic_waveform(1, 100000, 9);
    EXPECT_NEAR(w.sample_covariance()(0, 0).real(), 1.0, 0.02);
}

TEST(DirectedWaveform, IdentityTargetReproducesIsotropicDraws)
{
    const Waveform iso = isotropic_waveform(3, 20, 77);
    const Waveform dir = directed_waveform(CMatrix::Identity(3, 3), 20, 77);
    EXPECT_EQ(iso.snapshots(), dir.snapshots());
}

TEST(DirectedWaveform, RankOneTargetGivesParallelColumns)
{
    CVector t(3);
    t << cplx(1, 1), cplx(0, 2), cplx(-1, 0.5);
    const Waveform w = directed_waveform(t * t.adjoint(), 10, 5);
    for (Eigen::Index l = 0; l < 10; ++l)
    {
        const CVector x = w.snapshots().col(l);
        const cplx coef = t.dot(x) / t.squaredNorm();
        EXPECT_LT((x - coef * t).norm(), 1e-10 * std::max(1.0, x.norm()));
    }
}

TEST(DirectedWaveform, RejectsNonHermitianOrIndefinite)
{
    CMatrix r = CMatrix::Identity(2, 2);
    r(0, 1) = cplx(0.5, 0);
    EXPECT_THROW(directed_waveform(r, 5, 1), std::invalid_argument);
    CMatrix neg = CMatrix::Identity(2, 2);
    neg(1, 1) = -1.0;
    EXPECT_THROW(directed_waveform(neg, 5, 1), std::invalid_argument);
}

TEST(DirectedWaveform, SampleCovarianceConverges)
{
    for (int n = 1; n <= 4; ++n)
    {
        CMatrix g(n, n);
        ComplexGaussian gen(static_cast<std::uint64_t>(n));
        g = gen.matrix(n, n);
        const CMatrix target = g * g.adjoint() + 0.1 * CMatrix::Identity(n, n);
        const Waveform w = directed_waveform(target, 10000 * n, 31);
        const CMatrix r = w.sample_covariance();
        EXPECT_LT((r - target).norm() / target.norm(), 0.05);
        expect_valid_covariance(r);
    }
}

TEST(NonisotropicCov, TraceEqualsM)
{
    const CarrierSpec c(0.625e9);
    const ArrayGeometry g = ArrayGeometry::monostatic(build_upa(6, 6, c.wavelength() / 2, Vec3::Zero()));
    const CVector v1 = steering_tx(g, Vec3(-0.4, 0.3, 2.5), c);
    const CVector v2 = steering_tx(g, Vec3(0.7, -0.2, 3.5), c);
    const CMatrix r = build_nonisotropic_cov(v1, v2, 36);
    EXPECT_NEAR(r.trace().real(), 36.0, 1e-12);
    EXPECT_TRUE(is_hermitian(r, 1e-14));
    expect_valid_covariance(r);
}

TEST(NonisotropicCov, OrthogonalDirectionsEigenvalues)
{
    const Eigen::Index m = 4;
    CVector v1 = CVector::Zero(m), v2 = CVector::Zero(m);
    v1(0) = cplx(0, 2);
    v2(1) = 3.0;
    const CMatrix r = build_nonisotropic_cov(v1, v2, m);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
    RVector ev = eig.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size());
    const double md = static_cast<double>(m);
    EXPECT_NEAR(ev(0), 0.5, 1e-14);
    EXPECT_NEAR(ev(1), 0.5, 1e-14);
    EXPECT_NEAR(ev(2), 0.5 + md / 8.0, 1e-13);
    EXPECT_NEAR(ev(3), 0.5 + 3.0 * md / 8.0, 1e-13);
    EXPECT_THROW(build_nonisotropic_cov(CVector::Zero(m), CVector::Zero(m), m), std::invalid_argument);
}

TEST(TxCovariance, FormsAgree)
{
    const Waveform w = isotropic_waveform(5, 12, 3);
    ComplexGaussian gen(4);
    const CMatrix u = gen.matrix(5, 3), v = gen.matrix(5, 2);
    const TxCovariance snap = w.covariance();
    const TxCovariance dense = TxCovariance::dense(w.sample_covariance());
    const CMatrix want = u.adjoint() * w.sample_covariance().conjugate() * v;
    EXPECT_LT((snap.conj_form(u, v) - want).norm(), 1e-12 * want.norm());
    EXPECT_LT((dense.conj_form(u, v) - want).norm(), 1e-12 * want.norm());
    EXPECT_LT((TxCovariance::identity(5).conj_form(u, v) - u.adjoint() * v).norm(), 1e-14);
    EXPECT_LT((snap.to_dense() - w.sample_covariance()).norm(), 1e-14);
}
