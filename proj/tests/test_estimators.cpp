// SPDX-License-Identifier: Apache-2.0
//
// nfloc: near-field MIMO radar localization toolkit
// ------------------------------------------------------------------------

#include "nfloc/estimators.hpp"
#include "nfloc/synthesis.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/QR>

using namespace nfloc;
using nfloc::testing::rel_err;

namespace
{
    struct Instance
    {
        ArrayGeometry geometry;
        TargetScene scene;
        CMatrix x;
        CMatrix y;
        CMatrix a;
        CMatrix s;
    };

    Instance make_instance(const nfloc::testing::RandomScene &rs, Eigen::Index L, double sigma2, std::uint64_t seed,
                           const AmplitudeMode &mode = AmplitudeMode::exact())
    {
        const Waveform w = isotropic_waveform(rs.geometry.n_tx(), L, seed);
        Instance in{rs.geometry, rs.scene, w.snapshots(), {}, {}, {}};
        if (sigma2 > 0.0)
            in.y = synthesize(rs.geometry, rs.scene, w, NoiseModel::wgn(sigma2), mode, seed + 1).y;
        else
            in.y = synthesize(rs.geometry, rs.scene, w, NoiseModel::wgn(1.0), mode, 0, {true}).y;
        EstimationProblem p(rs.geometry, rs.scene.carrier(), mode, in.x, in.y);
        p.build(rs.scene.positions(), in.a, in.s);
        return in;
    }

    // b from the textbook expression with explicit inverses.
    CVector aml_direct(const CMatrix &a, const CMatrix &s, const CMatrix &y)
    {
        const double L = static_cast<double>(y.cols());
        const CMatrix g = s * s.adjoint();
        const CMatrix j = (y * y.adjoint() - y * s.adjoint() * g.inverse() * s * y.adjoint()) / L;
        const CMatrix ji = j.inverse();
        const CMatrix lhs = (a.adjoint() * ji * a).cwiseProduct(g.transpose());
        const CVector rhs = (a.adjoint() * ji * y * s.adjoint()).diagonal();
        return lhs.inverse() * rhs;
    }

    double logdet_direct(const CMatrix &w)
    {
        Eigen::LLT<CMatrix> llt(w);
        return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
    }

    GridSchedule box(const Vec3 &lo, const Vec3 &hi, int n, int levels, double factor, int span)
    {
        GridSchedule g;
        g.region_min = lo;
        g.region_max = hi;
        g.points_per_axis = n;
        g.levels = levels;
        g.factor = factor;
        g.span = span;
        return g;
    }
} // namespace

TEST(Aml, SingleTargetIsScalarRatio)
{
    std::mt19937_64 rng(3);
    const auto rs = nfloc::testing::random_scene(rng, 1);
    const Instance in = make_instance(rs, 40, 0.05, 11);
    const CVector b = aml_coefficients(in.a, in.s, in.y);
    ASSERT_EQ(b.size(), 1);
    const double L = 40.0;
    const cplx g = (in.s * in.s.adjoint())(0, 0);
    const CMatrix j = (in.y * in.y.adjoint() - in.y * in.s.adjoint() * in.s * in.y.adjoint() / g) / L;
    const CMatrix ji = j.inverse();
    const cplx want = (in.a.adjoint() * ji * in.y * in.s.adjoint())(0, 0) / ((in.a.adjoint() * ji * in.a)(0, 0) * g);
    EXPECT_LT(std::abs(b(0) - want) / std::abs(want), 1e-9);
}

TEST(Aml, MatchesExplicitInverseFormula)
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t)
    {
        const auto rs = nfloc::testing::random_scene(rng, 2 + t % 2);
        const Instance in = make_instance(rs, 48, 0.2, 100 + t);
        const CVector b = aml_coefficients(in.a, in.s, in.y);
        const CVector want = aml_direct(in.a, in.s, in.y);
        EXPECT_LT((b - want).norm() / want.norm(), 1e-8) << "trial " << t;
    }
}

TEST(Aml, LowNoiseRecoversReflections)
{
    const auto rs = nfloc::testing::setup_one();
    // Exact path loss puts the received signal near 1e-7 per sample, so "low noise" is sigma^2 = 1e-10 here.
    const Instance in = make_instance(rs, 52, 1e-10, 7);
    const CVector b = aml_coefficients(in.a, in.s, in.y);
    const CVector truth = rs.scene.reflections();
    for (Eigen::Index k = 0; k < truth.size(); ++k)
        EXPECT_LT(std::abs(b(k) - truth(k)) / std::abs(truth(k)), 1e-2);
}

TEST(Aml, NoiselessDataTakesRegularizedPath)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.0, 7);
    const AcoFit fit = aco_fit(in.a, in.s, in.y, in.y * in.y.adjoint(), in.y.squaredNorm());
    EXPECT_TRUE(fit.regularized);
    EXPECT_TRUE(fit.perfect_fit);
    EXPECT_TRUE(std::isinf(fit.f3) && fit.f3 < 0);
    const CVector truth = rs.scene.reflections();
    for (Eigen::Index k = 0; k < truth.size(); ++k)
        EXPECT_LT(std::abs(fit.b(k) - truth(k)), 1e-6);
}

TEST(AcoObjective, LogSpaceIdentityMatchesDirectDeterminant)
{
    std::mt19937_64 rng(17);
    for (int t = 0; t < 10; ++t)
    {
        const auto rs = nfloc::testing::random_scene(rng, 1 + t % 3);
        const Instance in = make_instance(rs, 60, 0.3, 300 + t);
        // Off-truth candidates as well as truth.
        CMatrix a = in.a, s = in.s;
        if (t % 2 == 1)
        {
            EstimationProblem p(in.geometry, in.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
            p.fill_column(in.scene.positions().col(0) + Vec3(0.2, -0.1, 0.3), 0, a, s);
        }
        const AcoFit fit = aco_fit(a, s, in.y, in.y * in.y.adjoint(), in.y.squaredNorm());
        EXPECT_FALSE(fit.regularized);
        const CMatrix r = in.y - a * fit.b.asDiagonal() * s;
        const double want = 60.0 * logdet_direct(r * r.adjoint());
        EXPECT_LT(std::abs(fit.f3 - want) / std::abs(want), 1e-9) << "trial " << t;
    }
}

TEST(AcoObjective, WhitenedPathMatchesDirectPath)
{
    std::mt19937_64 rng(19);
    for (int t = 0; t < 12; ++t)
    {
        const auto rs = nfloc::testing::random_scene(rng, 1 + t % 3);
        const Instance in = make_instance(rs, 50, 0.2, 400 + t);
        EstimationProblem p(in.geometry, in.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
        if (in.y.rows() > 50)
            continue;
        ASSERT_TRUE(p.whitened());
        Positions loc = in.scene.positions();
        loc.col(0) += Vec3(0.1 * (t % 3), -0.05, 0.2);
        const CandidateColumns c = p.columns(loc);
        const auto fast = detail::aco_fit_whitened(p, c);
        ASSERT_TRUE(fast.has_value());
        const AcoFit slow = aco_fit(c.a, c.s, in.y, in.y * in.y.adjoint(), in.y.squaredNorm());
        EXPECT_LT(rel_err(fast->f3, slow.f3), 1e-10) << "trial " << t;
        EXPECT_LT((fast->b - slow.b).norm() / slow.b.norm(), 1e-9) << "trial " << t;
    }
}

TEST(AcoObjective, InvariantUnderRelabeling)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.1, 9);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    Positions loc = rs.scene.positions();
    loc.col(0) += Vec3(0.05, 0.02, -0.04);
    Positions swapped(3, 2);
    swapped.col(0) = loc.col(1);
    swapped.col(1) = loc.col(0);
    const AcoFit f1 = concentrated_nll_aco(p, loc);
    const AcoFit f2 = concentrated_nll_aco(p, swapped);
    EXPECT_LT(rel_err(f2.f3, f1.f3), 1e-12);
    EXPECT_LT(std::abs(f1.b(0) - f2.b(1)), 1e-10);
    const WgnFit w1 = concentrated_nll_wgn(p, loc);
    const WgnFit w2 = concentrated_nll_wgn(p, swapped);
    EXPECT_LT(rel_err(w2.f3, w1.f3), 1e-12);
}

TEST(AcoObjective, TruthBeatsHalfMetreOffset)
{
    const auto rs = nfloc::testing::setup_one();
    const Waveform w = isotropic_waveform(36, 52, 1);
    const CMatrix sig = signal_matrix(rs.geometry, rs.scene, w.snapshots(), AmplitudeMode::exact());
    const NoiseModel noise = NoiseModel::wgn(nfloc::testing::sigma2_for_snr(sig, -10.0));
    int wins = 0;
    for (int t = 0; t < 100; ++t)
    {
        const CMatrix y = synthesize(rs.geometry, rs.scene, w, noise, AmplitudeMode::exact(), 1000 + t).y;
        EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), w.snapshots(), y);
        Positions off = rs.scene.positions();
        off(0, 0) += 0.5;
        if (concentrated_nll_aco(p, rs.scene.positions()).f3 < concentrated_nll_aco(p, off).f3)
            ++wins;
    }
    EXPECT_GE(wins, 95);
}

TEST(Wgn, SingleTargetCoefficientIsLambda)
{
    std::mt19937_64 rng(23);
    const auto rs = nfloc::testing::random_scene(rng, 1);
    const Instance in = make_instance(rs, 30, 0.1, 5);
    const WgnSystem sys = wgn_system(in.a, in.s, in.y);
    const CVector b = wgn_coefficients(in.a, in.s, in.y);
    EXPECT_LT(std::abs(b(0) - sys.lambda(0)), 1e-14 * std::abs(sys.lambda(0)));
    const cplx direct = (in.a.adjoint() * in.y * in.s.adjoint())(0, 0) /
                        (in.a.squaredNorm() * in.s.squaredNorm());
    EXPECT_LT(std::abs(b(0) - direct) / std::abs(direct), 1e-12);
}

TEST(Wgn, SigmaHasUnitDiagonal)
{
    std::mt19937_64 rng(29);
    for (int t = 0; t < 10; ++t)
    {
        const auto rs = nfloc::testing::random_scene(rng, 3);
        const Instance in = make_instance(rs, 20, 0.1, 40 + t);
        const WgnSystem sys = wgn_system(in.a, in.s, in.y);
        for (Eigen::Index i = 0; i < 3; ++i)
            EXPECT_LT(std::abs(sys.sigma(i, i) - cplx(1.0, 0.0)), 1e-14);
    }
}

TEST(Wgn, MatchesVectorizedLeastSquares)
{
    std::mt19937_64 rng(31);
    for (int t = 0; t < 10; ++t)
    {
        const auto rs = nfloc::testing::random_scene(rng, 1 + t % 3);
        const Instance in = make_instance(rs, 25, 0.4, 60 + t);
        const Eigen::Index K = in.a.cols();
        CMatrix design(in.y.size(), K);
        for (Eigen::Index k = 0; k < K; ++k)
        {
            const CMatrix outer = in.a.col(k) * in.s.row(k);
            design.col(k) = Eigen::Map<const CVector>(outer.data(), outer.size());
        }
        const CVector want = design.colPivHouseholderQr().solve(Eigen::Map<const CVector>(in.y.data(), in.y.size()));
        const WgnFit fit = wgn_fit(in.a, in.s, in.y);
        EXPECT_LT((fit.b - want).norm() / want.norm(), 1e-9) << "trial " << t;
        const double resid = (Eigen::Map<const CVector>(in.y.data(), in.y.size()) - design * want).squaredNorm();
        EXPECT_LT(rel_err(fit.f3, resid), 1e-9);
        EXPECT_DOUBLE_EQ(fit.sigma2_hat, fit.f3 / static_cast<double>(in.y.size()));
    }
}

TEST(Wgn, NoiselessTruthIsExact)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.0, 3);
    const WgnFit fit = wgn_fit(in.a, in.s, in.y);
    const CVector truth = rs.scene.reflections();
    EXPECT_LT((fit.b - truth).norm(), 1e-10);
    EXPECT_LT(fit.f3, 1e-24 * in.y.squaredNorm());
}

TEST(Wgn, ResidualMeanIsChiSquare)
{
    const auto rs = nfloc::testing::setup_one();
    const double sigma2 = 0.7;
    double total = 0.0;
    const int draws = 20;
    for (int t = 0; t < draws; ++t)
    {
        const Instance in = make_instance(rs, 52, sigma2, 500 + 7 * t);
        total += wgn_fit(in.a, in.s, in.y).f3;
    }
    const double expected = 52.0 * 36.0 * sigma2; // L M = 1872
    EXPECT_LT(std::abs(total / draws - expected) / expected, 0.1);
}

TEST(Wgn, ObjectiveIsQuadraticallyHomogeneous)
{
    std::mt19937_64 rng(37);
    const auto rs = nfloc::testing::random_scene(rng, 2);
    const Instance in = make_instance(rs, 30, 0.3, 77);
    const double c = 3.7;
    EstimationProblem p1(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    EstimationProblem p2(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), c * in.x, c * in.y);
    Positions loc = rs.scene.positions();
    loc(2, 1) += 0.1;
    EXPECT_LT(rel_err(concentrated_nll_wgn(p2, loc).f3, c * c * concentrated_nll_wgn(p1, loc).f3), 1e-12);
}

TEST(Errors, CoincidentCandidatesAreDegenerate)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.1, 1);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    Positions loc(3, 2);
    loc.col(0) = rs.scene.positions().col(0);
    loc.col(1) = rs.scene.positions().col(0);
    EXPECT_THROW(concentrated_nll_wgn(p, loc), DegenerateSceneError);
    EXPECT_THROW(concentrated_nll_aco(p, loc), NumericalError);
}

TEST(Errors, TooFewSnapshotsIsRankError)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 1, 0.1, 1);
    EXPECT_THROW(aml_coefficients(in.a, in.s, in.y), RankError);
}

TEST(Errors, ProblemRejectsMismatchedData)
{
    const auto rs = nfloc::testing::setup_one();
    EXPECT_THROW(EstimationProblem(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), CMatrix::Zero(35, 4),
                                   CMatrix::Zero(36, 4)),
                 std::invalid_argument);
    EXPECT_THROW(EstimationProblem(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), CMatrix::Zero(36, 4),
                                   CMatrix::Zero(36, 5)),
                 std::invalid_argument);
}

TEST(RefineSearch, ConvexQuadraticReachesCentre)
{
    const Vec3 c(0.3172, -1.2231, 2.7019);
    const GridSchedule g = box(Vec3(-2, -2, 1), Vec3(2, 2, 4), 21, 3, 5.0, 2);
    auto f = [&](const Vec3 &p) { return (p - c).cwiseProduct(Vec3(1.0, 2.0, 0.5)).squaredNorm(); };
    const SearchResult r = refine_search(f, g);
    const Vec3 h = g.final_spacing();
    for (int i = 0; i < 3; ++i)
        EXPECT_LE(std::abs(r.point(i) - c(i)), h(i) + 1e-12);
}

TEST(RefineSearch, DeterministicAndThreadIndependent)
{
    const GridSchedule g = box(Vec3(-1, -1, -1), Vec3(1, 1, 1), 11, 2, 4.0, 1);
    auto f = [](const Vec3 &p) { return std::sin(3 * p.x()) * std::cos(2 * p.y()) + 0.1 * p.z() * p.z(); };
    const SearchResult a = refine_search(f, g, std::nullopt, 1);
    const SearchResult b = refine_search(f, g, std::nullopt, 1);
    const SearchResult c = refine_search(f, g, std::nullopt, 4);
    EXPECT_EQ(a.point, b.point);
    EXPECT_EQ(a.point, c.point);
    EXPECT_EQ(a.value, c.value);
    EXPECT_EQ(a.evaluations, c.evaluations);
}

TEST(RefineSearch, TiesGoToLexicographicallySmallest)
{
    const GridSchedule g = box(Vec3(-1, -1, -1), Vec3(1, 1, 1), 5, 0, 2.0, 1);
    const SearchResult r = refine_search([](const Vec3 &) { return 1.0; }, g);
    EXPECT_EQ(r.point, Vec3(-1, -1, -1));
    // Two equal minima at x = +-0.5: the smaller x wins regardless of visiting order.
    auto f = [](const Vec3 &p) { return std::abs(std::abs(p.x()) - 0.5) + std::abs(p.y()) + std::abs(p.z()); };
    EXPECT_EQ(refine_search(f, g, std::nullopt, 3).point, Vec3(-0.5, 0, 0));
}

TEST(RefineSearch, NeverWorseThanIncumbent)
{
    const GridSchedule g = box(Vec3(-1, -1, -1), Vec3(1, 1, 1), 3, 1, 2.0, 1);
    const Vec3 inc(0.123, 0.456, -0.789);
    auto f = [&](const Vec3 &p) { return (p - inc).norm(); };
    const SearchResult r = refine_search(f, g, inc);
    EXPECT_EQ(r.point, inc);
    EXPECT_EQ(r.value, 0.0);
}

TEST(RefineSearch, NanCountsAsInfinity)
{
    const GridSchedule g = box(Vec3(0, 0, 0), Vec3(1, 1, 1), 3, 0, 2.0, 1);
    auto f = [](const Vec3 &p) { return p.x() < 0.25 ? std::nan("") : p.squaredNorm(); };
    const SearchResult r = refine_search(f, g);
    EXPECT_EQ(r.point, Vec3(0.5, 0, 0));
}

TEST(RefineSearch, RejectsBadSchedule)
{
    auto f = [](const Vec3 &) { return 0.0; };
    EXPECT_THROW(refine_search(f, box(Vec3(0, 0, 0), Vec3(1, 1, 1), 1, 0, 2.0, 1)), std::invalid_argument);
    EXPECT_THROW(refine_search(f, box(Vec3(0, 0, 0), Vec3(1, 1, 1), 3, 0, 1.0, 1)), std::invalid_argument);
    EXPECT_THROW(refine_search(f, box(Vec3(0, 0, 0), Vec3(1, 0, 1), 3, 0, 2.0, 1)), std::invalid_argument);
}

namespace
{
    void expect_monotone(const EstimateResult &r)
    {
        for (std::size_t i = 1; i < r.trace.size(); ++i)
            if (r.trace[i].iteration > 0)
                EXPECT_LE(r.trace[i].value, r.trace[i - 1].value) << "trace entry " << i;
    }
} // namespace

TEST(Localize, WgnNoiselessSingleTargetWithinOneFinalCell)
{
    const auto base = nfloc::testing::setup_one();
    for (Eigen::Index k = 0; k < 2; ++k)
    {
        const Vec3 truth = base.scene.positions().col(k);
        const nfloc::testing::RandomScene rs{base.geometry, TargetScene({{truth, cplx(1.0, 0.0)}}, base.scene.carrier())};
        const Instance in = make_instance(rs, 52, 0.0, 90 + static_cast<std::uint64_t>(k));
        EstimationProblem p(in.geometry, in.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
        LocalizeOptions opt;
        opt.criterion = Criterion::CoWgn;
        opt.k_max = 1;
        opt.schedule = box(Vec3(-3, -1.5, 2), Vec3(3, 1.5, 4.5), 21, 3, 5.0, 2);
        const EstimateResult r = localize(p, opt);
        const Vec3 err = (r.positions.col(0) - truth).cwiseAbs();
        const Vec3 h = opt.schedule.final_spacing();
        for (int i = 0; i < 3; ++i)
            EXPECT_LE(err(i), h(i) * (1 + 1e-9)) << "target " << k << " axis " << i;
        EXPECT_TRUE(r.converged);
        expect_monotone(r);
        ASSERT_EQ(r.coefficients.size(), 1);
        EXPECT_TRUE(r.sigma2_hat.has_value());
        EXPECT_FALSE(r.q_hat.has_value());
    }
}

TEST(Localize, WgnNoiselessTwoTargetsSideBySide)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.0, 13);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    LocalizeOptions opt;
    opt.criterion = Criterion::CoWgn;
    opt.k_max = 2;
    opt.schedule = box(Vec3(-3, -1.5, 2), Vec3(3, 1.5, 4.5), 21, 3, 5.0, 2);
    const EstimateResult r = localize(p, opt);
    const auto perm = match_targets(r.positions, rs.scene.positions());
    const Vec3 h = opt.schedule.final_spacing();
    for (Eigen::Index k = 0; k < 2; ++k)
    {
        const Vec3 err = (r.positions.col(perm[static_cast<std::size_t>(k)]) - rs.scene.positions().col(k)).cwiseAbs();
        for (int i = 0; i < 3; ++i)
            EXPECT_LE(err(i), h(i) * (1 + 1e-9)) << "target " << k << " axis " << i;
    }
    expect_monotone(r);
    EXPECT_GE(r.trace.size(), 2u);
}

TEST(Localize, AcoTwoTargetTraceIsMonotone)
{
    const auto rs = nfloc::testing::setup_one();
    for (const double sigma2 : {0.0, 1e-8})
    {
        const Instance in = make_instance(rs, 52, sigma2, 13);
        EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
        LocalizeOptions opt;
        opt.k_max = 2;
        opt.schedule = box(Vec3(-3, -1.5, 2), Vec3(3, 1.5, 4.5), 15, 2, 5.0, 2);
        const EstimateResult r = localize(p, opt);
        expect_monotone(r);
        EXPECT_TRUE(r.q_hat.has_value());
        for (Eigen::Index k = 0; k < 2; ++k)
            EXPECT_TRUE(opt.schedule.contains(r.positions.col(k)));
    }
}

TEST(Localize, CriteriaAgreeOnNoiselessSingleTarget)
{
    // Truth sits on a coarse grid node, where both objectives reach their exact minimum.
    const auto base = nfloc::testing::setup_one();
    const GridSchedule g = box(Vec3(-3, -1.5, 2), Vec3(3, 1.5, 4.5), 13, 2, 4.0, 1);
    const Vec3 truth = g.region_min + Vec3(4, 7, 5).cwiseProduct(g.initial_spacing());
    const nfloc::testing::RandomScene rs{base.geometry, TargetScene({{truth, cplx(0.6, -0.8)}}, base.scene.carrier())};
    const Instance in = make_instance(rs, 24, 0.0, 5);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    LocalizeOptions opt;
    opt.k_max = 1;
    opt.schedule = g;
    opt.criterion = Criterion::Aco;
    const EstimateResult a = localize(p, opt);
    opt.criterion = Criterion::CoWgn;
    const EstimateResult w = localize(p, opt);
    EXPECT_EQ(Vec3(a.positions.col(0)), Vec3(w.positions.col(0)));
    EXPECT_LT((Vec3(a.positions.col(0)) - truth).norm(), 1e-12);
}

TEST(Localize, ThreadCountDoesNotChangeResult)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.5, 21);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    LocalizeOptions opt;
    opt.k_max = 2;
    opt.schedule = box(Vec3(-3, -1.5, 2), Vec3(3, 1.5, 4.5), 11, 2, 4.0, 1);
    opt.threads = 1;
    const EstimateResult r1 = localize(p, opt);
    opt.threads = 3;
    const EstimateResult r3 = localize(p, opt);
    EXPECT_EQ(r1.positions, r3.positions);
    ASSERT_EQ(r1.trace.size(), r3.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i)
        EXPECT_EQ(r1.trace[i].value, r3.trace[i].value);
    expect_monotone(r1);
}

TEST(Localize, QHatIsResidualGram)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 52, 0.3, 8);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    LocalizeOptions opt;
    opt.k_max = 2;
    opt.schedule = box(Vec3(-3, -1.5, 2), Vec3(3, 1.5, 4.5), 11, 1, 4.0, 1);
    const EstimateResult r = localize(p, opt);
    ASSERT_TRUE(r.q_hat.has_value());
    EXPECT_TRUE(is_hermitian(*r.q_hat, 1e-12));
    CMatrix a, s;
    p.build(r.positions, a, s);
    const AcoFit fit = aco_fit(a, s, in.y, in.y * in.y.adjoint(), in.y.squaredNorm());
    EXPECT_LT(rel_err(52.0 * (std::log(52.0) * 36.0 + logdet_direct(*r.q_hat)), fit.f3), 1e-9);
}

TEST(Localize, RejectsBadOptions)
{
    const auto rs = nfloc::testing::setup_one();
    const Instance in = make_instance(rs, 8, 0.3, 8);
    EstimationProblem p(rs.geometry, rs.scene.carrier(), AmplitudeMode::exact(), in.x, in.y);
    LocalizeOptions opt;
    opt.k_max = 0;
    EXPECT_THROW(localize(p, opt), std::invalid_argument);
    opt.k_max = 1;
    opt.epsilon = 0.0;
    EXPECT_THROW(localize(p, opt), std::invalid_argument);
}

TEST(MatchTargets, FindsMinimumCostPermutation)
{
    Positions truth(3, 3), est(3, 3);
    truth << 0, 1, 2, 0, 0, 0, 0, 0, 0;
    est << 2.1, -0.1, 0.9, 0, 0, 0, 0, 0, 0;
    const auto perm = match_targets(est, truth);
    EXPECT_EQ(perm, (std::vector<Eigen::Index>{1, 2, 0}));
    EXPECT_THROW(match_targets(est, truth.leftCols(2)), std::invalid_argument);
}
