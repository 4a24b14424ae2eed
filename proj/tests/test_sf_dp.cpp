#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "sfset/oracle.hpp"
#include "sfset/sf_dp.hpp"
#include "sfset/sfset_io.hpp"

using namespace sfs;
using namespace sfs::testing;

namespace {

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

BackupConfig fixed_iterations(int n) {
    BackupConfig c;
    c.max_iters = n;
    c.convergence_tol = 1e-300;
    return c;
}

std::string bytes(const SFSet& s) {
    std::ostringstream out;
    write_sfset(out, s);
    return out.str();
}

}  // namespace

TEST(Directions, UnitNormAndDeterministic) {
    const DirectionSet a = sample_directions(7, 50, 2, 9);
    const DirectionSet b = sample_directions(7, 50, 2, 9);
    ASSERT_EQ(a.size(), 50);
    for (int i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a[i].norm(), 1.0, 1e-15);
        EXPECT_TRUE(a[i] == b[i]);
    }
}

TEST(Directions, OneDimensionalAreSigns) {
    const DirectionSet a = sample_directions(3, 20, 1, 1);
    for (int i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(std::abs(a[i](0, 0)), 1.0);
}

TEST(Support, TieRuleAndScan) {
    Matrix F(2, 2);
    F << 1, 2, 3, 4;
    const SupportPoint s = support({Matrix::Zero(2, 2), F}, F / F.norm());
    EXPECT_EQ(s.index, 1);
    EXPECT_NEAR(s.value, F.norm(), 1e-14);
    const SupportPoint tie = support({F, F, Matrix::Zero(2, 2)}, F);
    EXPECT_EQ(tie.index, 0);
    EXPECT_THROW(support({}, F), EmptySet);

    Rng rng(1);
    std::normal_distribution<double> normal;
    std::vector<Matrix> pts;
    for (int i = 0; i < 10; ++i) pts.push_back(Matrix::NullaryExpr(2, 3, [&] { return normal(rng); }));
    const Matrix m = Matrix::NullaryExpr(2, 3, [&] { return normal(rng); });
    int best = 0;
    for (int i = 1; i < 10; ++i)
        if (inner(pts[i], m) > inner(pts[best], m)) best = i;
    EXPECT_EQ(support(pts, m).index, best);
}

TEST(Backup, FirstBackupHoldsOneStepFeatures) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    const DirectionSet dirs = sample_directions(2, 30, p.d(), p.k());
    const SFSet s0 = initial_set(p, dirs);
    BackupConfig cfg;
    const SFSet s1 = point_based_backup(p, s0, cfg);
    for (int a = 0; a < p.num_actions(); ++a)
        for (int o = 0; o < p.num_observations(); ++o)
            for (int j = 0; j < s1.cell(a, o).size(); ++j) {
                const Matrix pt = s1.point(p, a, o, j);
                bool found = false;
                for (int b = 0; b < p.num_actions(); ++b)
                    found = found || (pt - p.F(b) * p.T(a, o)).cwiseAbs().maxCoeff() < 1e-14;
                EXPECT_TRUE(found);
            }
    // The represented set is now Phi^(2); its support matches the recursion.
    const Vector h = support_values(p, s1, dirs);
    for (int i = 0; i < dirs.size(); ++i) EXPECT_NEAR(h[i], recursive_support(p, dirs[i], 2), 1e-12);
}

TEST(Backup, GridworldCellsAreShiftedStateSets) {
    const MdpSpec mdp = gridworld_mdp(grid3());
    const PsrModel p = mdp_to_psr(mdp);
    const DpResult r = run_dp(p, fixed_iterations(6), sample_directions(4, 60, 2, 9));
    // Cell (up, middle-left) holds Phi e_middle-left (one column); Phi_up e_bottom-left
    // is f(bottom-left) + gamma times that set.
    const SFCell& c = r.set.cell(kUp, 3);
    ASSERT_EQ(c.rows, std::vector<int>{3});
    const ProjectedSet P(p, r.set, Vector::Unit(9, 0));
    const Matrix& proj = P.projected(kUp, 3);
    ASSERT_EQ(proj.rows(), c.size());
    for (int j = 0; j < c.size(); ++j)
        EXPECT_LT((proj.row(j).transpose() - c.points.row(j).transpose()).cwiseAbs().maxCoeff(), 1e-15);
    const Vector g = (Vector(2) << 0.3, -0.8).finished();
    const LmoResult l = P.lmo(kUp, g);
    double best = -1e300;
    for (int j = 0; j < c.size(); ++j) best = std::max(best, c.points.row(j).dot(g));
    EXPECT_NEAR(l.value, mdp.features[kUp].col(0).dot(g) + 0.9 * best, 1e-12);
}

TEST(Backup, SoundAgainstExactSupport) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    const DirectionSet dirs = sample_directions(5, 25, p.d(), p.k());
    const DirectionSet probes = sample_directions(6, 40, p.d(), p.k());
    for (int n = 0; n < 4; ++n) {
        const DpResult r = run_dp(p, fixed_iterations(n), dirs);
        const GapReport g =
            support_gap([&](const Matrix& m) { return recursive_support(p, m, n + 1); }, p, r.set, probes);
        EXPECT_LE(g.excess, 1e-10);
    }
}

TEST(Backup, MaxPointsCap) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    BackupConfig cfg = fixed_iterations(5);
    cfg.max_points = 2;
    const DpResult r = run_dp(p, cfg, sample_directions(1, 40, p.d(), p.k()));
    for (const SFCell& c : r.set.cells) {
        EXPECT_LE(c.size(), 2);
        for (int s : c.slot) EXPECT_LT(s, c.size());
    }
}

TEST(Backup, IncrementalSubsetKeepsOtherSlots) {
    const PsrModel p = mdp_to_psr(gridworld_mdp(grid3()));
    const DirectionSet dirs = sample_directions(3, 20, 2, 9);
    const DpResult r = run_dp(p, fixed_iterations(3), dirs);
    BackupConfig cfg;
    cfg.incremental_subset = std::vector<int>{0, 1, 2};
    const SFSet next = point_based_backup(p, r.set, cfg);
    for (std::size_t c = 0; c < next.cells.size(); ++c)
        for (int i = 3; i < dirs.size(); ++i) {
            const SFCell& a = r.set.cells[c];
            const SFCell& b = next.cells[c];
            EXPECT_TRUE(b.points.row(b.slot[i]) == a.points.row(a.slot[i]));
        }
}

TEST(Backup, MonotoneWithStopIsNonDecreasing) {
    GridSpec g = grid3();
    g.idle_action = true;
    const PsrModel p = mdp_to_psr(gridworld_mdp(g));
    const DirectionSet dirs = sample_directions(8, 40, 2, 9);
    BackupConfig cfg = fixed_iterations(25);
    cfg.monotone = true;
    cfg.stop_matrix = constant_action_successor_matrix(p, kIdle);
    Vector prev;
    DpOptions opt;
    opt.observer = [&](const SFSet& s, const TraceRow&) {
        const Vector h = support_values(p, s, dirs);
        if (prev.size() > 0) EXPECT_GE((h - prev).minCoeff(), -1e-12);
        prev = h;
    };
    run_dp(p, cfg, dirs, opt);
}

TEST(Backup, MonotoneErrorsAreNonNegative) {
    GridSpec g = grid3();
    g.idle_action = true;
    const PsrModel p = mdp_to_psr(gridworld_mdp(g));
    BackupConfig cfg = fixed_iterations(10);
    cfg.monotone = true;
    cfg.stop_matrix = constant_action_successor_matrix(p, kIdle);
    DpOptions opt;
    opt.fresh = fresh_direction_sets(3, 2, 10, 2, 9);
    const DpResult r = run_dp(p, cfg, sample_directions(8, 40, 2, 9), opt);
    for (const TraceRow& row : r.trace.rows) {
        EXPECT_GE(row.max_error_optimized, 0.0);
        if (!std::isnan(row.max_error_fresh)) EXPECT_GE(row.max_error_fresh, 0.0);
    }
}

TEST(RunDp, ZeroDiscountConvergesAfterOneBackup) {
    const PsrModel p = mdp_to_psr(gridworld_mdp(grid3())).with_gamma(0.0);
    const DpResult r = run_dp(p, BackupConfig{}, sample_directions(1, 20, 2, 9));
    EXPECT_TRUE(r.trace.converged);
    ASSERT_EQ(r.trace.rows.size(), 2u);
    EXPECT_EQ(r.trace.rows[1].max_support_change, 0.0);
    EXPECT_EQ(r.trace.rows[0].max_error_optimized, 0.0);
}

TEST(RunDp, GridworldConverges) {
    const PsrModel p = mdp_to_psr(gridworld_mdp(grid3()));
    const DpResult r = run_dp(p, BackupConfig{}, sample_directions(2, 50, 2, 9));
    ASSERT_TRUE(r.trace.converged);
    EXPECT_LT(r.trace.rows.size(), 300u);
    EXPECT_LT(r.trace.rows.back().max_error_optimized, 1e-6);
}

TEST(RunDp, MatchesPbviWithRankOneDirections) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    const RewardSpec reward{(Vector(1) << 1.0).finished()};
    std::vector<Vector> beliefs;
    for (double x : {0.0, 0.2, 0.45, 0.7, 1.0}) beliefs.push_back((Vector(2) << x, 1.0 - x).finished());
    BackupConfig cfg = fixed_iterations(12);
    cfg.retention = Retention::Assembled;
    const DpResult r = run_dp(p, cfg, pbvi_directions(reward, beliefs));
    const std::vector<Vector> alphas = pbvi_reference(p, reward, beliefs, 13);
    for (const Vector& b : beliefs)
        EXPECT_NEAR(optimal_value(r.set, p, reward, b), alpha_value(alphas, b), 1e-12);
}

TEST(RunDp, DeterministicAndThreadIndependent) {
    GridSpec g = grid3();
    g.noise = 0.05;
    const PsrModel p = pomdp_to_psr(gridworld_pomdp(g));
    BackupConfig cfg = fixed_iterations(6);
    cfg.threads = 1;
    const DirectionSet dirs = sample_directions(9, 30, 2, 9);
    const std::string a = bytes(run_dp(p, cfg, dirs).set);
    const std::string b = bytes(run_dp(p, cfg, dirs).set);
    cfg.threads = 4;
    const std::string c = bytes(run_dp(p, cfg, dirs).set);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(ConstantAction, MatchesDeepTree) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    const Matrix A = constant_action_successor_matrix(p, 2);
    Matrix B = Matrix::Zero(p.d(), p.k());
    for (int h = 0; h < 400; ++h) {
        Matrix next = p.F(2);
        for (int o = 0; o < p.num_observations(); ++o) next += p.gamma() * B * p.T(2, o);
        B = next;
    }
    EXPECT_LT((A - B).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BellmanError, FixedPointHasZeroError) {
    // With one action and gamma 0 the set is a single point after one backup.
    const PsrModel p = mdp_to_psr(cycle_mdp(0.0));
    const DirectionSet dirs = sample_directions(1, 5, 1, 2);
    const DpResult r = run_dp(p, BackupConfig{}, dirs);
    const BellmanErrors e = bellman_error(p, r.set, sample_directions(2, 10, 1, 2));
    EXPECT_LE(e.error().cwiseAbs().maxCoeff(), 0.0);
}

TEST(ProjectedSet, LmoMatchesBruteForce) {
    GridSpec g = grid3();
    g.noise = 0.05;
    g.width = 2;
    g.height = 2;
    const PsrModel p = pomdp_to_psr(gridworld_pomdp(g));
    BackupConfig cfg = fixed_iterations(3);
    cfg.max_points = 2;
    const DpResult r = run_dp(p, cfg, sample_directions(3, 8, 2, 4));
    const Vector q = (Vector(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const ProjectedSet P(p, r.set, q);
    const Vector gdir = (Vector(2) << -0.6, 0.8).finished();
    for (int a = 0; a < p.num_actions(); ++a) {
        // Enumerate every annotation.
        const int O = p.num_observations();
        std::vector<int> ann(static_cast<std::size_t>(O), 0);
        double best = -1e300;
        while (true) {
            std::vector<int> full(static_cast<std::size_t>(O));
            for (int o = 0; o < O; ++o) full[o] = P.projected(a, o).rows() == 0 ? -1 : ann[o];
            best = std::max(best, P.vertex(a, full).dot(gdir));
            int o = 0;
            while (o < O) {
                const int n = std::max<int>(1, static_cast<int>(P.projected(a, o).rows()));
                if (++ann[o] < n) break;
                ann[o] = 0;
                ++o;
            }
            if (o == O) break;
        }
        EXPECT_NEAR(P.lmo(a, gdir).value, best, 1e-12);
    }
}

TEST(SfsetIo, BinaryRoundTripIsExact) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    const DpResult r = run_dp(p, fixed_iterations(4), sample_directions(3, 12, 1, 2));
    const std::string a = bytes(r.set);
    std::istringstream in(a);
    EXPECT_EQ(bytes(read_sfset(in)), a);
}

TEST(SfsetIo, TraceRoundTripIsExact) {
    const PsrModel p = mdp_to_psr(gridworld_mdp(grid3()));
    DpOptions opt;
    opt.fresh = fresh_direction_sets(1, 3, 5, 2, 9);
    opt.fresh_interval = 2;
    const DpResult r = run_dp(p, fixed_iterations(5), sample_directions(3, 12, 2, 9), opt);
    std::ostringstream a;
    write_trace_csv(a, r.trace);
    std::istringstream in(a.str());
    std::ostringstream b;
    write_trace_csv(b, read_trace_csv(in));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().rfind(kTraceHeader, 0), 0u);
}

TEST(SfsetIo, RejectsOtherModel) {
    const PsrModel p = pomdp_to_psr(two_state_pomdp());
    const PsrModel q = mdp_to_psr(gridworld_mdp(grid3()));
    const DpResult r = run_dp(p, fixed_iterations(1), sample_directions(3, 4, 1, 2));
    EXPECT_THROW(ProjectedSet(q, r.set, q.q1()), DimensionMismatch);
}
