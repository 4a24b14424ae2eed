// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "sfset/envs.hpp"
#include "sfset/errors.hpp"
#include "sfset/hull2d.hpp"
#include "sfset/imitation.hpp"
#include "sfset/oracle.hpp"
#include "sfset/planner.hpp"
#include "sfset/policy_tree.hpp"
#include "sfset/sf_dp.hpp"

using namespace sfs;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

GridSpec grid(int size) {
    GridSpec g;
    g.width = size;
    g.height = size;
    return g;
}

BackupConfig fixed_iterations(int n) {
    BackupConfig cfg;
    cfg.max_iters = n;
    cfg.convergence_tol = 1e-300;
    return cfg;
}

std::vector<Vector> angles(int count) {
    std::vector<Vector> out;
    for (int i = 0; i < count; ++i) {
        const double t = 2.0 * M_PI * i / count;
        out.push_back((Vector(2) << std::cos(t), std::sin(t)).finished());
    }
    return out;
}

Vector random_simplex(Rng& rng, int k) {
    std::exponential_distribution<double> e;
    Vector v = Vector::NullaryExpr(k, [&] { return e(rng); });
    return v / v.sum();
}

// 3x3 gridworld, 175 directions, set after H - 1 backups against the exact Phi^(H).
Outcome criterion1() {
    const MdpSpec mdp = gridworld_mdp(grid(3));
    const PsrModel model = mdp_to_psr(mdp);
    const DirectionSet dirs = sample_directions(1, 175, 2, 9);
    double worst_ratio = 0.0;
    std::string detail;
    bool pass = true;
    for (int H = 1; H <= 5; ++H) {
        const DpResult dp = run_dp(model, fixed_iterations(H - 1), dirs);
        const Vector h = support_values(model, dp.set, dirs);
        double gap = 0.0;
        for (int i = 0; i < dirs.size(); ++i)
            gap = std::max(gap, std::abs(mdp_exact_support(mdp, dirs[i], H) - h[i]));
        const double bound = 1e-6 + std::pow(mdp.gamma, H) * model.max_feature_norm() / (1.0 - mdp.gamma);
        pass = pass && gap <= bound;
        worst_ratio = std::max(worst_ratio, gap / bound);
        detail += " H" + std::to_string(H) + "=" + fmt("%.2e", gap);
    }
    return {pass, "optimized-direction gaps" + detail + fmt(" (worst gap/bound %.2e)", worst_ratio)};
}

// Per-state Hausdorff distance between successive exact iterates on the 3x3 grid.
Outcome criterion2() {
    const MdpSpec mdp = gridworld_mdp(grid(3));
    const auto sets = exact_state_sets_2d(mdp, 21);
    std::vector<double> dist;
    for (int H = 1; H <= 21; ++H) {
        double worst = 0.0;
        for (int s = 0; s < mdp.num_states(); ++s)
            worst = std::max(worst, hausdorff_2d(sets[H][s], sets[H - 1][s]));
        dist.push_back(worst);
    }
    double worst_ratio = 0.0;
    int checked = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i - 1] < 1e-12) continue;
        worst_ratio = std::max(worst_ratio, dist[i] / dist[i - 1]);
        ++checked;
    }
    return {checked > 0 && worst_ratio <= 0.9 + 1e-9,
            fmt("max ratio %.12f", worst_ratio) + " over " + std::to_string(checked) + " steps (H = 1..20)"};
}

// Converged DP against value iteration on the 3x3 grid and an 18x18 maze.
Outcome criterion3() {
    double worst = 0.0;
    std::string detail;
    for (const GridSpec& g : {grid(3), random_maze(18, 18, 5)}) {
        const MdpSpec mdp = gridworld_mdp(g);
        const PsrModel model = mdp_to_psr(mdp);
        BackupConfig cfg;
        cfg.convergence_tol = 1e-8;
        const DpResult dp = run_dp(model, cfg, tiled_directions(angles(720), mdp.num_states()));
        Rng rng(11);
        std::normal_distribution<double> normal;
        double err = 0.0;
        for (int t = 0; t < 5; ++t) {
            const RewardSpec r{(Vector(2) << normal(rng), normal(rng)).finished()};
            const Vector v = value_iteration(mdp, r);
            for (int s = 0; s < mdp.num_states(); ++s)
                err = std::max(err, std::abs(optimal_value(dp.set, model, r, Vector::Unit(mdp.num_states(), s)) - v[s]));
        }
        worst = std::max(worst, err);
        detail += " " + std::to_string(g.width) + "x" + std::to_string(g.height) + ": " + fmt("%.2e", err) + " after " +
                  std::to_string(dp.set.iteration) + (dp.trace.converged ? " backups (converged);" : " backups (NOT converged);");
    }
    return {worst <= 1e-5, "max |value - VI|" + detail};
}

// Rank-one directions r b_i^T reproduce point-based value iteration.
Outcome criterion4() {
    GridSpec g = grid(4);
    g.noise = 0.05;
    const PsrModel model = pomdp_to_psr(gridworld_pomdp(g));
    Rng rng(21);
    std::vector<Vector> beliefs;
    for (int i = 0; i < 20; ++i) beliefs.push_back(random_simplex(rng, model.k()));
    std::normal_distribution<double> normal;
    const RewardSpec r{(Vector(2) << normal(rng), normal(rng)).finished()};
    BackupConfig cfg = fixed_iterations(30);
    cfg.retention = Retention::Assembled;
    const DpResult dp = run_dp(model, cfg, pbvi_directions(r, beliefs));
    const std::vector<Vector> alphas = pbvi_reference(model, r, beliefs, 31);
    double err = 0.0;
    for (const Vector& b : beliefs) err = std::max(err, std::abs(optimal_value(dp.set, model, r, b) - alpha_value(alphas, b)));
    return {err <= 1e-8, fmt("max |DP - PBVI| over 20 beliefs %.2e", err)};
}

// Feature matching reproduces tree targets on the 3x3 grid.
Outcome criterion5() {
    const PsrModel model = mdp_to_psr(gridworld_mdp(grid(3)));
    BackupConfig cfg;
    cfg.convergence_tol = 1e-10;
    const DpResult dp = run_dp(model, cfg, tiled_directions(angles(360), 9));
    Rng rng(31);
    bool pass = dp.trace.converged;
    double worst_z = 0.0;
    double drift = 0.0;
    double bias = 0.0;
    for (int t = 0; t < 10; ++t) {
        const PolicyTree tree = random_tree(4, 9, 6, rng);
        const Vector target = successor_matrix(model, tree) * model.q1();
        const RolloutSummary s = rollout_match(dp.set, model, target, 0, 20000, 1000 * t);
        bias = s.truncation_bound;
        drift = std::max(drift, s.max_drift);
        for (int i = 0; i < model.d(); ++i) {
            const double err = std::abs(s.mean[i] - target[i]);
            if (err > 4.0 * s.standard_error[i] + s.truncation_bound) pass = false;
            if (s.standard_error[i] > 0.0) worst_z = std::max(worst_z, err / s.standard_error[i]);
        }
    }
    pass = pass && drift < 1e-6;
    return {pass, fmt("max |mean - target| / SE %.2f", worst_z) + fmt(", max drift %.2e", drift) +
                      fmt(", truncation bias bound %.1e", bias)};
}

struct TraceSummary {
    double final_error = 0.0;
    double fresh_mean = 0.0;
    double fresh_se = 0.0;
    double worst_increase = 0.0;
    int iterations = 0;
    bool converged = false;
    double seconds = 0.0;
};

TraceSummary trace_run(const PsrModel& model, int count, const std::vector<DirectionSet>& fresh) {
    const auto t0 = Clock::now();
    BackupConfig cfg;
    cfg.monotone = true;
    cfg.stop_matrix = constant_action_successor_matrix(model, 0);
    cfg.convergence_tol = 1e-7;
    cfg.max_iters = 1000;
    DpOptions opt;
    opt.fresh = fresh;
    opt.fresh_interval = 1000000;
    const DpResult dp = run_dp(model, cfg, sample_directions(100 + count, count, model.d(), model.k()), opt);
    TraceSummary out;
    const auto& rows = dp.trace.rows;
    for (std::size_t n = 4; n < rows.size(); ++n)
        out.worst_increase = std::max(out.worst_increase, rows[n].max_error_optimized - rows[n - 1].max_error_optimized);
    out.final_error = rows.back().max_error_optimized;
    out.fresh_mean = rows.back().max_error_fresh;
    out.fresh_se = rows.back().fresh_error_stderr;
    out.iterations = dp.set.iteration;
    out.converged = dp.trace.converged;
    out.seconds = seconds_since(t0);
    return out;
}

// Bellman-error traces on mountain car and a POMDP gridworld.
Outcome criterion6() {
    GridSpec g = grid(4);
    g.noise = 0.05;
    const std::vector<std::pair<std::string, PsrModel>> envs{
        {"mountain-car", mdp_to_psr(mountain_car({}))}, {"pomdp-4x4", pomdp_to_psr(gridworld_pomdp(g))}};
    bool pass = true;
    std::string detail;
    for (const auto& [name, model] : envs) {
        const double limit = 1e-6 / (1.0 - model.gamma());
        const std::vector<DirectionSet> fresh = fresh_direction_sets(7, 25, 100, model.d(), model.k());
        std::vector<TraceSummary> runs;
        for (int count : {50, 100, 175}) {
            runs.push_back(trace_run(model, count, fresh));
            const TraceSummary& s = runs.back();
            pass = pass && s.converged && s.worst_increase <= 0.0 && s.final_error < limit;
            detail += " " + name + "/" + std::to_string(count) + ": iters " + std::to_string(s.iterations) +
                      fmt(" final %.1e", s.final_error) + fmt(" max rise %.1e", s.worst_increase) +
                      fmt(" fresh %.4f", s.fresh_mean) + fmt("+-%.4f", s.fresh_se) + fmt(" (%.0fs);", s.seconds);
        }
        for (std::size_t i = 1; i < runs.size(); ++i) {
            const double pooled = std::hypot(runs[i - 1].fresh_se, runs[i].fresh_se);
            pass = pass && runs[i - 1].fresh_mean >= runs[i].fresh_mean - pooled;
        }
    }
    return {pass, detail.substr(1)};
}

// Monotone mode with an idle action on a 4x4 grid.
Outcome criterion7() {
    GridSpec g = grid(4);
    g.idle_action = true;
    const MdpSpec mdp = gridworld_mdp(g);
    const PsrModel model = mdp_to_psr(mdp);
    const Matrix stop = constant_action_successor_matrix(model, kIdle);
    const DirectionSet dirs = sample_directions(41, 100, 2, 16);
    BackupConfig cfg;
    cfg.monotone = true;
    cfg.stop_matrix = stop;
    cfg.convergence_tol = 1e-10;
    double worst_drop = 0.0;
    Vector previous;
    DpOptions opt;
    opt.observer = [&](const SFSet& set, const TraceRow&) {
        const Vector h = support_values(model, set, dirs);
        if (previous.size() > 0) worst_drop = std::max(worst_drop, (previous - h).maxCoeff());
        previous = h;
    };
    const DpResult dp = run_dp(model, cfg, dirs, opt);

    // One-step exact-form backup gap of the converged set over many directions.
    const DirectionSet probe = sample_directions(42, 2000, 2, 16);
    const BellmanErrors be = bellman_error(model, dp.set, probe);
    const BellmanErrors own = bellman_error(model, dp.set, dirs);
    const double eps = std::max(0.0, std::max(be.error().maxCoeff(), own.error().maxCoeff()));
    const double radius = eps / (1.0 - mdp.gamma);

    const DirectionSet check = sample_directions(43, 1000, 2, 16);
    const Vector h = support_values(model, dp.set, check);
    double containment = -1e300;
    double soundness = -1e300;
    for (int i = 0; i < check.size(); ++i) {
        const double n = check[i].norm();
        containment = std::max(containment, mdp_exact_support(mdp, check[i], 5, stop) - h[i] - radius * n);
        soundness = std::max(soundness, h[i] - mdp_exact_support(mdp, check[i], -1));
    }
    const bool pass = dp.trace.converged && worst_drop <= 1e-12 && containment <= 1e-9 && soundness <= 1e-9;
    return {pass, fmt("max support drop %.1e", worst_drop) + fmt(", eps %.2e", eps) +
                      fmt(", max(h_exact5 - h - eps/(1-g)) %.2e", containment) +
                      fmt(", max(h - h_exact_inf) %.2e", soundness) + " after " + std::to_string(dp.set.iteration) +
                      " backups"};
}

PomdpSpec two_state_pomdp() {
    PomdpSpec p;
    Matrix drift(2, 2);
    drift << 0.9, 0.2, 0.1, 0.8;
    p.transitions = {Matrix::Identity(2, 2), Matrix::Constant(2, 2, 0.5), drift};
    p.observation = (Matrix(2, 2) << 0.85, 0.25, 0.15, 0.75).finished();
    p.features = {(Matrix(2, 2) << -0.1, -0.1, 0.2, 0.0).finished(), (Matrix(2, 2) << 1.0, -1.0, 0.0, 0.5).finished(),
                  (Matrix(2, 2) << 0.3, 0.2, -0.4, 0.1).finished()};
    p.b1 = (Vector(2) << 0.5, 0.5).finished();
    p.gamma = 0.9;
    return p;
}

SimpleTest random_test(Rng& rng, int A, int O) {
    std::uniform_int_distribution<int> len(1, 3);
    std::uniform_int_distribution<int> act(0, A - 1);
    std::uniform_int_distribution<int> obs(0, O - 1);
    SimpleTest t;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        t.actions.push_back(act(rng));
        t.observations.push_back(obs(rng));
    }
    return t;
}

// Change of core tests leaves every prediction and plan unchanged.
Outcome criterion8() {
    const PsrModel model = pomdp_to_psr(two_state_pomdp());
    Rng rng(81);
    std::vector<SimpleTest> core;
    Matrix M;
    for (int attempt = 0;; ++attempt) {
        core = {random_test(rng, 3, 2), random_test(rng, 3, 2)};
        try {
            M = core_test_matrix(model, core);
            break;
        } catch (const SingularCoreTests&) {
            if (attempt > 100) return {false, "no invertible core-test family found"};
        }
    }
    const PsrModel moved = transform_via_core_tests(model, core);

    const DirectionSet dirs = sample_directions(82, 60, 2, 2);
    std::vector<Matrix> moved_dirs;
    for (const Matrix& m : dirs.directions) moved_dirs.push_back(m * M.transpose());
    const DpResult dp = run_dp(model, fixed_iterations(40), dirs);
    const DpResult dp2 = run_dp(moved, fixed_iterations(40), make_directions(moved_dirs));

    std::uniform_int_distribution<int> act(0, 2);
    std::uniform_int_distribution<int> len(0, 8);
    std::normal_distribution<double> normal;
    double prob_err = 0.0, test_err = 0.0, value_err = 0.0;
    for (int n = 0; n < 100; ++n) {
        Vector q = model.q1();
        Vector q2 = moved.q1();
        const int steps = len(rng);
        for (int t = 0; t < steps; ++t) {
            const int a = act(rng);
            const ObservationDistribution d = observation_probs(model, q, a);
            std::discrete_distribution<int> pick(d.probs.data(), d.probs.data() + d.probs.size());
            const int o = pick(rng);
            q = psr_update(model, q, a, o).state;
            q2 = psr_update(moved, q2, a, o).state;
        }
        for (int a = 0; a < 3; ++a)
            prob_err = std::max(prob_err, (observation_probs(model, q, a).probs - observation_probs(moved, q2, a).probs)
                                              .cwiseAbs()
                                              .maxCoeff());
        for (int t = 0; t < 5; ++t) {
            const SimpleTest test = random_test(rng, 3, 2);
            test_err = std::max(test_err, std::abs(test_value(model, q, test) - test_value(moved, q2, test)));
        }
        const RewardSpec r{(Vector(2) << normal(rng), normal(rng)).finished()};
        value_err = std::max(value_err, std::abs(optimal_value(dp.set, model, r, q) - optimal_value(dp2.set, moved, r, q2)));
    }
    const double worst = std::max({prob_err, test_err, value_err});
    return {worst <= 1e-8, fmt("max diffs: probabilities %.1e", prob_err) + fmt(", test values %.1e", test_err) +
                               fmt(", optimal values %.1e", value_err)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                         criterion5, criterion6, criterion7, criterion8};
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
    int failures = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const int id = static_cast<int>(c) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = criteria[c]();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.pass) ++failures;
        std::cout << "criterion " << id << ": " << (out.pass ? "PASS" : "FAIL") << " (" << fmt("%.1fs", seconds_since(t0))
                  << ") " << out.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
