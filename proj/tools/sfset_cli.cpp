#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfset/envs.hpp"
#include "sfset/imitation.hpp"
#include "sfset/model_io.hpp"
#include "sfset/oracle.hpp"
#include "sfset/planner.hpp"
#include "sfset/sfset_io.hpp"

using namespace sfs;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2, kResource = 3 };

struct UsageError : Error {
    using Error::Error;
};

int fail(int code, const std::string& kind, const std::string& message, Json extra = Json::object()) {
    extra["error"] = kind;
    extra["message"] = message;
    std::cerr << extra.dump() << '\n';
    return code;
}

void emit(const Json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(1) << '\n';
    } else {
        save_json(j, path);
    }
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// --------------------------------------------------------------------------- build-env

struct BuildEnvArgs {
    std::string env = "gridworld";
    int size = 3;
    int width = 0;
    int height = 0;
    double noise = 0.05;
    std::uint64_t seed = 0;
    bool idle = false;
    std::string features = "coords";
    double density = 0.2;
    int mesh = 12;
    double gamma = 0.9;
    std::string out;
};

int cmd_build_env(const BuildEnvArgs& a) {
    Json j;
    if (a.env == "mountain-car") {
        if (a.mesh < 1) throw UsageError("--mesh must be at least 1");
        MountainCarSpec spec;
        spec.mesh = a.mesh;
        spec.gamma = a.gamma;
        j = to_json(mountain_car(spec));
    } else {
        const int w = a.width > 0 ? a.width : a.size;
        const int h = a.height > 0 ? a.height : a.size;
        if (w < 1 || h < 1) throw UsageError("grid size must be at least 1");
        GridSpec g = a.env == "maze" ? random_maze(w, h, a.seed, a.density) : GridSpec{};
        g.width = w;
        g.height = h;
        g.seed = a.seed;
        g.idle_action = a.idle;
        g.gamma = a.gamma;
        g.feature_mode = a.features == "rgb" ? FeatureMode::RgbTable : FeatureMode::Coordinates;
        if (a.env == "gridworld-pomdp") {
            g.noise = a.noise;
            j = to_json(gridworld_pomdp(g));
        } else {
            j = to_json(gridworld_mdp(g));
        }
    }
    emit(j, a.out);
    return kOk;
}

// --------------------------------------------------------------------------- run-dp

struct DirectionArgs {
    int count = 50;
    std::uint64_t seed = 0;
    int tiled = 0;
};

DirectionSet build_directions(const PsrModel& model, const DirectionArgs& a) {
    if (a.tiled > 0) {
        if (model.d() != 2) throw UsageError("--tiled needs d = 2");
        std::vector<Vector> dirs;
        for (int i = 0; i < a.tiled; ++i) {
            const double t = 2.0 * std::numbers::pi * i / a.tiled;
            Vector g(2);
            g << std::cos(t), std::sin(t);
            dirs.push_back(g);
        }
        return tiled_directions(dirs, model.k());
    }
    if (a.count < 1) throw UsageError("--directions must be at least 1");
    return sample_directions(a.seed, a.count, model.d(), model.k());
}

struct RunDpArgs {
    std::string model;
    DirectionArgs dirs;
    int iterations = 1000;
    std::optional<double> tol;
    std::optional<double> gamma;
    bool monotone = false;
    std::optional<int> init_action;
    std::string retention = "per-cell";
    int max_points = 0;
    int fresh_sets = 25;
    int fresh_interval = 1;
    std::uint64_t fresh_seed = 1000003;
    bool strict = false;
    std::string out;
    std::string trace;
};

int cmd_run_dp(const RunDpArgs& a) {
    PsrModel model = load_model(a.model);
    if (a.gamma) model = model.with_gamma(*a.gamma);
    BackupConfig cfg;
    cfg.max_iters = a.iterations;
    cfg.convergence_tol = a.tol;
    cfg.monotone = a.monotone;
    cfg.max_points = a.max_points;
    cfg.retention = a.retention == "assembled" ? Retention::Assembled : Retention::PerCell;
    if (a.init_action) cfg.stop_matrix = constant_action_successor_matrix(model, *a.init_action);
    const DirectionSet dirs = build_directions(model, a.dirs);
    DpOptions opt;
    if (a.fresh_sets > 0)
        opt.fresh = fresh_direction_sets(a.fresh_seed, a.fresh_sets, dirs.size(), model.d(), model.k());
    opt.fresh_interval = a.fresh_interval;
    const DpResult r = run_dp(model, cfg, dirs, opt);
    if (!a.out.empty()) save_sfset(r.set, a.out);
    if (!a.trace.empty()) {
        save_trace_csv(r.trace, a.trace);
    } else {
        write_trace_csv(std::cout, r.trace);
    }
    if (a.strict && !r.trace.converged)
        return fail(kNumerical, "NotConverged", "no convergence within " + std::to_string(a.iterations) + " iterations");
    return kOk;
}

// --------------------------------------------------------------------------- bellman-error

struct BellmanArgs {
    std::string model;
    std::string set;
    DirectionArgs dirs;
    bool monotone = false;
    std::string out;
};

Json error_summary(const BellmanErrors& e, bool monotone) {
    Vector err = e.error();
    if (monotone) {
        err = err.cwiseMax(0.0);
    } else {
        err = err.cwiseAbs();
    }
    return {{"max", err.maxCoeff()}, {"mean", err.mean()}, {"count", err.size()}};
}

int cmd_bellman_error(const BellmanArgs& a) {
    const PsrModel model = load_model(a.model);
    const SFSet set = load_sfset(a.set);
    Json j;
    j["iteration"] = set.iteration;
    j["optimized"] = error_summary(bellman_error(model, set, set.directions), a.monotone);
    j["fresh"] = error_summary(bellman_error(model, set, build_directions(model, a.dirs)), a.monotone);
    emit(j, a.out);
    return kOk;
}

// --------------------------------------------------------------------------- plan

struct PlanArgs {
    std::string model;
    std::string set;
    std::vector<double> reward;
    std::vector<double> state;
    std::string out;
};

int cmd_plan(const PlanArgs& a) {
    const PsrModel model = load_model(a.model);
    const SFSet set = load_sfset(a.set);
    const RewardSpec reward{to_vector(a.reward)};
    if (reward.r.size() != model.d()) throw UsageError("--reward needs d entries");
    std::vector<Vector> states;
    if (!a.state.empty()) {
        if (static_cast<int>(a.state.size()) != model.k()) throw UsageError("--state needs k entries");
        states.push_back(to_vector(a.state));
    } else {
        for (int s = 0; s < model.k(); ++s) states.push_back(Vector::Unit(model.k(), s));
    }
    const std::size_t alpha_count = alpha_vectors(set, model, reward).size();
    Json rows = Json::array();
    for (std::size_t s = 0; s < states.size(); ++s) {
        const LmoResult best = ProjectedSet(model, set, states[s]).lmo(reward.r);
        Json row{{"value", best.value}, {"action", best.action}, {"alpha_count", alpha_count}};
        if (a.state.empty()) {
            row["state"] = s;
        } else {
            row["state"] = vector_to_json(states[s]);
        }
        rows.push_back(row);
    }
    emit(rows, a.out);
    return kOk;
}

// --------------------------------------------------------------------------- imitate

struct ImitateArgs {
    std::string model;
    std::string set;
    std::string target;
    std::string tree;
    std::string csv;
    int rollouts = 1000;
    int horizon = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_imitate(const ImitateArgs& a) {
    const PsrModel model = load_model(a.model);
    const SFSet set = load_sfset(a.set);
    std::string tree_path = a.tree;
    Vector target;
    if (a.target.rfind("from-policy", 0) == 0) {
        tree_path = a.target.substr(std::string("from-policy").size());
        tree_path.erase(0, tree_path.find_first_not_of(' '));
    } else if (!a.target.empty()) {
        // JSON array, or bare comma-separated numbers.
        const std::string text = a.target.front() == '[' ? a.target : "[" + a.target + "]";
        const Json j = Json::parse(text);
        target = vector_from_json(j);
    }
    if (!tree_path.empty()) {
        target = successor_matrix(model, tree_from_json(load_json(tree_path))) * model.q1();
    } else if (target.size() == 0) {
        throw UsageError("give --target or --tree");
    }
    if (target.size() != model.d()) throw UsageError("target needs d entries");
    if (a.rollouts < 1) throw UsageError("--rollouts must be at least 1");
    const RolloutSummary s = rollout_match(set, model, target, a.horizon, a.rollouts, a.seed);
    const Vector z = (s.mean - target).cwiseAbs().cwiseQuotient(s.standard_error.cwiseMax(1e-300));
    Json j{{"target", vector_to_json(target)},
           {"mean", vector_to_json(s.mean)},
           {"standard_error", vector_to_json(s.standard_error)},
           {"max_z", z.maxCoeff()},
           {"horizon", s.horizon},
           {"truncation_bound", s.truncation_bound},
           {"max_drift", s.max_drift},
           {"rollouts", a.rollouts}};
    if (!a.csv.empty()) {
        std::ofstream f(a.csv);
        if (!f) throw UsageError("cannot write " + a.csv);
        f << "# sfset-rollouts v1\nrollout";
        for (int i = 0; i < model.d(); ++i) f << ",f" << i;
        f << ",max_drift,projections\n";
        f.precision(17);
        for (std::size_t n = 0; n < s.rollouts.size(); ++n) {
            f << n;
            for (int i = 0; i < model.d(); ++i) f << ',' << s.rollouts[n].features[i];
            f << ',' << s.rollouts[n].max_drift << ',' << s.rollouts[n].projections << '\n';
        }
    }
    emit(j, a.out);
    return kOk;
}

// --------------------------------------------------------------------------- oracle-compare

struct OracleArgs {
    std::string model;
    std::string set;
    int horizon = 1;
    std::string method = "auto";
    DirectionArgs dirs;
    double cap = TreeEnumerator::kDefaultCap;
    std::string out;
};

int cmd_oracle_compare(const OracleArgs& a) {
    const Json raw = load_json(a.model);
    const PsrModel model = load_model(a.model);
    const SFSet set = load_sfset(a.set);
    const bool is_mdp = raw.value("type", "") == "mdp";
    std::string method = a.method;
    if (method == "auto") method = is_mdp ? "mdp" : "enumerate";
    SupportFn exact;
    std::optional<ExactSet> enumerated;
    std::optional<MdpSpec> mdp;
    if (method == "enumerate") {
        enumerated = exact_sfset(model, a.horizon, a.cap);
        exact = [&](const Matrix& m) { return exact_support(*enumerated, m); };
    } else if (method == "recursion") {
        exact = [&](const Matrix& m) { return recursive_support(model, m, a.horizon); };
    } else if (method == "mdp") {
        if (!is_mdp) throw UsageError("--method mdp needs an MDP model file");
        mdp = mdp_from_json(raw);
        exact = [&](const Matrix& m) { return mdp_exact_support(*mdp, m, a.horizon); };
    } else {
        throw UsageError("unknown --method " + method);
    }
    const GapReport g = support_gap(exact, model, set, build_directions(model, a.dirs));
    const double bound = std::pow(model.gamma(), a.horizon) * model.max_feature_norm() / (1.0 - model.gamma());
    Json j{{"horizon", a.horizon},        {"method", method},           {"set_iteration", set.iteration},
           {"gap_optimized", g.optimized}, {"gap_fresh", g.fresh},       {"max_excess", g.excess},
           {"probes", g.num_probes},       {"tail_bound", bound}};
    if (enumerated) j["exact_points"] = enumerated->points.size();
    emit(j, a.out);
    return kOk;
}

void add_direction_flags(CLI::App* app, DirectionArgs& d) {
    app->add_option("--directions", d.count, "Number of Gaussian directions")->check(CLI::PositiveNumber);
    app->add_option("--seed", d.seed, "Direction seed");
    app->add_option("--tiled", d.tiled, "Use g 1^T directions on this many angles (d = 2)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Successor feature sets: dynamic programming, planning and feature matching"};
    app.require_subcommand(1);

    BuildEnvArgs build;
    CLI::App* c_build = app.add_subcommand("build-env", "Write an environment model as JSON");
    c_build->add_option("--env", build.env)
        ->check(CLI::IsMember({"gridworld", "gridworld-pomdp", "maze", "mountain-car"}));
    c_build->add_option("--size", build.size, "Grid width and height");
    c_build->add_option("--width", build.width);
    c_build->add_option("--height", build.height);
    c_build->add_option("--noise", build.noise, "POMDP slip/observation noise")->check(CLI::Range(0.0, 1.0));
    c_build->add_option("--seed", build.seed);
    c_build->add_flag("--idle", build.idle, "Add an idle action");
    c_build->add_option("--features", build.features)->check(CLI::IsMember({"coords", "rgb"}));
    c_build->add_option("--wall-density", build.density)->check(CLI::Range(0.0, 1.0));
    c_build->add_option("--mesh", build.mesh);
    c_build->add_option("--gamma", build.gamma)->check(CLI::Range(0.0, 0.999999));
    c_build->add_option("--out", build.out, "Output path (stdout when omitted)");

    RunDpArgs dp;
    CLI::App* c_dp = app.add_subcommand("run-dp", "Point-based dynamic programming");
    c_dp->add_option("--model", dp.model)->required();
    add_direction_flags(c_dp, dp.dirs);
    c_dp->add_option("--iterations", dp.iterations, "Maximum number of backups")->check(CLI::NonNegativeNumber);
    c_dp->add_option("--tol", dp.tol, "Support-change tolerance");
    c_dp->add_option("--gamma", dp.gamma, "Override the model discount")->check(CLI::Range(0.0, 0.999999));
    c_dp->add_flag("--monotone", dp.monotone);
    c_dp->add_option("--init-action", dp.init_action, "Start from the always-play-this-action matrix");
    c_dp->add_option("--retention", dp.retention)->check(CLI::IsMember({"per-cell", "assembled"}));
    c_dp->add_option("--max-points", dp.max_points)->check(CLI::NonNegativeNumber);
    c_dp->add_option("--fresh-sets", dp.fresh_sets)->check(CLI::NonNegativeNumber);
    c_dp->add_option("--fresh-interval", dp.fresh_interval)->check(CLI::PositiveNumber);
    c_dp->add_option("--fresh-seed", dp.fresh_seed);
    c_dp->add_flag("--strict", dp.strict, "Exit 2 when not converged");
    c_dp->add_option("--out", dp.out, "SFSet output path");
    c_dp->add_option("--trace", dp.trace, "Trace CSV path (stdout when omitted)");

    BellmanArgs be;
    CLI::App* c_be = app.add_subcommand("bellman-error", "Bellman error of a stored set");
    c_be->add_option("--model", be.model)->required();
    c_be->add_option("--set", be.set)->required();
    add_direction_flags(c_be, be.dirs);
    c_be->add_flag("--monotone", be.monotone, "Measure against conv(Phi u B Phi)");
    c_be->add_option("--out", be.out);

    PlanArgs plan;
    CLI::App* c_plan = app.add_subcommand("plan", "Optimal values and actions for a linear reward");
    c_plan->add_option("--model", plan.model)->required();
    c_plan->add_option("--set", plan.set)->required();
    c_plan->add_option("--reward", plan.reward)->required()->delimiter(',');
    c_plan->add_option("--state", plan.state, "State vector (all basis states when omitted)")->delimiter(',');
    c_plan->add_option("--out", plan.out);

    ImitateArgs im;
    CLI::App* c_im = app.add_subcommand("imitate", "Feature matching by rollouts");
    c_im->add_option("--model", im.model)->required();
    c_im->add_option("--set", im.set)->required();
    c_im->add_option("--target", im.target, "JSON vector, comma list, or 'from-policy <tree.json>'");
    c_im->add_option("--tree", im.tree, "Policy tree JSON whose A q1 is the target");
    c_im->add_option("--csv", im.csv, "Per-rollout discounted features");
    c_im->add_option("--rollouts", im.rollouts);
    c_im->add_option("--horizon", im.horizon, "Rollout length (automatic when 0)");
    c_im->add_option("--seed", im.seed);
    c_im->add_option("--out", im.out);

    OracleArgs oc;
    CLI::App* c_oc = app.add_subcommand("oracle-compare", "Support gap against an exact set");
    c_oc->add_option("--model", oc.model)->required();
    c_oc->add_option("--set", oc.set)->required();
    c_oc->add_option("--horizon", oc.horizon)->check(CLI::NonNegativeNumber);
    c_oc->add_option("--method", oc.method)->check(CLI::IsMember({"auto", "enumerate", "recursion", "mdp"}));
    add_direction_flags(c_oc, oc.dirs);
    c_oc->add_option("--cap", oc.cap, "Largest number of trees to enumerate");
    c_oc->add_option("--out", oc.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (c_build->parsed()) return cmd_build_env(build);
        if (c_dp->parsed()) return cmd_run_dp(dp);
        if (c_be->parsed()) return cmd_bellman_error(be);
        if (c_plan->parsed()) return cmd_plan(plan);
        if (c_im->parsed()) return cmd_imitate(im);
        if (c_oc->parsed()) return cmd_oracle_compare(oc);
    } catch (const InfeasibleTarget& e) {
        return fail(kNumerical, "InfeasibleTarget", e.what(), {{"distance", e.distance()}});
    } catch (const EnumerationTooLarge& e) {
        return fail(kResource, "EnumerationTooLarge", e.what());
    } catch (const ZeroProbabilityObservation& e) {
        return fail(kNumerical, "ZeroProbabilityObservation", e.what());
    } catch (const SingularCoreTests& e) {
        return fail(kNumerical, "SingularCoreTests", e.what());
    } catch (const DegenerateMixture& e) {
        return fail(kNumerical, "DegenerateMixture", e.what());
    } catch (const UsageError& e) {
        return fail(kUsage, "Usage", e.what());
    } catch (const DimensionMismatch& e) {
        return fail(kUsage, "DimensionMismatch", e.what());
    } catch (const InvalidModel& e) {
        return fail(kUsage, "InvalidModel", e.what());
    } catch (const Json::exception& e) {
        return fail(kUsage, "InvalidJson", e.what());
    } catch (const Error& e) {
        return fail(kUsage, "Error", e.what());
    }
    return kUsage;
}
