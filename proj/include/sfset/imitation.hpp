#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfset/policy_tree.hpp"
#include "sfset/sf_dp.hpp"

namespace sfs {

struct FwConfig {
    /// Largest distance at which a target still counts as inside Phi q.
    double feas_tol = 1e-6;
    /// Residual a decomposition must reach.
    double fw_tol = 1e-8;
    int max_iters = 10000;
};

struct DecompositionEntry {
    int action = 0;
    double weight = 0.0;
    Vector vertex;
    std::vector<int> annotation;
};

/// Target written as a convex combination of annotated vertices of the Phi_a q.
struct Decomposition {
    std::vector<DecompositionEntry> entries;
    /// Distance between the combination and the target.
    double residual = 0.0;
    int iterations = 0;
    /// Residual after each major iteration (non-increasing).
    std::vector<double> residual_history;

    Vector combination() const;
};

struct FeasibilityResult {
    bool feasible = false;
    /// Closest point of Phi q found, and its distance to the target.
    Vector nearest;
    double distance = 0.0;
    /// Decomposition of `nearest`.
    Decomposition witness;
};

/// Minimizes ||x - target||^2 over Phi q by the minimum-norm-point variant
/// of Frank-Wolfe (fully corrective over the active vertices), started from
/// the action-0 vertex in the target's direction.
FeasibilityResult check_feasible(const ProjectedSet& projected, const Vector& target, double tol,
                                 const FwConfig& config = {});
FeasibilityResult check_feasible(const SFSet& set, const PsrModel& model, const Vector& q,
                                 const Vector& target, double tol);

/// Throws InfeasibleTarget if the residual stays above config.fw_tol.
Decomposition decompose_target(const ProjectedSet& projected, const Vector& target, const FwConfig& config = {});
Decomposition decompose_target(const SFSet& set, const PsrModel& model, const Vector& q, const Vector& target,
                               const FwConfig& config = {});

struct MatchState {
    Vector q;
    Vector target;
    int t = 0;
};

/// Remembers projected sets and decompositions, keyed by the exact bytes of
/// the state (and target). On MDPs the targets after the first step are
/// stored points, so rollouts mostly hit the cache.
class MatchCache {
public:
    MatchCache(const SFSet& set, const PsrModel& model, FwConfig config = {}, std::size_t capacity = 200000);

    const ProjectedSet& projected(const Vector& q);
    /// Decomposition of target at q; projects onto Phi q first when the
    /// target lies outside by more than fw_tol. `drift` receives the distance moved.
    const Decomposition& decompose(const Vector& q, Vector& target, double& drift);

    const SFSet& set() const { return set_; }
    const PsrModel& model() const { return model_; }
    const FwConfig& config() const { return config_; }

private:
    struct Entry {
        Decomposition decomposition;
        Vector target;
        double drift = 0.0;
    };
    const SFSet& set_;
    const PsrModel& model_;
    FwConfig config_;
    std::size_t capacity_;
    std::unordered_map<std::string, std::unique_ptr<ProjectedSet>> projected_;
    std::unordered_map<std::string, Entry> decompositions_;
};

struct StepResult {
    int action = 0;
    int observation = 0;
    /// Index of the decomposition entry that was executed.
    int entry = 0;
    MatchState next;
    /// Decomposition of next.target at next.q (empty on the final step).
    Decomposition next_decomposition;
    /// Distance the next target was moved to restore feasibility.
    double drift = 0.0;
};

/// One step of the feature-matching policy. `observe(a)` plays action a in
/// the environment and returns the observation.
StepResult step_match(MatchCache& cache, const MatchState& state, const Decomposition& decomposition, Rng& rng,
                      const std::function<int(int)>& observe, bool decompose_next = true);

struct RolloutLog {
    Vector features;
    double max_drift = 0.0;
    int projections = 0;
};

struct RolloutSummary {
    Vector mean;
    /// Per-coordinate standard error of the mean.
    Vector standard_error;
    int horizon = 0;
    /// Bound on the discounted features ignored by truncation.
    double truncation_bound = 0.0;
    double max_drift = 0.0;
    std::vector<RolloutLog> rollouts;
};

/// Smallest H with gamma^H max_a ||F_a||_F / (1 - gamma) below tail_tol.
int truncation_horizon(const PsrModel& model, double tail_tol);

/// Runs the feature-matching policy in the simulated model from q1.
/// horizon <= 0 picks truncation_horizon(model, 1e-6). Rollout i uses its
/// own generator seeded with seed + i.
RolloutSummary rollout_match(const SFSet& set, const PsrModel& model, const Vector& target, int horizon,
                             int num_rollouts, std::uint64_t seed, const FwConfig& config = {});

}  // namespace sfs
