#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sfset/hull2d.hpp"
#include "sfset/planner.hpp"
#include "sfset/policy_tree.hpp"
#include "sfset/sf_dp.hpp"

namespace sfs {

/// Successor matrices of every depth-H deterministic tree, deduplicated.
struct ExactSet {
    std::vector<Matrix> points;
    int horizon = 0;
    std::uint64_t fingerprint = 0;
};

/// Enumerates trees up to `cap`; throws EnumerationTooLarge beyond it.
ExactSet exact_sfset(const PsrModel& model, int horizon, double cap = TreeEnumerator::kDefaultCap);

double exact_support(const ExactSet& exact, const Matrix& m);

/// Support of Phi^(H) by the recursion
///   h_H(m) = max_a <m, F_a> + gamma sum_o h_{H-1}(m T_ao^T),  h_0(m) = <m, base>,
/// without enumerating trees. Cost grows like (A O)^H; for small models only.
double recursive_support(const PsrModel& model, const Matrix& m, int horizon,
                         const std::optional<Matrix>& base = std::nullopt);

/// Finite-horizon values V_H(s) for reward r on an MDP, V_0 = base (zero by default).
Vector finite_horizon_values(const MdpSpec& mdp, const Vector& r, int horizon,
                             const std::optional<Vector>& base = std::nullopt);

/// Fixed point of V(s) = max_a [r^T f(s, a) + gamma sum_s' P(s'|s, a) V(s')]
/// to sup-norm change below tol.
Vector value_iteration(const MdpSpec& mdp, const RewardSpec& reward, double tol = 1e-12);

/// Exact support of Phi^(H) on an MDP. After the first action the state is
/// some e_o, so only the root needs the matrix direction; below it the
/// support in g e_o^T is the horizon-(H-1) value V^g(o) for reward g.
/// `stop` (d x k) replaces the zero terminal matrix; horizon < 0 means infinite.
double mdp_exact_support(const MdpSpec& mdp, const Matrix& m, int horizon,
                         const std::optional<Matrix>& stop = std::nullopt);

/// Per-state sets Phi^(H) e_s of a 2-D MDP as counter-clockwise polygons,
/// for H = 0..max_horizon.
std::vector<std::vector<std::vector<Point2>>> exact_state_sets_2d(const MdpSpec& mdp, int max_horizon);

using SupportFn = std::function<double(const Matrix&)>;

struct GapReport {
    /// max |h_exact - h_approx| over the set's own directions and over fresh ones.
    double optimized = 0.0;
    double fresh = 0.0;
    /// max (h_approx - h_exact); positive values mean the approximation left the exact set.
    double excess = 0.0;
    int num_probes = 0;
};

/// Throws DimensionMismatch past 1e4 probes.
GapReport support_gap(const SupportFn& exact, const PsrModel& model, const SFSet& approx,
                      const DirectionSet& fresh);
GapReport support_gap(const ExactSet& exact, const PsrModel& model, const SFSet& approx, const DirectionSet& fresh);

/// Same comparison on Phi q at probe states, with g (length d) probes.
/// exact(q, g) must return max <g, phi> over the exact Phi q.
GapReport state_support_gap(const std::function<double(const Vector&, const Vector&)>& exact,
                            const PsrModel& model, const SFSet& approx, const std::vector<Vector>& states,
                            const std::vector<Vector>& optimized, const std::vector<Vector>& fresh);

/// Classic point-based value iteration from the single zero alpha vector.
/// Each iteration keeps, per sampled state, the best backed-up alpha (lowest
/// action on ties), dropping duplicates.
std::vector<Vector> pbvi_reference(const PsrModel& model, const RewardSpec& reward, const std::vector<Vector>& states,
                                   int iterations);

}  // namespace sfs
