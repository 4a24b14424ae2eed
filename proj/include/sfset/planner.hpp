#pragma once

#include <vector>

#include "sfset/sf_dp.hpp"

namespace sfs {

/// Linear reward R(q, a) = r^T f(q, a).
struct RewardSpec {
    Vector r;
};

/// max over actions and points psi of Phi_a of r^T psi q.
double optimal_value(const SFSet& set, const PsrModel& model, const RewardSpec& reward, const Vector& q);
/// Lowest-index action attaining optimal_value.
int optimal_action(const SFSet& set, const PsrModel& model, const RewardSpec& reward, const Vector& q);

/// psi^T r for the maximizer psi of <m_i, .> over each Phi_a, for every
/// stored direction m_i and action a; duplicates removed.
std::vector<Vector> alpha_vectors(const SFSet& set, const PsrModel& model, const RewardSpec& reward);
/// Pointwise maximum of the alpha vectors at q.
double alpha_value(const std::vector<Vector>& alphas, const Vector& q);

/// Directions r q_i^T, normalized. Throws DimensionMismatch for a zero reward or state.
DirectionSet pbvi_directions(const RewardSpec& reward, const std::vector<Vector>& states);

}  // namespace sfs
