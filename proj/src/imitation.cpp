#include "sfset/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sfs {

namespace {

struct Atom {
    int action = 0;
    std::vector<int> annotation;
    Vector vertex;
    // vertex - target
    Vector shifted;
};

// Weights mu with sum 1 minimizing ||sum_i mu_i w_i||, minimum-norm when
// the atoms are affinely dependent.
Vector affine_minimizer(const std::vector<Atom>& atoms) {
    const Eigen::Index m = static_cast<Eigen::Index>(atoms.size());
    Vector mu(m);
    if (m == 1) {
        mu[0] = 1.0;
        return mu;
    }
    const Vector& w0 = atoms[0].shifted;
    Matrix D(w0.size(), m - 1);
    for (Eigen::Index i = 1; i < m; ++i) D.col(i - 1) = atoms[i].shifted - w0;
    const Vector beta = Eigen::CompleteOrthogonalDecomposition<Matrix>(D).solve(-w0);
    mu[0] = 1.0 - beta.sum();
    mu.tail(m - 1) = beta;
    return mu;
}

Vector combine(const std::vector<Atom>& atoms, const std::vector<double>& lambda) {
    Vector x = Vector::Zero(atoms.front().shifted.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) x.noalias() += lambda[i] * atoms[i].shifted;
    return x;
}

FeasibilityResult min_norm_point(const ProjectedSet& P, const Vector& target, const FwConfig& config) {
    if (target.size() != P.base(0).size()) throw DimensionMismatch("target must have length d");
    constexpr double kDrop = 1e-14;
    const double gap_tol = 1e-13 * (1.0 + target.squaredNorm());

    std::vector<Atom> atoms;
    std::vector<double> lambda;
    auto make_atom = [&](LmoResult r) {
        Atom a{r.action, std::move(r.annotation), std::move(r.vertex), Vector()};
        a.shifted = a.vertex - target;
        return a;
    };
    atoms.push_back(make_atom(P.lmo(0, target)));
    lambda.push_back(1.0);
    Vector x = atoms[0].shifted;

    Decomposition dec;
    int it = 0;
    for (; it < config.max_iters; ++it) {
        const double xn = x.norm();
        dec.residual_history.push_back(xn);
        if (xn <= config.fw_tol) break;
        Atom v = make_atom(P.lmo(Vector(-x)));
        if (x.dot(x - v.shifted) <= gap_tol) break;
        const bool duplicate = std::any_of(atoms.begin(), atoms.end(), [&](const Atom& a) {
            return a.action == v.action && a.annotation == v.annotation;
        });
        if (duplicate) break;
        std::vector<Atom> trial_atoms = atoms;
        std::vector<double> trial_lambda = lambda;
        trial_atoms.push_back(std::move(v));
        trial_lambda.push_back(0.0);
        for (std::size_t minor = 0; minor <= trial_atoms.size() + 1; ++minor) {
            const Vector mu = affine_minimizer(trial_atoms);
            if ((mu.array() > kDrop).all()) {
                trial_lambda.assign(mu.data(), mu.data() + mu.size());
                break;
            }
            double theta = 1.0;
            for (std::size_t i = 0; i < trial_atoms.size(); ++i)
                if (mu[static_cast<Eigen::Index>(i)] <= kDrop) {
                    const double denom = trial_lambda[i] - mu[static_cast<Eigen::Index>(i)];
                    if (denom > 0.0) theta = std::min(theta, trial_lambda[i] / denom);
                }
            for (std::size_t i = 0; i < trial_atoms.size(); ++i)
                trial_lambda[i] = (1.0 - theta) * trial_lambda[i] + theta * mu[static_cast<Eigen::Index>(i)];
            std::vector<Atom> kept_atoms;
            std::vector<double> kept_lambda;
            for (std::size_t i = 0; i < trial_atoms.size(); ++i)
                if (trial_lambda[i] > kDrop) {
                    kept_atoms.push_back(std::move(trial_atoms[i]));
                    kept_lambda.push_back(trial_lambda[i]);
                }
            if (kept_atoms.empty()) break;
            double total = 0.0;
            for (double l : kept_lambda) total += l;
            for (double& l : kept_lambda) l /= total;
            trial_atoms = std::move(kept_atoms);
            trial_lambda = std::move(kept_lambda);
        }
        const Vector trial_x = combine(trial_atoms, trial_lambda);
        // Rounding can stall the last digits; stop instead of cycling.
        if (!(trial_x.norm() < xn)) break;
        atoms = std::move(trial_atoms);
        lambda = std::move(trial_lambda);
        x = trial_x;
    }
    if (dec.residual_history.empty() || dec.residual_history.back() != x.norm()) dec.residual_history.push_back(x.norm());
    dec.iterations = it;
    dec.residual = x.norm();
    for (std::size_t i = 0; i < atoms.size(); ++i)
        dec.entries.push_back({atoms[i].action, lambda[i], atoms[i].vertex, atoms[i].annotation});

    FeasibilityResult out;
    out.nearest = target + x;
    out.distance = dec.residual;
    out.witness = std::move(dec);
    return out;
}

std::string bytes_of(const Vector& a) {
    return std::string(reinterpret_cast<const char*>(a.data()), sizeof(double) * static_cast<std::size_t>(a.size()));
}

}  // namespace

Vector Decomposition::combination() const {
    if (entries.empty()) throw EmptySet("empty decomposition");
    Vector x = Vector::Zero(entries.front().vertex.size());
    for (const DecompositionEntry& e : entries) x.noalias() += e.weight * e.vertex;
    return x;
}

FeasibilityResult check_feasible(const ProjectedSet& projected, const Vector& target, double tol,
                                 const FwConfig& config) {
    FeasibilityResult r = min_norm_point(projected, target, config);
    r.feasible = r.distance <= tol;
    return r;
}

FeasibilityResult check_feasible(const SFSet& set, const PsrModel& model, const Vector& q, const Vector& target,
                                 double tol) {
    return check_feasible(ProjectedSet(model, set, q), target, tol);
}

Decomposition decompose_target(const ProjectedSet& projected, const Vector& target, const FwConfig& config) {
    FeasibilityResult r = min_norm_point(projected, target, config);
    if (r.distance > config.fw_tol)
        throw InfeasibleTarget("target is not in the achievable set (distance " + std::to_string(r.distance) + ")",
                               r.distance);
    return std::move(r.witness);
}

Decomposition decompose_target(const SFSet& set, const PsrModel& model, const Vector& q, const Vector& target,
                               const FwConfig& config) {
    return decompose_target(ProjectedSet(model, set, q), target, config);
}

MatchCache::MatchCache(const SFSet& set, const PsrModel& model, FwConfig config, std::size_t capacity)
    : set_(set), model_(model), config_(config), capacity_(capacity) {
    check_compatible(model, set);
}

const ProjectedSet& MatchCache::projected(const Vector& q) {
    const std::string key = bytes_of(q);
    auto it = projected_.find(key);
    if (it != projected_.end()) return *it->second;
    if (projected_.size() >= capacity_) projected_.clear();
    return *projected_.emplace(key, std::make_unique<ProjectedSet>(model_, set_, q)).first->second;
}

const Decomposition& MatchCache::decompose(const Vector& q, Vector& target, double& drift) {
    const std::string key = bytes_of(q) + bytes_of(target);
    auto it = decompositions_.find(key);
    if (it == decompositions_.end()) {
        FeasibilityResult r = min_norm_point(projected(q), target, config_);
        Entry e;
        e.target = target;
        if (r.distance > config_.fw_tol) {
            // Restore the invariant by moving the target onto Phi q.
            e.target = r.nearest;
            e.drift = r.distance;
            r.witness.residual = 0.0;
        }
        e.decomposition = std::move(r.witness);
        if (decompositions_.size() >= capacity_) decompositions_.clear();
        it = decompositions_.emplace(key, std::move(e)).first;
    }
    target = it->second.target;
    drift = it->second.drift;
    return it->second.decomposition;
}

StepResult step_match(MatchCache& cache, const MatchState& state, const Decomposition& decomposition, Rng& rng,
                      const std::function<int(int)>& observe, bool decompose_next) {
    if (decomposition.entries.empty()) throw EmptySet("empty decomposition");
    std::vector<double> weights;
    for (const DecompositionEntry& e : decomposition.entries) weights.push_back(e.weight);
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    StepResult out;
    out.entry = pick(rng);
    const DecompositionEntry& chosen = decomposition.entries[out.entry];
    out.action = chosen.action;
    out.observation = observe(out.action);

    const ProjectedSet& here = cache.projected(state.q);
    const StateUpdate up = psr_update(cache.model(), state.q, out.action, out.observation);
    const int j = chosen.annotation.at(out.observation);
    Vector target = Vector::Zero(state.target.size());
    if (j >= 0) target = here.projected(out.action, out.observation).row(j).transpose() / up.prob;
    out.next = {up.state, target, state.t + 1};
    if (decompose_next) {
        out.next_decomposition = cache.decompose(out.next.q, out.next.target, out.drift);
    }
    return out;
}

int truncation_horizon(const PsrModel& model, double tail_tol) {
    if (!(tail_tol > 0.0)) throw DimensionMismatch("tail tolerance must be positive");
    const double scale = model.max_feature_norm() / (1.0 - model.gamma());
    int h = 1;
    double tail = model.gamma() * scale;
    while (tail >= tail_tol && h < 100000) {
        tail *= model.gamma();
        ++h;
    }
    return h;
}

RolloutSummary rollout_match(const SFSet& set, const PsrModel& model, const Vector& target, int horizon,
                             int num_rollouts, std::uint64_t seed, const FwConfig& config) {
    if (num_rollouts < 1) throw DimensionMismatch("need at least one rollout");
    RolloutSummary summary;
    summary.horizon = horizon > 0 ? horizon : truncation_horizon(model, 1e-6);
    summary.truncation_bound =
        std::pow(model.gamma(), summary.horizon) * model.max_feature_norm() / (1.0 - model.gamma());

    MatchCache cache(set, model, config);
    const FeasibilityResult start = min_norm_point(cache.projected(model.q1()), target, config);
    if (start.distance > config.feas_tol)
        throw InfeasibleTarget("target is not in the achievable set (distance " + std::to_string(start.distance) + ")",
                               start.distance);
    Vector start_target = target;
    double start_drift = 0.0;
    const Decomposition start_dec = cache.decompose(model.q1(), start_target, start_drift);

    const int d = model.d();
    Matrix all(num_rollouts, d);
    for (int n = 0; n < num_rollouts; ++n) {
        Rng rng(seed + static_cast<std::uint64_t>(n));
        RolloutLog log;
        log.features = Vector::Zero(d);
        log.max_drift = start_drift;
        MatchState state{model.q1(), start_target, 0};
        Decomposition dec = start_dec;
        double discount = 1.0;
        for (int t = 0; t < summary.horizon; ++t) {
            const Vector q = state.q;
            auto observe = [&](int a) {
                const ObservationDistribution dist = observation_probs(model, q, a);
                std::discrete_distribution<int> pick(dist.probs.data(), dist.probs.data() + dist.probs.size());
                return pick(rng);
            };
            const bool last = t + 1 == summary.horizon;
            StepResult step = step_match(cache, state, dec, rng, observe, !last);
            log.features.noalias() += discount * (model.F(step.action) * q);
            discount *= model.gamma();
            if (step.drift > 0.0) ++log.projections;
            log.max_drift = std::max(log.max_drift, step.drift);
            state = std::move(step.next);
            dec = std::move(step.next_decomposition);
        }
        all.row(n) = log.features.transpose();
        summary.max_drift = std::max(summary.max_drift, log.max_drift);
        summary.rollouts.push_back(std::move(log));
    }
    summary.mean = all.colwise().mean().transpose();
    summary.standard_error = Vector::Zero(d);
    if (num_rollouts > 1) {
        const Matrix centered = all.rowwise() - summary.mean.transpose();
        summary.standard_error =
            (centered.colwise().squaredNorm().transpose() / (num_rollouts - 1)).cwiseSqrt() / std::sqrt(num_rollouts);
    }
    return summary;
}

}  // namespace sfs
