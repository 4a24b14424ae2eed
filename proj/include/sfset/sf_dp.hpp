#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sfset/model.hpp"

namespace sfs {

/// Argmax ties within this margin go to the lowest index.
inline constexpr double kTieTol = 1e-12;

/// Fixed directions m_i (d x k, unit Frobenius norm) used to prune the set.
struct DirectionSet {
    std::vector<Matrix> directions;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(directions.size()); }
    const Matrix& operator[](int i) const { return directions[i]; }
};

/// i.i.d. standard Gaussian d x k matrices, each scaled to unit norm.
DirectionSet sample_directions(std::uint64_t seed, int count, int d, int k);
/// Normalizes the given matrices; throws DimensionMismatch on a zero matrix.
DirectionSet make_directions(std::vector<Matrix> directions, std::uint64_t seed = 0);
/// Direction g 1^T for each g: the same feature direction in every state column.
DirectionSet tiled_directions(const std::vector<Vector>& feature_dirs, int k);
/// `count` independent sets of `size` directions each, seeds derived from `seed`.
std::vector<DirectionSet> fresh_direction_sets(std::uint64_t seed, int count, int size, int d, int k);

struct SupportPoint {
    double value = 0.0;
    int index = -1;
};

/// max_j <m, points[j]> with the lowest maximizing index.
SupportPoint support(const std::vector<Matrix>& points, const Matrix& m);

/// How each (a, o) cell picks its new point for direction m_i.
///  PerCell: most extreme point of the backed-up Phi T_ao in direction m_i.
///  Assembled: the maximizer psi of <m_i, psi> over the backed-up Phi, stored
///  as psi T_ao in every cell. With m_i = r q_i^T this is exactly PBVI.
enum class Retention { PerCell, Assembled };

struct BackupConfig {
    /// Largest number of points kept per cell; 0 means the direction count.
    int max_points = 0;
    /// Keep the old maximizer of a direction when it beats the backed-up one.
    bool monotone = false;
    /// Only these directions get new points; the rest keep their old ones.
    std::optional<std::vector<int>> incremental_subset;
    double dedup_tol = 1e-10;
    /// Initial matrix for stoppable problems (replaces the zero matrix).
    std::optional<Matrix> stop_matrix;
    int max_iters = 1000;
    /// Defaults to default_convergence_tol(model).
    std::optional<double> convergence_tol;
    Retention retention = Retention::PerCell;
    /// Worker threads; 0 reads SFSET_THREADS, falling back to the hardware count.
    int threads = 0;
};

/// 1e-8 (1 - gamma)^-1 max_a ||F_a||_F.
double default_convergence_tol(const PsrModel& model);

/// Points of Phi T_ao for one (a, o). Only the nonzero rows R of T_ao
/// matter, so a point psi T_ao is stored as the d x |R| block psi[:, R];
/// the full matrix is that block times row_block(a, o).
struct SFCell {
    std::vector<int> rows;
    /// n x (d |rows|); row j holds block j in column-major order.
    Matrix points;
    /// slot[i] is the point retained for direction i (-1 when the cell is empty).
    std::vector<int> slot;

    int size() const { return static_cast<int>(points.rows()); }
};

/// Point-based successor feature set. The represented set is
/// conv U_a [F_a + gamma sum_o cell(a, o)]; after n backups from the zero
/// initialization this is the horizon-(n + 1) approximation.
struct SFSet {
    int d = 0;
    int k = 0;
    int num_actions = 0;
    int num_observations = 0;
    std::uint64_t fingerprint = 0;
    int iteration = 0;
    DirectionSet directions;
    std::vector<SFCell> cells;

    int cell_index(int a, int o) const { return a * num_observations + o; }
    const SFCell& cell(int a, int o) const { return cells[cell_index(a, o)]; }
    /// Block j of cell (a, o) as a d x |rows| matrix.
    Matrix coefficient(int a, int o, int j) const;
    /// Full d x k point of Phi T_ao.
    Matrix point(const PsrModel& model, int a, int o, int j) const;
    int num_points() const;
};

/// Throws DimensionMismatch unless the set was built for a model of this shape.
void check_compatible(const PsrModel& model, const SFSet& set);

/// Every cell holds the single point stop T_ao (zero matrix by default).
SFSet initial_set(const PsrModel& model, const DirectionSet& directions,
                  const std::optional<Matrix>& stop_matrix = std::nullopt);

SFSet point_based_backup(const PsrModel& model, const SFSet& current, const BackupConfig& config);

/// Successor matrix of the policy that always plays `action`:
/// F_a (I - gamma T_a)^-1 with T_a = sum_o T_ao.
Matrix constant_action_successor_matrix(const PsrModel& model, int action);

/// result[cell][i]: stored point of the cell maximizing <m_i, psi T_ao>
/// (-1 for an empty cell).
std::vector<Eigen::VectorXi> cell_maximizers(const PsrModel& model, const SFSet& set,
                                             const DirectionSet& directions);

/// Support of the represented set in each direction.
Vector support_values(const PsrModel& model, const SFSet& set, const DirectionSet& directions);

struct BellmanErrors {
    /// h of the represented set.
    Vector current;
    /// h of its exact one-step backup conv U_a [F_a + gamma sum_o Phi T_ao].
    Vector backup;

    Vector error() const { return backup - current; }
};

BellmanErrors bellman_error(const PsrModel& model, const SFSet& set, const DirectionSet& directions);

struct TraceRow {
    int iteration = 0;
    /// max_i |error| over the optimized directions. Monotone runs back up
    /// into conv(Phi u B Phi), so there the error is max(h_B - h, 0).
    double max_error_optimized = 0.0;
    /// Mean over fresh direction sets of each set's max |error|; NaN when not evaluated.
    double max_error_fresh = 0.0;
    double fresh_error_stderr = 0.0;
    /// max_i |h_n(m_i) - h_{n-1}(m_i)|; NaN on the first row.
    double max_support_change = 0.0;
    int num_points = 0;
    double wall_time = 0.0;
};

struct DpTrace {
    std::vector<TraceRow> rows;
    bool converged = false;
};

struct DpOptions {
    /// Fresh direction sets evaluated every `fresh_interval` iterations and at the end.
    std::vector<DirectionSet> fresh;
    int fresh_interval = 1;
    /// Called with each set n and its trace row.
    std::function<void(const SFSet&, const TraceRow&)> observer;
};

struct DpResult {
    SFSet set;
    DpTrace trace;
};

/// Row n of the trace describes the set after n backups. Stops when the
/// support change drops below the tolerance or after max_iters backups.
DpResult run_dp(const PsrModel& model, const BackupConfig& config, const DirectionSet& directions,
                const DpOptions& options = {});

/// Vertex of Phi_a q (or Phi q) found by a linear maximization oracle.
struct LmoResult {
    int action = 0;
    double value = 0.0;
    Vector vertex;
    /// Chosen point index per observation; -1 for an empty cell.
    std::vector<int> annotation;
};

/// Phi q in generator form: Phi_a q = F_a q + gamma sum_o (cell points) q.
class ProjectedSet {
public:
    ProjectedSet(const PsrModel& model, const SFSet& set, const Vector& q);

    int num_actions() const { return static_cast<int>(base_.size()); }
    int num_observations() const { return num_obs_; }
    double gamma() const { return gamma_; }
    const Vector& state() const { return q_; }
    /// F_a q.
    const Vector& base(int a) const { return base_[a]; }
    /// n x d; row j is point j of cell (a, o) times q.
    const Matrix& projected(int a, int o) const { return projected_[a * num_obs_ + o]; }

    LmoResult lmo(int action, const Vector& g) const;
    /// Best over all actions, lowest action on ties.
    LmoResult lmo(const Vector& g) const;
    Vector vertex(int action, const std::vector<int>& annotation) const;

private:
    Vector q_;
    double gamma_;
    int num_obs_;
    std::vector<Vector> base_;
    std::vector<Matrix> projected_;
};

ProjectedSet project_set(const SFSet& set, const PsrModel& model, const Vector& q);

}  // namespace sfs
