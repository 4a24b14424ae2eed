#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sfset/model.hpp"

namespace sfs {

/// Grid actions. Cell index is y * width + x with x growing rightwards and
/// y growing upwards, so cell 0 is the bottom-left corner.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kIdle = 4 };

enum class FeatureMode {
    /// (x, y) scaled so the corners land on (+-1, +-1); d = 2.
    Coordinates,
    /// Seeded random colour per cell in [0, 1]^3; d = 3.
    RgbTable,
};

struct GridSpec {
    int width = 3;
    int height = 3;
    /// Blocked moves between pairs of adjacent cells (unordered).
    std::vector<std::pair<int, int>> walls;
    FeatureMode feature_mode = FeatureMode::Coordinates;
    /// POMDP only: chance of slipping to a random open neighbour, and of
    /// observing a random adjacent cell instead of the true one.
    double noise = 0.0;
    std::uint64_t seed = 0;
    /// Adds a fifth action that stays put and collects the cell's features.
    bool idle_action = false;
    int start_cell = 0;
    double gamma = 0.9;

    int num_cells() const { return width * height; }
};

/// Walls on each interior edge independently with probability `density`,
/// resampled until every cell is reachable from every other.
GridSpec random_maze(int width, int height, std::uint64_t seed, double density = 0.2);

/// True when the open cells form one connected component.
bool grid_connected(const GridSpec& spec);

/// Cell reached by a deterministic move (the same cell when blocked).
int grid_move(const GridSpec& spec, int cell, int action);

MdpSpec gridworld_mdp(const GridSpec& spec);
PomdpSpec gridworld_pomdp(const GridSpec& spec);

struct MountainCarSpec {
    int mesh = 12;
    double position_min = -1.2;
    double position_max = 0.6;
    double velocity_min = -0.07;
    double velocity_max = 0.07;
    double rbf_sigma = 0.8;
    /// Centre coordinates per axis in the rescaled [-1, 1]^2 state space.
    std::vector<double> rbf_grid{-0.8, 0.0, 0.8};
    double gamma = 0.9;
    /// Each cell's transition is the fraction of an n x n grid of start
    /// points inside it landing in each cell; with n = 1 a cell-centre step
    /// rarely leaves its cell.
    int subsamples = 5;
};

struct CarState {
    double position = 0.0;
    double velocity = 0.0;
};

/// Classic update; action 0 accelerates left, action 1 right.
CarState mountain_car_step(const MountainCarSpec& spec, CarState s, int action);
/// Cell index velocity_bin * mesh + position_bin of the cell containing s.
int mountain_car_cell(const MountainCarSpec& spec, CarState s);
CarState mountain_car_center(const MountainCarSpec& spec, int cell);
/// Unnormalized Gaussian RBFs, ordered velocity centre major, position minor.
Vector mountain_car_features(const MountainCarSpec& spec, CarState s);

/// Piecewise-constant model on the mesh: features at cell centres, transitions
/// averaged over sample points in each cell. Starts in the cell containing (-0.5, 0).
MdpSpec mountain_car(const MountainCarSpec& spec);

}  // namespace sfs
