#pragma once

#include <string>
#include <vector>

#include "gnav/env.hpp"
#include "gnav/formats.hpp"
#include "gnav/qnet.hpp"

namespace gnav {

// Worst-case and transfer metrics over a pool of evaluation workers.
struct EvalReport {
    std::vector<double> worker_returns;
    double r_min = 0.0;
    double r_mean = 0.0;
    double r_relative = 0.0;  // validation r_min / training r_min when paired
    bool r_relative_defined = false;
    long episodes = 0;
};

EvalReport make_report(std::vector<double> worker_returns);

// Runs n_workers greedy episodes, each behaving under one uniformly drawn
// head fixed for the episode.
EvalReport evaluate(const ParameterSet& params, const Env& env, int n_workers, RngStream& rng,
                    bool parallel = true);

// `eval v1` files: worker lines plus a summary line `rmin rmean rrel`.
void write_eval_report(const EvalReport& report, const std::string& path);
EvalReport read_eval_report(const std::string& path);

// One greedy episode under a fixed head, with its trajectory.
std::pair<Trajectory, double> greedy_episode(const ParameterSet& params, const Env& env, int head,
                                             uint64_t seed);

enum class WalkPrior { uniform, intersection };

// Random walk that turns with probability equal to the graph's intersection
// fraction (or with 2/3 turn mass under the uniform prior), else moves
// forward. Observation-free.
EvalReport random_walk_baseline(const PoseGraph& graph, const RewardLayout& layout, int t_max,
                                WalkPrior prior, RngStream& rng, int episodes);

// Minimum action counts over (node, heading) states, indexed node *
// num_headings + heading_index. With `entering` the count runs until a
// forward action enters `target`; otherwise until the agent stands on it.
std::vector<int> action_distances_to_node(const PoseGraph& graph, NodeId target, bool entering);

struct PlannerBound {
    int bound = 0;           // guaranteed goal entries within t_max from the worst spawn
    int worst_distance = 0;  // worst-case steps to enter the goal (the respawn loop length)
    std::vector<int> spawn_distance;  // per (node, heading) state
};

// floor((t_max - d) / d) + 1, or 0 when t_max < d.
int bound_from_distance(int t_max, int worst_distance);

PlannerBound planner_optimal_bound(const PoseGraph& graph, const RewardLayout& layout, int t_max);

// --- learning curve export ------------------------------------------------------

struct CurveInput {
    std::vector<MetricsRecord> train;
    std::vector<MetricsRecord> val;  // may be empty
};

// Aligned-by-frames columnar text: mean/min return on train and validation
// plus an r_relative column; multiple seeds produce median and min/max
// envelope columns. Worst-case columns also get a trailing window-10 mean.
void export_curves(const std::vector<CurveInput>& seeds, const std::string& path);

}  // namespace gnav
