#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gnav/observation.hpp"
#include "gnav/pose_graph.hpp"
#include "gnav/rng.hpp"

namespace gnav {

enum class Action { turn_left = 0, turn_right = 1, move_forward = 2 };
inline constexpr int kNumActions = 3;

const char* action_name(Action a);
Action action_from_name(const std::string& name);

// Goal and sub-goal placement, fixed for the duration of an experiment.
struct RewardLayout {
    NodeId goal = 0;
    double goal_reward = 1.0;
    std::vector<NodeId> subgoals;  // ascending, never contains goal
    double subgoal_reward = 0.1;
};

RewardLayout place_rewards(const PoseGraph& graph, RngStream& rng, int n_subgoals);

struct AgentState {
    NodeId node = 0;
    int heading = 0;
    int t = 0;
    std::vector<uint8_t> collected;  // per subgoal index, reset on goal respawn
    double episode_return = 0.0;
};

struct StepOutcome {
    FeatureVector observation;
    double reward = 0.0;
    bool done = false;
    bool moved = false;
    bool respawned = false;
};

// Independent rng streams for the independently seeded parts of an episode.
struct EnvStreams {
    RngStream spawn;
    RngStream obs;
};

// Transition/reward core shared by the full environment and the
// observation-free baselines. Mutates `state`; returns the reward.
struct DynamicsOutcome {
    double reward = 0.0;
    bool moved = false;
    bool respawned = false;
};

DynamicsOutcome step_dynamics(const PoseGraph& graph, const RewardLayout& layout,
                              AgentState& state, Action action, RngStream& spawn_rng);

void spawn_uniform(const PoseGraph& graph, AgentState& state, RngStream& spawn_rng);

// The episodic MDP: spawning, action dynamics, rewards, termination. Each
// worker owns an Env; graph and observation model are shared immutably.
class Env {
  public:
    Env(const PoseGraph& graph, const ObservationModel& obs, RewardLayout layout, int t_max);

    const PoseGraph& graph() const { return *graph_; }
    const ObservationModel& observation_model() const { return *obs_; }
    const RewardLayout& layout() const { return layout_; }
    int t_max() const { return t_max_; }

    std::pair<AgentState, FeatureVector> reset(EnvStreams& streams) const;
    StepOutcome step(AgentState& state, Action action, EnvStreams& streams) const;

  private:
    const PoseGraph* graph_;
    const ObservationModel* obs_;
    RewardLayout layout_;
    int t_max_;
};

struct TrajectoryStep {
    int t = 0;
    NodeId node = 0;  // state before the action
    int heading = 0;
    Action action = Action::turn_left;
    double reward = 0.0;
};

using Trajectory = std::vector<TrajectoryStep>;

// Policy: observation -> action. Stateful policies capture their own
// recurrent state and rng.
using PolicyFn = std::function<Action(const FeatureVector&)>;

std::pair<Trajectory, double> run_episode(const Env& env, const PolicyFn& policy,
                                          EnvStreams& streams);

// `traj v1` files.
void write_trajectory(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory(const std::string& path);

}  // namespace gnav
