#include "gnav/env.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gnav/formats.hpp"

namespace gnav {

const char* action_name(Action a) {
    switch (a) {
        case Action::turn_left: return "turn_left";
        case Action::turn_right: return "turn_right";
        case Action::move_forward: return "move_forward";
    }
    throw ConfigError("bad action value");
}

Action action_from_name(const std::string& name) {
    if (name == "turn_left") return Action::turn_left;
    if (name == "turn_right") return Action::turn_right;
    if (name == "move_forward") return Action::move_forward;
    throw ConfigError("unknown action '" + name + "'");
}

RewardLayout place_rewards(const PoseGraph& graph, RngStream& rng, int n_subgoals) {
    if (n_subgoals < 0) throw ConfigError("sub-goal count must be >= 0");
    if (graph.num_nodes() <= n_subgoals + 1)
        throw ConfigError("graph has " + std::to_string(graph.num_nodes()) +
                          " nodes, need more than " + std::to_string(n_subgoals + 1));
    // partial Fisher-Yates: first draw is the goal, the rest are sub-goals
    std::vector<NodeId> ids(graph.num_nodes());
    for (NodeId n = 0; n < graph.num_nodes(); ++n) ids[n] = n;
    RewardLayout layout;
    for (int i = 0; i <= n_subgoals; ++i) {
        const uint32_t j = i + rng.uniform_int(static_cast<uint32_t>(ids.size() - i));
        std::swap(ids[i], ids[j]);
        if (i == 0)
            layout.goal = ids[0];
        else
            layout.subgoals.push_back(ids[i]);
    }
    std::sort(layout.subgoals.begin(), layout.subgoals.end());
    return layout;
}

void spawn_uniform(const PoseGraph& graph, AgentState& state, RngStream& spawn_rng) {
    state.node = static_cast<NodeId>(spawn_rng.uniform_int(graph.num_nodes()));
    state.heading =
        static_cast<int>(spawn_rng.uniform_int(graph.num_headings())) * graph.rotation_step();
}

DynamicsOutcome step_dynamics(const PoseGraph& graph, const RewardLayout& layout,
                              AgentState& state, Action action, RngStream& spawn_rng) {
    DynamicsOutcome out;
    switch (action) {
        case Action::turn_left:
            state.heading = normalize_heading(state.heading - graph.rotation_step());
            break;
        case Action::turn_right:
            state.heading = normalize_heading(state.heading + graph.rotation_step());
            break;
        case Action::move_forward: {
            if (const auto next = graph.neighbor(state.node, state.heading)) {
                state.node = *next;
                out.moved = true;
            }
            break;
        }
    }
    // rewards trigger on entering a node, never on occupying one
    if (out.moved) {
        if (state.node == layout.goal) {
            out.reward = layout.goal_reward;
            spawn_uniform(graph, state, spawn_rng);
            std::fill(state.collected.begin(), state.collected.end(), 0);
            out.respawned = true;
        } else {
            const auto it =
                std::lower_bound(layout.subgoals.begin(), layout.subgoals.end(), state.node);
            if (it != layout.subgoals.end() && *it == state.node) {
                const size_t idx = static_cast<size_t>(it - layout.subgoals.begin());
                if (!state.collected[idx]) {
                    state.collected[idx] = 1;
                    out.reward = layout.subgoal_reward;
                }
            }
        }
    }
    state.t += 1;
    state.episode_return += out.reward;
    return out;
}

Env::Env(const PoseGraph& graph, const ObservationModel& obs, RewardLayout layout, int t_max)
    : graph_(&graph), obs_(&obs), layout_(std::move(layout)), t_max_(t_max) {
    if (t_max < 0) throw ConfigError("t_max must be >= 0");
    if (layout_.goal < 0 || layout_.goal >= graph.num_nodes())
        throw ConfigError("goal node out of range");
    for (NodeId s : layout_.subgoals) {
        if (s < 0 || s >= graph.num_nodes()) throw ConfigError("sub-goal node out of range");
        if (s == layout_.goal) throw ConfigError("goal cannot also be a sub-goal");
    }
}

std::pair<AgentState, FeatureVector> Env::reset(EnvStreams& streams) const {
    AgentState state;
    state.collected.assign(layout_.subgoals.size(), 0);
    spawn_uniform(*graph_, state, streams.spawn);
    state.t = 0;
    state.episode_return = 0.0;
    FeatureVector obs = sample_observation(*obs_, state.node, state.heading, streams.obs);
    return {std::move(state), std::move(obs)};
}

StepOutcome Env::step(AgentState& state, Action action, EnvStreams& streams) const {
    if (state.t >= t_max_) throw ConfigError("step after episode end");
    StepOutcome out;
    const DynamicsOutcome dyn = step_dynamics(*graph_, layout_, state, action, streams.spawn);
    out.reward = dyn.reward;
    out.moved = dyn.moved;
    out.respawned = dyn.respawned;
    out.done = state.t >= t_max_;
    out.observation = sample_observation(*obs_, state.node, state.heading, streams.obs);
    return out;
}

std::pair<Trajectory, double> run_episode(const Env& env, const PolicyFn& policy,
                                          EnvStreams& streams) {
    auto [state, obs] = env.reset(streams);
    Trajectory traj;
    traj.reserve(env.t_max());
    while (state.t < env.t_max()) {
        const Action action = policy(obs);
        TrajectoryStep step{state.t, state.node, state.heading, action, 0.0};
        const StepOutcome outcome = env.step(state, action, streams);
        step.reward = outcome.reward;
        traj.push_back(step);
        obs = outcome.observation;
    }
    return {std::move(traj), state.episode_return};
}

void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "traj v1\n";
    for (const TrajectoryStep& s : traj) {
        out << s.t << ' ' << s.node << ' ' << s.heading << ' ' << action_name(s.action) << ' '
            << fmt_double(s.reward) << '\n';
    }
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "traj v1")
        throw IoError(path + ": expected 'traj v1' header");
    Trajectory traj;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        TrajectoryStep s;
        std::string action;
        if (!(ss >> s.t >> s.node >> s.heading >> action >> s.reward))
            throw IoError(path + ": malformed trajectory line '" + line + "'");
        s.action = action_from_name(action);
        traj.push_back(s);
    }
    return traj;
}

}  // namespace gnav
