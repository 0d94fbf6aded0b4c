#include "gnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gnav {

EvalReport make_report(std::vector<double> worker_returns) {
    EvalReport report;
    report.episodes = static_cast<long>(worker_returns.size());
    report.worker_returns = std::move(worker_returns);
    if (!report.worker_returns.empty()) {
        report.r_min = std::numeric_limits<double>::max();
        double sum = 0.0;
        for (double r : report.worker_returns) {
            report.r_min = std::min(report.r_min, r);
            sum += r;
        }
        report.r_mean = sum / static_cast<double>(report.worker_returns.size());
    }
    return report;
}

EvalReport evaluate(const ParameterSet& params, const Env& env, int n_workers, RngStream& rng,
                    bool parallel) {
    if (n_workers < 1) throw ConfigError("evaluation needs at least one worker");
    const int n_heads = params.config.n_heads;
    const int n_actions = params.config.n_actions;
    struct WorkerSetup {
        uint64_t spawn_seed, obs_seed;
        int head;
    };
    std::vector<WorkerSetup> setup(n_workers);
    for (int w = 0; w < n_workers; ++w) {
        setup[w].spawn_seed = rng.next_u64();
        setup[w].obs_seed = rng.next_u64();
        setup[w].head = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(n_heads)));
    }
    std::vector<double> returns(n_workers, 0.0);
    auto work = [&](int w) {
        EnvStreams streams{RngStream(setup[w].spawn_seed), RngStream(setup[w].obs_seed)};
        auto [state, obs] = env.reset(streams);
        RecurrentState rs(params.config.recurrent_dim);
        std::vector<double> q(static_cast<size_t>(n_heads) * n_actions);
        while (state.t < env.t_max()) {
            forward_step(params, obs, rs, q);
            // pure argmax on the episode's head, ties to the lowest index
            const double* head_q = q.data() + static_cast<size_t>(setup[w].head) * n_actions;
            int best = 0;
            for (int a = 1; a < n_actions; ++a)
                if (head_q[a] > head_q[best]) best = a;
            obs = env.step(state, static_cast<Action>(best), streams).observation;
        }
        returns[w] = state.episode_return;
    };
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int w = 0; w < n_workers; ++w) work(w);
    } else {
        for (int w = 0; w < n_workers; ++w) work(w);
    }
    return make_report(std::move(returns));
}

void write_eval_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "eval v1\n";
    for (size_t w = 0; w < report.worker_returns.size(); ++w)
        out << "worker " << w << ' ' << fmt_double(report.worker_returns[w]) << '\n';
    out << fmt_double(report.r_min) << ' ' << fmt_double(report.r_mean) << ' '
        << fmt_double(report.r_relative_defined ? report.r_relative : 0.0) << '\n';
}

EvalReport read_eval_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "eval v1")
        throw IoError(path + ": expected 'eval v1' header");
    EvalReport report;
    std::vector<double> returns;
    double rrel = 0.0;
    bool have_summary = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;
        if (first == "worker") {
            int id;
            double value;
            if (!(ss >> id >> value)) throw IoError(path + ": malformed worker line");
            returns.push_back(value);
        } else {
            double rmin, rmean;
            rmin = std::strtod(first.c_str(), nullptr);
            if (!(ss >> rmean >> rrel)) throw IoError(path + ": malformed summary line");
            (void)rmin;
            have_summary = true;
        }
    }
    if (!have_summary) throw IoError(path + ": missing summary line");
    report = make_report(std::move(returns));
    report.r_relative = rrel;
    report.r_relative_defined = rrel != 0.0;
    return report;
}

std::pair<Trajectory, double> greedy_episode(const ParameterSet& params, const Env& env, int head,
                                             uint64_t seed) {
    if (head < 0 || head >= params.config.n_heads) throw ConfigError("head out of range");
    EnvStreams streams{RngStream(mix_key(seed, 1)), RngStream(mix_key(seed, 2))};
    RecurrentState rs(params.config.recurrent_dim);
    std::vector<double> q(static_cast<size_t>(params.config.n_heads) * params.config.n_actions);
    const int n_actions = params.config.n_actions;
    PolicyFn policy = [&](const FeatureVector& obs) {
        forward_step(params, obs, rs, q);
        const double* head_q = q.data() + static_cast<size_t>(head) * n_actions;
        int best = 0;
        for (int a = 1; a < n_actions; ++a)
            if (head_q[a] > head_q[best]) best = a;
        return static_cast<Action>(best);
    };
    return run_episode(env, policy, streams);
}

EvalReport random_walk_baseline(const PoseGraph& graph, const RewardLayout& layout, int t_max,
                                WalkPrior prior, RngStream& rng, int episodes) {
    if (episodes < 1) throw ConfigError("baseline needs at least one episode");
    const double p_turn =
        prior == WalkPrior::intersection ? intersection_fraction(graph) : 2.0 / 3.0;
    std::vector<double> returns(episodes, 0.0);
    for (int e = 0; e < episodes; ++e) {
        RngStream walk(rng.next_u64());
        AgentState state;
        state.collected.assign(layout.subgoals.size(), 0);
        spawn_uniform(graph, state, walk);
        while (state.t < t_max) {
            Action action = Action::move_forward;
            if (walk.uniform() < p_turn)
                action = walk.uniform() < 0.5 ? Action::turn_left : Action::turn_right;
            step_dynamics(graph, layout, state, action, walk);
        }
        returns[e] = state.episode_return;
    }
    return make_report(std::move(returns));
}

std::vector<int> action_distances_to_node(const PoseGraph& graph, NodeId target, bool entering) {
    const int H = graph.num_headings();
    const int n_states = graph.num_nodes() * H;
    // predecessors under forward moves, per state
    std::vector<std::vector<int>> forward_pred(n_states);
    for (const auto& [from, heading, to] : graph.edges()) {
        const int h = heading / graph.rotation_step();
        forward_pred[to * H + h].push_back(from * H + h);
    }
    std::vector<int> dist(n_states, -1);
    std::deque<int> queue;
    auto seed = [&](int s, int d) {
        if (dist[s] == -1) {
            dist[s] = d;
            queue.push_back(s);
        }
    };
    if (entering) {
        // one forward action away from standing on the target
        for (NodeId n = 0; n < graph.num_nodes(); ++n) {
            for (int h = 0; h < H; ++h) {
                const auto nb = graph.neighbor(n, h * graph.rotation_step());
                if (nb && *nb == target) seed(n * H + h, 1);
            }
        }
    } else {
        for (int h = 0; h < H; ++h) seed(target * H + h, 0);
    }
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        const int node = s / H;
        const int h = s % H;
        const int d = dist[s] + 1;
        seed(node * H + (h + 1) % H, d);
        seed(node * H + (h + H - 1) % H, d);
        for (int p : forward_pred[s]) seed(p, d);
    }
    return dist;
}

int bound_from_distance(int t_max, int worst_distance) {
    if (worst_distance <= 0) return 0;
    if (t_max < worst_distance) return 0;
    return (t_max - worst_distance) / worst_distance + 1;
}

PlannerBound planner_optimal_bound(const PoseGraph& graph, const RewardLayout& layout,
                                   int t_max) {
    PlannerBound result;
    result.spawn_distance = action_distances_to_node(graph, layout.goal, true);
    for (int d : result.spawn_distance) {
        if (d < 0) throw GraphError("goal is unreachable from some spawn state");
        result.worst_distance = std::max(result.worst_distance, d);
    }
    result.bound = bound_from_distance(t_max, result.worst_distance);
    return result;
}

// --- learning curve export ------------------------------------------------------

namespace {

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

void export_curves(const std::vector<CurveInput>& seeds, const std::string& path) {
    if (seeds.empty()) throw ConfigError("export_curves needs at least one metrics stream");
    const size_t rows = seeds[0].train.size();
    if (rows == 0) throw ConfigError("export_curves: empty metrics stream");
    for (const CurveInput& s : seeds) {
        if (s.train.size() != rows || (!s.val.empty() && s.val.size() != rows))
            throw ConfigError("export_curves: mismatched metrics streams");
        for (size_t i = 0; i < rows; ++i) {
            if (s.train[i].frames != seeds[0].train[i].frames ||
                (!s.val.empty() && s.val[i].frames != seeds[0].train[i].frames))
                throw ConfigError("export_curves: metrics streams not aligned by frames");
        }
    }

    const bool multi = seeds.size() > 1;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "curves v1\n";
    if (multi) {
        out << "columns frames mean_train_med mean_train_lo mean_train_hi min_train_med "
               "min_train_lo min_train_hi mean_val_med mean_val_lo mean_val_hi min_val_med "
               "min_val_lo min_val_hi rrel_med rrel_lo rrel_hi rrel_defined_frac "
               "min_train_smooth10 min_val_smooth10\n";
    } else {
        out << "columns frames mean_train min_train mean_val min_val rrel rrel_defined "
               "min_train_smooth10 min_val_smooth10\n";
    }

    std::deque<double> train_window, val_window;
    auto smooth = [](std::deque<double>& window, double value) {
        window.push_back(value);
        if (window.size() > 10) window.pop_front();
        double sum = 0.0;
        for (double v : window) sum += v;
        return sum / static_cast<double>(window.size());
    };

    for (size_t i = 0; i < rows; ++i) {
        std::vector<double> mean_train, min_train, mean_val, min_val, rrel;
        int defined = 0;
        for (const CurveInput& s : seeds) {
            mean_train.push_back(s.train[i].mean_return);
            min_train.push_back(s.train[i].min_return);
            const double mv = s.val.empty() ? 0.0 : s.val[i].mean_return;
            const double nv = s.val.empty() ? 0.0 : s.val[i].min_return;
            mean_val.push_back(mv);
            min_val.push_back(nv);
            if (!s.val.empty() && s.train[i].min_return > 0.0) {
                rrel.push_back(nv / s.train[i].min_return);
                ++defined;
            } else {
                rrel.push_back(0.0);  // flagged via the defined column
            }
        }
        out << seeds[0].train[i].frames;
        auto emit = [&](const std::vector<double>& values) {
            if (multi) {
                out << ' ' << fmt_double(median(values)) << ' '
                    << fmt_double(*std::min_element(values.begin(), values.end())) << ' '
                    << fmt_double(*std::max_element(values.begin(), values.end()));
            } else {
                out << ' ' << fmt_double(values[0]);
            }
        };
        emit(mean_train);
        emit(min_train);
        emit(mean_val);
        emit(min_val);
        emit(rrel);
        out << ' '
            << fmt_double(static_cast<double>(defined) / static_cast<double>(seeds.size()));
        out << ' ' << fmt_double(smooth(train_window, median(min_train)));
        out << ' ' << fmt_double(smooth(val_window, median(min_val)));
        out << '\n';
    }
}

}  // namespace gnav
