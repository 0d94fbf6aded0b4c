#include "gnav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gnav/eval.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gnav {

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::a2c: return "a2c";
        case Algorithm::nstep_q: return "nstep_q";
        case Algorithm::bootstrap_q: return "bootstrap_q";
    }
    throw ConfigError("bad algorithm value");
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "a2c") return Algorithm::a2c;
    if (name == "nstep_q") return Algorithm::nstep_q;
    if (name == "bootstrap_q") return Algorithm::bootstrap_q;
    throw ConfigError("unknown algorithm '" + name + "'");
}

TrainerConfig TrainerConfig::defaults_for(Algorithm algorithm) {
    TrainerConfig cfg;
    cfg.algorithm = algorithm;
    if (algorithm != Algorithm::bootstrap_q) {
        cfg.n_heads = 1;
        cfg.p_mask = 1.0;
    }
    if (algorithm == Algorithm::nstep_q) {
        cfg.epsilon_start = 1.0;
        cfg.epsilon_final = 0.05;
    }
    return cfg;
}

void TrainerConfig::validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
    if (n < 1) throw ConfigError("rollout length n must be >= 1");
    if (n_workers < 1) throw ConfigError("need at least one worker");
    if (n_heads < 1) throw ConfigError("need at least one head");
    if (p_mask <= 0.0 || p_mask > 1.0) throw ConfigError("p_mask must be in (0, 1]");
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (total_frames < 0) throw ConfigError("total_frames must be >= 0");
    if (algorithm != Algorithm::bootstrap_q && n_heads != 1)
        throw ConfigError(std::string(algorithm_name(algorithm)) + " uses a single head");
    if (algorithm == Algorithm::nstep_q && p_mask != 1.0)
        throw ConfigError("nstep_q trains its head on all data (p_mask = 1)");
    if (epsilon_start < 0 || epsilon_start > 1 || epsilon_final < 0 || epsilon_final > 1)
        throw ConfigError("epsilon must be in [0, 1]");
    if (report_interval < 1) throw ConfigError("report_interval must be >= 1");
}

double TrainerConfig::epsilon_at(long frames) const {
    const double anneal_frames = epsilon_anneal_frac * static_cast<double>(total_frames);
    if (anneal_frames <= 0) return epsilon_final;
    const double t = std::min(1.0, static_cast<double>(frames) / anneal_frames);
    return epsilon_start + t * (epsilon_final - epsilon_start);
}

// --- loss building blocks -----------------------------------------------------

std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap, double gamma,
                                  std::span<const uint8_t> done) {
    if (rewards.size() != done.size()) throw ConfigError("nstep_returns: array length mismatch");
    const int n = static_cast<int>(rewards.size());
    std::vector<double> targets(n, 0.0);
    double tail = bootstrap;
    for (int t = n - 1; t >= 0; --t) {
        if (done[t]) tail = 0.0;  // no value beyond an episode termination
        tail = rewards[t] + gamma * tail;
        targets[t] = tail;
    }
    return targets;
}

double double_q_bootstrap(std::span<const double> online_q, std::span<const double> target_q,
                          int n_actions, int head) {
    const size_t base = static_cast<size_t>(head) * n_actions;
    if (base + n_actions > online_q.size() || base + n_actions > target_q.size())
        throw ConfigError("double_q_bootstrap: head out of range");
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (online_q[base + a] > online_q[base + best]) best = a;
    return target_q[base + best];
}

LossResult q_loss(std::span<const double> q, std::span<const int> actions,
                  std::span<const double> targets, std::span<const uint8_t> masks, int n_workers,
                  int T, int n_heads, int n_actions) {
    LossResult result;
    result.dQ.assign(q.size(), 0.0);
    for (int w = 0; w < n_workers; ++w) {
        for (int t = 0; t < T; ++t) {
            const int a = actions[static_cast<size_t>(w) * T + t];
            for (int k = 0; k < n_heads; ++k) {
                if (!masks[static_cast<size_t>(w) * n_heads + k]) continue;
                const size_t idx =
                    ((static_cast<size_t>(w) * T + t) * n_heads + k) * n_actions + a;
                const double err =
                    q[idx] - targets[(static_cast<size_t>(w) * T + t) * n_heads + k];
                result.loss += err * err;
                result.dQ[idx] = 2.0 * err;
            }
        }
    }
    return result;
}

LossResult a2c_loss(std::span<const double> q, std::span<const int> actions,
                    std::span<const double> returns, int n_workers, int T, int n_actions,
                    double entropy_weight, double value_weight) {
    LossResult result;
    result.dQ.assign(q.size(), 0.0);
    std::vector<double> prob(n_actions);
    for (int w = 0; w < n_workers; ++w) {
        for (int t = 0; t < T; ++t) {
            const size_t base = (static_cast<size_t>(w) * T + t) * n_actions;
            const int taken = actions[static_cast<size_t>(w) * T + t];
            // softmax over the head's Q-values; the shared V offset cancels
            double max_q = q[base];
            for (int a = 1; a < n_actions; ++a) max_q = std::max(max_q, q[base + a]);
            double norm = 0.0;
            for (int a = 0; a < n_actions; ++a) {
                prob[a] = std::exp(q[base + a] - max_q);
                norm += prob[a];
            }
            double value = 0.0;
            for (int a = 0; a < n_actions; ++a) {
                prob[a] /= norm;
                value += q[base + a];
            }
            value /= n_actions;  // mean(Q) = V by the dueling identity

            const double ret = returns[static_cast<size_t>(w) * T + t];
            const double advantage = ret - value;
            double entropy = 0.0;
            for (int a = 0; a < n_actions; ++a)
                if (prob[a] > 0) entropy -= prob[a] * std::log(prob[a]);

            result.loss += -std::log(std::max(prob[taken], 1e-300)) * advantage +
                           value_weight * (value - ret) * (value - ret) -
                           entropy_weight * entropy;

            // policy term treats the advantage as a constant
            for (int a = 0; a < n_actions; ++a) {
                const double d_policy =
                    (prob[a] - (a == taken ? 1.0 : 0.0)) * advantage;
                const double d_value = 2.0 * value_weight * (value - ret) / n_actions;
                double d_entropy = 0.0;
                if (prob[a] > 0)
                    d_entropy = entropy_weight * prob[a] * (std::log(prob[a]) + entropy);
                result.dQ[base + a] = d_policy + d_value + d_entropy;
            }
        }
    }
    return result;
}

Action act(std::span<const double> q, int n_actions, int head, double epsilon, RngStream& rng,
           ActMode mode) {
    const size_t base = static_cast<size_t>(head) * n_actions;
    if (base + n_actions > q.size()) throw ConfigError("act: head out of range");
    if (mode == ActMode::softmax) {
        double max_q = q[base];
        for (int a = 1; a < n_actions; ++a) max_q = std::max(max_q, q[base + a]);
        double norm = 0.0;
        std::vector<double> cumulative(n_actions);
        for (int a = 0; a < n_actions; ++a) {
            norm += std::exp(q[base + a] - max_q);
            cumulative[a] = norm;
        }
        const double u = rng.uniform() * norm;
        for (int a = 0; a < n_actions; ++a)
            if (u < cumulative[a]) return static_cast<Action>(a);
        return static_cast<Action>(n_actions - 1);
    }
    // greedy: the epsilon draw happens unconditionally so the stream layout
    // does not depend on the schedule
    const double u = rng.uniform();
    if (u < epsilon) return static_cast<Action>(rng.uniform_int(n_actions));
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (q[base + a] > q[base + best]) best = a;
    return static_cast<Action>(best);
}

// --- the synchronous training loop ----------------------------------------------

namespace {

struct TrainWorker {
    AgentState state;
    FeatureVector obs;
    RecurrentState rs_online;
    RecurrentState rs_target;
    int head = 0;
    std::vector<uint8_t> mask;
    EnvStreams env_streams;
    RngStream policy_rng;
    RngStream episode_rng;  // head + mask draws
};

}  // namespace

TrainResult train(const Env& env, const Env* val_env, const TrainerConfig& config, uint64_t seed,
                  const TrainHooks& hooks, bool parallel, const TrainerSnapshot* resume) {
    config.validate();
    if (env.t_max() < 1) throw ConfigError("training needs t_max >= 1");
    const int W = config.n_workers;
    const int H = config.n_heads;
    const int A = kNumActions;
    const int I = env.observation_model().observation_dim();
    const bool is_a2c = config.algorithm == Algorithm::a2c;

    NetworkConfig net;
    net.input_dim = I;
    net.embed_dim = config.embed_dim;
    net.recurrent_dim = config.recurrent_dim;
    net.n_heads = H;
    net.n_actions = A;
    net.cell = config.cell;

    TrainerSnapshot snap;
    if (resume) {
        if (!(resume->params.config == net))
            throw ConfigError("resume checkpoint does not match the network config");
        snap = *resume;
    } else {
        snap.params = init_params(net, mix_key(seed, 1));
        snap.target = snap.params;
        snap.opt_ms.assign(snap.params.data.size(), 0.0);
        snap.frames = 0;
    }

    std::vector<TrainWorker> workers(W);
    for (int w = 0; w < W; ++w) {
        TrainWorker& wk = workers[w];
        wk.env_streams.spawn = RngStream(mix_key(seed, 2, w));
        wk.env_streams.obs = RngStream(mix_key(seed, 3, w));
        wk.policy_rng = RngStream(mix_key(seed, 4, w));
        wk.episode_rng = RngStream(mix_key(seed, 5, w));
        wk.rs_online = RecurrentState(config.recurrent_dim);
        wk.rs_target = RecurrentState(config.recurrent_dim);
        wk.mask.assign(H, 0);
    }

    auto start_episode = [&](TrainWorker& wk, int index) {
        auto [state, obs] = env.reset(wk.env_streams);
        wk.state = std::move(state);
        wk.obs = std::move(obs);
        wk.rs_online.reset();
        wk.rs_target.reset();
        wk.head = static_cast<int>(wk.episode_rng.uniform_int(static_cast<uint32_t>(H)));
        for (int k = 0; k < H; ++k) {
            const double p = (config.mask_override_head == k) ? config.mask_override_prob
                                                              : config.p_mask;
            wk.mask[k] = wk.episode_rng.bernoulli(p) ? 1 : 0;
        }
        if (hooks.on_episode_start) hooks.on_episode_start(index, wk.head, wk.mask);
    };
    for (int w = 0; w < W; ++w) start_episode(workers[w], w);

    TrainResult result;
    long episodes_total = 0;
    std::vector<double> episode_returns;
    double last_mean = 0.0, last_min = 0.0;
    double loss_accum = 0.0;
    long loss_count = 0;
    long last_report = snap.frames;
    long last_sync = snap.frames;
    long last_checkpoint = snap.frames;
    long eval_round = 0;

    RolloutBatch batch;
    batch.n_workers = W;
    std::vector<ForwardTrace> traces(W);
    std::vector<ParameterSet> worker_grads;
    std::vector<RecurrentState> target_initial(W, RecurrentState(config.recurrent_dim));
    std::vector<double> q_pred, q_scratch, targets, returns_a2c;
    std::vector<double> q_online_next(static_cast<size_t>(W) * H * A);
    std::vector<double> q_target_next(static_cast<size_t>(W) * H * A);
    ParameterSet grad(net);

    auto emit_report = [&](long frames) {
        if (!episode_returns.empty()) {
            double sum = 0.0, mn = std::numeric_limits<double>::max();
            for (double r : episode_returns) {
                sum += r;
                mn = std::min(mn, r);
            }
            last_mean = sum / static_cast<double>(episode_returns.size());
            last_min = mn;
            episode_returns.clear();
        }
        MetricsRecord rec;
        rec.frames = frames;
        rec.episodes = episodes_total;
        rec.mean_return = last_mean;
        rec.min_return = last_min;
        rec.loss = loss_count > 0 ? loss_accum / static_cast<double>(loss_count) : 0.0;
        result.train_metrics.push_back(rec);
        loss_accum = 0.0;
        loss_count = 0;
        if (val_env) {
            RngStream eval_rng(mix_key(seed, 6, static_cast<uint64_t>(eval_round)));
            const EvalReport report =
                evaluate(snap.params, *val_env, config.eval_workers, eval_rng, parallel);
            MetricsRecord vrec;
            vrec.frames = frames;
            vrec.episodes = report.episodes;
            vrec.mean_return = report.r_mean;
            vrec.min_return = report.r_min;
            vrec.loss = 0.0;
            result.val_metrics.push_back(vrec);
        }
        ++eval_round;
    };

    while (snap.frames < config.total_frames) {
        // global episode clock: every episode is exactly t_max steps
        if (workers[0].state.t >= env.t_max()) {
            for (int w = 0; w < W; ++w) {
                episode_returns.push_back(workers[w].state.episode_return);
                ++episodes_total;
                start_episode(workers[w], w);
            }
        }
        const int seg = std::min<long>(config.n, env.t_max() - workers[0].state.t);
        const double epsilon = config.epsilon_at(snap.frames);

        batch.T = seg;
        batch.obs.resize(static_cast<size_t>(W) * seg * I);
        batch.actions.resize(static_cast<size_t>(W) * seg);
        batch.rewards.resize(static_cast<size_t>(W) * seg);
        batch.done.resize(static_cast<size_t>(W) * seg);
        batch.respawn.resize(static_cast<size_t>(W) * seg);
        batch.initial.resize(W);
        batch.next_obs.resize(static_cast<size_t>(W) * I);
        batch.masks.resize(static_cast<size_t>(W) * H);
        batch.heads.resize(W);

        // ---- rollout: workers step independently from a shared snapshot ----
        auto rollout = [&](int w) {
            TrainWorker& wk = workers[w];
            batch.initial[w] = wk.rs_online;
            target_initial[w] = wk.rs_target;
            batch.heads[w] = wk.head;
            for (int k = 0; k < H; ++k)
                batch.masks[static_cast<size_t>(w) * H + k] = wk.mask[k];
            std::vector<double> q(static_cast<size_t>(H) * A);
            for (int i = 0; i < seg; ++i) {
                std::copy(wk.obs.begin(), wk.obs.end(),
                          batch.obs.begin() + (static_cast<size_t>(w) * seg + i) * I);
                forward_step(snap.params, wk.obs, wk.rs_online, q);
                const Action a = act(q, A, wk.head, epsilon, wk.policy_rng,
                                     is_a2c ? ActMode::softmax : ActMode::greedy);
                const StepOutcome out = env.step(wk.state, a, wk.env_streams);
                const size_t idx = static_cast<size_t>(w) * seg + i;
                batch.actions[idx] = static_cast<int>(a);
                batch.rewards[idx] = out.reward;
                batch.done[idx] = out.done ? 1 : 0;
                batch.respawn[idx] = out.respawned ? 1 : 0;
                wk.obs = out.observation;
            }
            std::copy(wk.obs.begin(), wk.obs.end(),
                      batch.next_obs.begin() + static_cast<size_t>(w) * I);
        };
        if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int w = 0; w < W; ++w) rollout(w);
        } else {
            for (int w = 0; w < W; ++w) rollout(w);
        }

        // ---- batch assembly: predictions, bootstraps, targets ----
        q_pred.resize(static_cast<size_t>(W) * seg * H * A);
        forward_batch(snap.params, batch.obs.data(), W, seg, batch.initial.data(), nullptr,
                      q_pred.data(), traces.data(), parallel);

        if (!is_a2c) {
            q_scratch.resize(static_cast<size_t>(W) * seg * H * A);
            std::vector<RecurrentState> target_final(W);
            forward_batch(snap.target, batch.obs.data(), W, seg, target_initial.data(),
                          target_final.data(), q_scratch.data(), nullptr, parallel);
            targets.resize(static_cast<size_t>(W) * seg * H);
            auto bootstrap_one = [&](int w) {
                TrainWorker& wk = workers[w];
                RecurrentState t_next = target_final[w];
                std::span<const double> next{batch.next_obs.data() + static_cast<size_t>(w) * I,
                                             static_cast<size_t>(I)};
                forward_step(snap.target, next, t_next,
                             {q_target_next.data() + static_cast<size_t>(w) * H * A,
                              static_cast<size_t>(H) * A});
                wk.rs_target = std::move(target_final[w]);
                RecurrentState o_next = wk.rs_online;
                forward_step(snap.params, next, o_next,
                             {q_online_next.data() + static_cast<size_t>(w) * H * A,
                              static_cast<size_t>(H) * A});
                std::span<const double> rewards{batch.rewards.data() + static_cast<size_t>(w) * seg,
                                                static_cast<size_t>(seg)};
                std::span<const uint8_t> done{batch.done.data() + static_cast<size_t>(w) * seg,
                                              static_cast<size_t>(seg)};
                for (int k = 0; k < H; ++k) {
                    const double b = double_q_bootstrap(
                        {q_online_next.data() + static_cast<size_t>(w) * H * A,
                         static_cast<size_t>(H) * A},
                        {q_target_next.data() + static_cast<size_t>(w) * H * A,
                         static_cast<size_t>(H) * A},
                        A, k);
                    const std::vector<double> r = nstep_returns(rewards, b, config.gamma, done);
                    for (int t = 0; t < seg; ++t)
                        targets[(static_cast<size_t>(w) * seg + t) * H + k] = r[t];
                }
            };
            if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (int w = 0; w < W; ++w) bootstrap_one(w);
            } else {
                for (int w = 0; w < W; ++w) bootstrap_one(w);
            }
        } else {
            returns_a2c.resize(static_cast<size_t>(W) * seg);
            auto bootstrap_one = [&](int w) {
                TrainWorker& wk = workers[w];
                RecurrentState o_next = wk.rs_online;
                std::span<const double> next{batch.next_obs.data() + static_cast<size_t>(w) * I,
                                             static_cast<size_t>(I)};
                forward_step(snap.params, next, o_next,
                             {q_online_next.data() + static_cast<size_t>(w) * H * A,
                              static_cast<size_t>(H) * A});
                double value = 0.0;
                for (int a = 0; a < A; ++a)
                    value += q_online_next[static_cast<size_t>(w) * H * A + a];
                value /= A;
                std::span<const double> rewards{batch.rewards.data() + static_cast<size_t>(w) * seg,
                                                static_cast<size_t>(seg)};
                std::span<const uint8_t> done{batch.done.data() + static_cast<size_t>(w) * seg,
                                              static_cast<size_t>(seg)};
                const std::vector<double> r = nstep_returns(rewards, value, config.gamma, done);
                std::copy(r.begin(), r.end(), returns_a2c.begin() + static_cast<size_t>(w) * seg);
            };
            if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (int w = 0; w < W; ++w) bootstrap_one(w);
            } else {
                for (int w = 0; w < W; ++w) bootstrap_one(w);
            }
        }

        // ---- one gradient update from the assembled batch ----
        const LossResult loss =
            is_a2c ? a2c_loss(q_pred, batch.actions, returns_a2c, W, seg, A,
                              config.entropy_weight, config.value_weight)
                   : q_loss(q_pred, batch.actions, targets, batch.masks, W, seg, H, A);
        if (!std::isfinite(loss.loss)) {
            if (hooks.on_divergence) hooks.on_divergence(snap);
            throw DivergenceError("non-finite loss at frame " + std::to_string(snap.frames));
        }
        backward_batch(snap.params, batch.obs.data(), W, seg, batch.initial.data(), traces.data(),
                       loss.dQ.data(), worker_grads, grad, parallel);

        double norm_sq = 0.0;
        for (double g : grad.data) norm_sq += g * g;
        const double norm = std::sqrt(norm_sq);
        const double scale = (config.grad_clip > 0 && norm > config.grad_clip)
                                 ? config.grad_clip / norm
                                 : 1.0;
        for (size_t i = 0; i < grad.data.size(); ++i) {
            const double g = grad.data[i] * scale;
            snap.opt_ms[i] = config.rmsprop_decay * snap.opt_ms[i] +
                             (1.0 - config.rmsprop_decay) * g * g;
            snap.params.data[i] -=
                config.learning_rate * g / std::sqrt(snap.opt_ms[i] + config.rmsprop_eps);
        }

        snap.frames += static_cast<long>(W) * seg;
        loss_accum += loss.loss;
        ++loss_count;

        if (!is_a2c && snap.frames - last_sync >= config.target_sync_interval) {
            snap.target = snap.params;
            last_sync = snap.frames;
        }
        if (snap.frames - last_report >= config.report_interval) {
            emit_report(snap.frames);
            last_report = snap.frames;
        }
        if (hooks.checkpoint_interval > 0 && hooks.on_checkpoint &&
            snap.frames - last_checkpoint >= hooks.checkpoint_interval) {
            hooks.on_checkpoint(snap);
            last_checkpoint = snap.frames;
        }
    }

    if (result.train_metrics.empty() || result.train_metrics.back().frames != snap.frames) {
        if (config.total_frames > 0) emit_report(snap.frames);
    }
    result.params = snap.params;
    result.snapshot = std::move(snap);
    return result;
}

}  // namespace gnav
