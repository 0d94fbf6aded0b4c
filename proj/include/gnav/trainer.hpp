#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gnav/env.hpp"
#include "gnav/formats.hpp"
#include "gnav/qnet.hpp"

namespace gnav {

enum class Algorithm { a2c, nstep_q, bootstrap_q };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct TrainerConfig {
    Algorithm algorithm = Algorithm::bootstrap_q;
    double gamma = 0.99;
    int n = 20;  // rollout segment length
    int n_workers = 8;
    int n_heads = 10;
    double p_mask = 0.5;
    double learning_rate = 7e-4;
    long target_sync_interval = 10000;  // frames
    long total_frames = 1000000;

    // architecture
    int embed_dim = 64;
    int recurrent_dim = 64;
    CellKind cell = CellKind::lstm;

    // exploration (single-head n-step Q anneals; bootstrap relies on head
    // diversity and defaults to zero)
    double epsilon_start = 0.0;
    double epsilon_final = 0.0;
    double epsilon_anneal_frac = 0.25;

    // a2c
    double entropy_weight = 0.01;
    double value_weight = 0.5;

    // optimizer
    double grad_clip = 40.0;
    double rmsprop_decay = 0.99;
    double rmsprop_eps = 1e-5;

    // reporting
    long report_interval = 20000;
    int eval_workers = 8;

    // test hook: force one head's mask probability; disabled when head < 0
    int mask_override_head = -1;
    double mask_override_prob = 0.0;

    void validate() const;
    double epsilon_at(long frames) const;

    // Per-algorithm defaults: nstep_q is the single-head reduction with an
    // annealed epsilon; a2c uses one head as softmax logits.
    static TrainerConfig defaults_for(Algorithm algorithm);
};

// --- loss building blocks -----------------------------------------------------

// R_t = r_t + gamma * R_{t+1}, tail R_n = bootstrap; the bootstrap is forced
// to zero across an episode termination flagged in `done`.
std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap, double gamma,
                                  std::span<const uint8_t> done);

// Action selected by the online head, evaluated by the target head.
double double_q_bootstrap(std::span<const double> online_q, std::span<const double> target_q,
                          int n_actions, int head);

struct LossResult {
    double loss = 0.0;
    std::vector<double> dQ;  // same shape as the predictions
};

// Masked squared error on the taken action's Q-value, summed over workers,
// steps, and heads. Shapes: q [W][T][H][A], actions [W][T], targets [W][T][H],
// masks [W][H].
LossResult q_loss(std::span<const double> q, std::span<const int> actions,
                  std::span<const double> targets, std::span<const uint8_t> masks, int n_workers,
                  int T, int n_heads, int n_actions);

// Advantage actor-critic on a single dueling head: softmax(Q) is the policy
// (the shared V offset cancels) and mean(Q) = V is the value output.
// Shapes: q [W][T][1][A], actions [W][T], returns [W][T].
LossResult a2c_loss(std::span<const double> q, std::span<const int> actions,
                    std::span<const double> returns, int n_workers, int T, int n_actions,
                    double entropy_weight, double value_weight);

enum class ActMode { greedy, softmax };

// Greedy w.r.t. the active head with epsilon-exploration (ties break to the
// lowest action index), or a softmax sample for a2c. Always consumes the same
// rng draws for a given mode, independent of epsilon.
Action act(std::span<const double> q, int n_actions, int head, double epsilon, RngStream& rng,
           ActMode mode);

// --- the synchronous training loop ----------------------------------------------

// n-step trajectory segments from all workers plus per-(episode, head)
// bootstrap masks.
struct RolloutBatch {
    int n_workers = 0;
    int T = 0;
    std::vector<double> obs;        // [W][T][input_dim]
    std::vector<int> actions;       // [W][T]
    std::vector<double> rewards;    // [W][T]
    std::vector<uint8_t> done;      // [W][T] episode ended at this step
    std::vector<uint8_t> respawn;   // [W][T]
    std::vector<RecurrentState> initial;  // per worker, at segment start
    std::vector<double> next_obs;   // [W][input_dim]
    std::vector<uint8_t> masks;     // [W][n_heads]
    std::vector<int> heads;         // behavior head per worker
};

struct TrainerSnapshot {
    ParameterSet params;
    ParameterSet target;
    std::vector<double> opt_ms;  // rmsprop per-parameter statistics
    long frames = 0;
};

struct TrainHooks {
    std::function<void(const TrainerSnapshot&)> on_checkpoint;
    long checkpoint_interval = 0;  // frames; 0 = final only
    std::function<void(const TrainerSnapshot&)> on_divergence;
    // test instrumentation: called at each episode start with (worker, head, mask)
    std::function<void(int, int, const std::vector<uint8_t>&)> on_episode_start;
};

struct TrainResult {
    ParameterSet params;
    TrainerSnapshot snapshot;
    std::vector<MetricsRecord> train_metrics;
    std::vector<MetricsRecord> val_metrics;
};

// Runs N_w synchronous workers against `env` until total_frames: every
// worker advances one segment from a shared parameter snapshot, one gradient
// update is applied, target parameters sync on their interval. Deterministic
// in `seed` for any worker count or thread count. `val_env` adds a greedy
// evaluation record per report interval.
TrainResult train(const Env& env, const Env* val_env, const TrainerConfig& config, uint64_t seed,
                  const TrainHooks& hooks = {}, bool parallel = true,
                  const TrainerSnapshot* resume = nullptr);

}  // namespace gnav
