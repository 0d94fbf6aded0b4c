// Benchmarks the OpenMP batch kernels against the serial reference: batched
// forward, batched BPTT, and a full rollout + update iteration.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gnav/env.hpp"
#include "gnav/observation.hpp"
#include "gnav/pose_graph.hpp"
#include "gnav/qnet.hpp"
#include "gnav/trainer.hpp"

using namespace gnav;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct BenchSetup {
    ParameterSet params;
    int W, T;
    std::vector<double> obs;
    std::vector<RecurrentState> initial;
    std::vector<double> q, dq;
    std::vector<ForwardTrace> traces;

    BenchSetup(int workers, int steps, const NetworkConfig& net, uint64_t seed)
        : params(init_params(net, seed)), W(workers), T(steps) {
        RngStream rng(mix_key(seed, 99));
        obs.resize(static_cast<size_t>(W) * T * net.input_dim);
        for (double& x : obs) x = rng.normal();
        initial.assign(W, RecurrentState(net.recurrent_dim));
        q.resize(static_cast<size_t>(W) * T * net.n_heads * net.n_actions);
        dq.resize(q.size());
        for (double& x : dq) x = rng.normal();
        traces.resize(W);
    }
};

double bench_forward(BenchSetup& s, bool parallel, int reps) {
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r)
        forward_batch(s.params, s.obs.data(), s.W, s.T, s.initial.data(), nullptr, s.q.data(),
                      s.traces.data(), parallel);
    return seconds_since(start) / reps;
}

double bench_backward(BenchSetup& s, bool parallel, int reps) {
    forward_batch(s.params, s.obs.data(), s.W, s.T, s.initial.data(), nullptr, s.q.data(),
                  s.traces.data(), false);
    std::vector<ParameterSet> worker_grads;
    ParameterSet grad(s.params.config);
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r)
        backward_batch(s.params, s.obs.data(), s.W, s.T, s.initial.data(), s.traces.data(),
                       s.dq.data(), worker_grads, grad, parallel);
    return seconds_since(start) / reps;
}

double bench_train(int workers, bool parallel, long frames) {
    LayoutSpec layout_spec;
    layout_spec.layout = "grid";
    layout_spec.rows = 6;
    layout_spec.cols = 6;
    auto [graph, record] = generate_synthetic_environment(layout_spec, 7);
    EncoderSpec enc;
    enc.d = 8;
    const ObservationModel obs = encode_synthetic(enc, graph, 7, Day::train);
    RngStream layout_rng(3);
    const RewardLayout layout = place_rewards(graph, layout_rng, 10);
    const Env env(graph, obs, layout, 200);
    TrainerConfig cfg = TrainerConfig::defaults_for(Algorithm::bootstrap_q);
    cfg.n_workers = workers;
    cfg.total_frames = frames;
    cfg.report_interval = frames;
    const auto start = std::chrono::steady_clock::now();
    train(env, nullptr, cfg, 1, {}, parallel);
    return seconds_since(start);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp; parallel paths run serially\n");
#endif
    NetworkConfig net;
    net.input_dim = 32;
    net.embed_dim = 64;
    net.recurrent_dim = 64;
    net.n_heads = 10;

    for (int workers : {4, 8, 16}) {
        BenchSetup setup(workers, 20, net, 42);
        const int reps = 50;
        const double fwd_serial = bench_forward(setup, false, reps);
        const double fwd_parallel = bench_forward(setup, true, reps);
        const double bwd_serial = bench_backward(setup, false, reps);
        const double bwd_parallel = bench_backward(setup, true, reps);
        std::printf("workers=%2d forward  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n",
                    workers, fwd_serial * 1e3, fwd_parallel * 1e3, fwd_serial / fwd_parallel);
        std::printf("workers=%2d backward serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n",
                    workers, bwd_serial * 1e3, bwd_parallel * 1e3, bwd_serial / bwd_parallel);
    }

    const long frames = 40000;
    const double serial = bench_train(8, false, frames);
    const double parallel = bench_train(8, true, frames);
    std::printf("train 8 workers %ld frames: serial %.2f s (%.0f f/s), parallel %.2f s (%.0f "
                "f/s), speedup %.2fx\n",
                frames, serial, frames / serial, parallel, frames / parallel, serial / parallel);
    return 0;
}
