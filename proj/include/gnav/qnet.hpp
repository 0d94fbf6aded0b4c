#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gnav/errors.hpp"
#include "gnav/rng.hpp"

namespace gnav {

enum class CellKind { lstm, simple };

struct NetworkConfig {
    int input_dim = 32;
    int embed_dim = 64;
    int recurrent_dim = 64;
    int n_heads = 10;
    int n_actions = 3;
    CellKind cell = CellKind::lstm;

    int gate_dim() const { return cell == CellKind::lstm ? 4 * recurrent_dim : recurrent_dim; }
    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

// Offsets of the named weight blocks inside the flat parameter vector.
struct ParamLayout {
    explicit ParamLayout(const NetworkConfig& cfg);

    size_t embed_w, embed_b;
    size_t cell_wx, cell_wh, cell_b;
    size_t heads;      // start of per-head blocks
    size_t head_size;  // vw + vb + aw + ab
    size_t total;

    size_t head_vw(int k) const { return heads + static_cast<size_t>(k) * head_size; }
    size_t head_vb(int k) const { return head_vw(k) + recurrent_dim; }
    size_t head_aw(int k) const { return head_vb(k) + 1; }
    size_t head_ab(int k) const { return head_aw(k) + static_cast<size_t>(n_actions) * recurrent_dim; }

    int recurrent_dim, n_actions;
};

// Flat parameter vector with named views. Doubles as the gradient container.
struct ParameterSet {
    NetworkConfig config;
    std::vector<double> data;

    ParameterSet() = default;
    explicit ParameterSet(const NetworkConfig& cfg)
        : config(cfg), data(ParamLayout(cfg).total, 0.0) {}

    ParamLayout layout() const { return ParamLayout(config); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

ParameterSet init_params(const NetworkConfig& config, uint64_t seed);

// Per-worker recurrent state; zeros at episode start.
struct RecurrentState {
    std::vector<double> h;
    std::vector<double> c;  // unused for CellKind::simple

    explicit RecurrentState(int recurrent_dim = 0) : h(recurrent_dim, 0.0), c(recurrent_dim, 0.0) {}
    void reset() {
        std::fill(h.begin(), h.end(), 0.0);
        std::fill(c.begin(), c.end(), 0.0);
    }
};

// Activations recorded by the forward pass and consumed by backpropagation
// through time.
struct ForwardTrace {
    int T = 0;
    std::vector<double> embed;   // [T][E], post-rectifier
    std::vector<double> gates;   // [T][4R] activated i,f,g,o (lstm only)
    std::vector<double> cell;    // [T][R]
    std::vector<double> tanh_c;  // [T][R]
    std::vector<double> hidden;  // [T][R]
};

// Q[i] = v + a[i] - mean(a).
std::vector<double> dueling_combine(double v, std::span<const double> advantage);

struct ForwardResult {
    std::vector<double> q;  // [T][n_heads][n_actions]
    RecurrentState final_state;
};

// Runs the torso and all heads over an observation sequence ([T][input_dim],
// contiguous). Deterministic.
ForwardResult forward(const ParameterSet& params, std::span<const double> obs_seq, int T,
                      const RecurrentState& initial);

ForwardResult forward(const ParameterSet& params, std::span<const double> obs_seq, int T,
                      const RecurrentState& initial, ForwardTrace& trace);

// Single step: writes [n_heads][n_actions] Q-values into `q` and advances
// `state` in place.
void forward_step(const ParameterSet& params, std::span<const double> obs, RecurrentState& state,
                  std::span<double> q);

// Exact gradient of sum(dLdQ * Q) w.r.t. every parameter, via BPTT over the
// full segment. dLdQ has shape [T][n_heads][n_actions].
ParameterSet backward(const ParameterSet& params, std::span<const double> obs_seq, int T,
                      const RecurrentState& initial, std::span<const double> dLdQ);

// Accumulating form reusing a recorded trace.
void backward_accumulate(const ParameterSet& params, std::span<const double> obs_seq, int T,
                         const RecurrentState& initial, const ForwardTrace& trace,
                         std::span<const double> dLdQ, ParameterSet& grad);

// --- batched kernels ------------------------------------------------------------
//
// One worker = one independent sequence; the parallel drivers split on the
// worker axis and reduce in fixed worker order, so serial and OpenMP runs
// produce bit-identical results.

void forward_batch(const ParameterSet& params, const double* obs, int n_workers, int T,
                   const RecurrentState* initial, RecurrentState* final_states, double* q,
                   ForwardTrace* traces, bool parallel);

void backward_batch(const ParameterSet& params, const double* obs, int n_workers, int T,
                    const RecurrentState* initial, const ForwardTrace* traces, const double* dLdQ,
                    std::vector<ParameterSet>& worker_grads, ParameterSet& grad, bool parallel);

// --- checkpoints -------------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<double>>> params_to_named_arrays(
    const ParameterSet& params);

// Restores from named arrays, validating every shape against `config`.
ParameterSet params_from_named_arrays(
    const NetworkConfig& config,
    const std::vector<std::pair<std::string, std::vector<double>>>& arrays);

}  // namespace gnav
