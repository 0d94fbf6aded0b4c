#include "gnav/qnet.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gnav {

void NetworkConfig::validate() const {
    if (input_dim < 1 || embed_dim < 1 || recurrent_dim < 1 || n_actions < 1)
        throw ConfigError("network dimensions must be >= 1");
    if (n_heads < 1) throw ConfigError("network needs at least one head");
}

ParamLayout::ParamLayout(const NetworkConfig& cfg)
    : recurrent_dim(cfg.recurrent_dim), n_actions(cfg.n_actions) {
    const size_t I = cfg.input_dim, E = cfg.embed_dim, R = cfg.recurrent_dim, G = cfg.gate_dim();
    embed_w = 0;
    embed_b = embed_w + E * I;
    cell_wx = embed_b + E;
    cell_wh = cell_wx + G * E;
    cell_b = cell_wh + G * R;
    heads = cell_b + G;
    head_size = R + 1 + static_cast<size_t>(cfg.n_actions) * R + cfg.n_actions;
    total = heads + static_cast<size_t>(cfg.n_heads) * head_size;
}

ParameterSet init_params(const NetworkConfig& config, uint64_t seed) {
    config.validate();
    ParameterSet params(config);
    const ParamLayout lay = params.layout();
    RngStream rng(mix_key(seed, 0x1417));
    auto fill = [&](size_t offset, size_t count, int fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (size_t i = 0; i < count; ++i) params.data[offset + i] = rng.uniform(-scale, scale);
    };
    const size_t I = config.input_dim, E = config.embed_dim, R = config.recurrent_dim,
                 G = config.gate_dim(), A = config.n_actions;
    fill(lay.embed_w, E * I, config.input_dim);
    fill(lay.cell_wx, G * E, config.embed_dim);
    fill(lay.cell_wh, G * R, config.recurrent_dim);
    for (int k = 0; k < config.n_heads; ++k) {
        fill(lay.head_vw(k), R, config.recurrent_dim);
        fill(lay.head_aw(k), A * R, config.recurrent_dim);
    }
    return params;
}

std::vector<double> dueling_combine(double v, std::span<const double> advantage) {
    double mean = 0.0;
    for (double a : advantage) mean += a;
    mean /= advantage.empty() ? 1.0 : static_cast<double>(advantage.size());
    std::vector<double> q(advantage.size());
    for (size_t i = 0; i < advantage.size(); ++i) q[i] = v + advantage[i] - mean;
    return q;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b, W row-major [rows][cols]
inline void matvec(const double* w, const double* x, const double* b, double* y, int rows,
                   int cols) {
    for (int r = 0; r < rows; ++r) {
        double acc = b ? b[r] : 0.0;
        const double* row = w + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

// y += W x
inline void matvec_acc(const double* w, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = w + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

// dx += W^T dy
inline void matvec_transpose_acc(const double* w, const double* dy, double* dx, int rows,
                                 int cols) {
    for (int r = 0; r < rows; ++r) {
        const double* row = w + static_cast<size_t>(r) * cols;
        const double g = dy[r];
        for (int c = 0; c < cols; ++c) dx[c] += row[c] * g;
    }
}

// dW += dy (outer) x
inline void outer_acc(double* dw, const double* dy, const double* x, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* row = dw + static_cast<size_t>(r) * cols;
        const double g = dy[r];
        for (int c = 0; c < cols; ++c) row[c] += g * x[c];
    }
}

void check_shapes(const ParameterSet& params, size_t obs_len, int T) {
    const size_t expected = static_cast<size_t>(T) * params.config.input_dim;
    if (obs_len != expected)
        throw ConfigError("observation sequence has " + std::to_string(obs_len) +
                          " values, expected " + std::to_string(expected));
    if (params.data.size() != params.layout().total)
        throw ConfigError("parameter vector size does not match network config");
}

void forward_impl(const ParameterSet& params, std::span<const double> obs_seq, int T,
                  const RecurrentState& initial, double* q, ForwardTrace* trace,
                  RecurrentState* final_state) {
    const NetworkConfig& cfg = params.config;
    check_shapes(params, obs_seq.size(), T);
    const ParamLayout lay = params.layout();
    const int I = cfg.input_dim, E = cfg.embed_dim, R = cfg.recurrent_dim, A = cfg.n_actions,
              H = cfg.n_heads, G = cfg.gate_dim();
    const double* p = params.data.data();

    if (trace) {
        trace->T = T;
        trace->embed.assign(static_cast<size_t>(T) * E, 0.0);
        trace->cell.assign(static_cast<size_t>(T) * R, 0.0);
        trace->tanh_c.assign(static_cast<size_t>(T) * R, 0.0);
        trace->hidden.assign(static_cast<size_t>(T) * R, 0.0);
        if (cfg.cell == CellKind::lstm) trace->gates.assign(static_cast<size_t>(T) * G, 0.0);
    }

    std::vector<double> h = initial.h.empty() ? std::vector<double>(R, 0.0) : initial.h;
    std::vector<double> c = initial.c.empty() ? std::vector<double>(R, 0.0) : initial.c;
    std::vector<double> e(E), z(G), adv(A);

    for (int t = 0; t < T; ++t) {
        const double* x = obs_seq.data() + static_cast<size_t>(t) * I;
        matvec(p + lay.embed_w, x, p + lay.embed_b, e.data(), E, I);
        for (int j = 0; j < E; ++j) e[j] = e[j] > 0 ? e[j] : 0.0;

        matvec(p + lay.cell_wx, e.data(), p + lay.cell_b, z.data(), G, E);
        matvec_acc(p + lay.cell_wh, h.data(), z.data(), G, R);
        if (cfg.cell == CellKind::lstm) {
            for (int j = 0; j < R; ++j) {
                const double ig = sigmoid(z[j]);
                const double fg = sigmoid(z[R + j]);
                const double gg = std::tanh(z[2 * R + j]);
                const double og = sigmoid(z[3 * R + j]);
                c[j] = fg * c[j] + ig * gg;
                const double tc = std::tanh(c[j]);
                h[j] = og * tc;
                if (trace) {
                    double* gates = trace->gates.data() + static_cast<size_t>(t) * G;
                    gates[j] = ig;
                    gates[R + j] = fg;
                    gates[2 * R + j] = gg;
                    gates[3 * R + j] = og;
                    trace->cell[static_cast<size_t>(t) * R + j] = c[j];
                    trace->tanh_c[static_cast<size_t>(t) * R + j] = tc;
                }
            }
        } else {
            for (int j = 0; j < R; ++j) h[j] = std::tanh(z[j]);
        }
        if (trace) {
            std::copy(e.begin(), e.end(), trace->embed.begin() + static_cast<size_t>(t) * E);
            std::copy(h.begin(), h.end(), trace->hidden.begin() + static_cast<size_t>(t) * R);
        }

        for (int k = 0; k < H; ++k) {
            double v = params.data[lay.head_vb(k)];
            const double* vw = p + lay.head_vw(k);
            for (int j = 0; j < R; ++j) v += vw[j] * h[j];
            matvec(p + lay.head_aw(k), h.data(), p + lay.head_ab(k), adv.data(), A, R);
            double mean = 0.0;
            for (int a = 0; a < A; ++a) mean += adv[a];
            mean /= A;
            double* out = q + (static_cast<size_t>(t) * H + k) * A;
            for (int a = 0; a < A; ++a) out[a] = v + adv[a] - mean;
        }
    }
    if (final_state) {
        final_state->h = std::move(h);
        final_state->c = std::move(c);
    }
}

}  // namespace

ForwardResult forward(const ParameterSet& params, std::span<const double> obs_seq, int T,
                      const RecurrentState& initial) {
    ForwardResult result;
    result.q.assign(static_cast<size_t>(T) * params.config.n_heads * params.config.n_actions, 0.0);
    forward_impl(params, obs_seq, T, initial, result.q.data(), nullptr, &result.final_state);
    return result;
}

ForwardResult forward(const ParameterSet& params, std::span<const double> obs_seq, int T,
                      const RecurrentState& initial, ForwardTrace& trace) {
    ForwardResult result;
    result.q.assign(static_cast<size_t>(T) * params.config.n_heads * params.config.n_actions, 0.0);
    forward_impl(params, obs_seq, T, initial, result.q.data(), &trace, &result.final_state);
    return result;
}

void forward_step(const ParameterSet& params, std::span<const double> obs, RecurrentState& state,
                  std::span<double> q) {
    RecurrentState next(params.config.recurrent_dim);
    forward_impl(params, obs, 1, state, q.data(), nullptr, &next);
    state = std::move(next);
}

void backward_accumulate(const ParameterSet& params, std::span<const double> obs_seq, int T,
                         const RecurrentState& initial, const ForwardTrace& trace,
                         std::span<const double> dLdQ, ParameterSet& grad) {
    const NetworkConfig& cfg = params.config;
    check_shapes(params, obs_seq.size(), T);
    if (dLdQ.size() != static_cast<size_t>(T) * cfg.n_heads * cfg.n_actions)
        throw ConfigError("dLdQ shape mismatch");
    if (grad.data.size() != params.data.size()) grad = ParameterSet(cfg);

    const ParamLayout lay = params.layout();
    const int I = cfg.input_dim, E = cfg.embed_dim, R = cfg.recurrent_dim, A = cfg.n_actions,
              H = cfg.n_heads, G = cfg.gate_dim();
    const double* p = params.data.data();
    double* g = grad.data.data();

    std::vector<double> dh(R, 0.0), dc(R, 0.0), dz(G), de(E), dh_prev(R), dadv(A);

    for (int t = T - 1; t >= 0; --t) {
        const double* h = trace.hidden.data() + static_cast<size_t>(t) * R;
        const double* e = trace.embed.data() + static_cast<size_t>(t) * E;
        const double* x = obs_seq.data() + static_cast<size_t>(t) * I;

        // heads feed dh at this timestep
        for (int k = 0; k < H; ++k) {
            const double* dq = dLdQ.data() + (static_cast<size_t>(t) * H + k) * A;
            double sum_dq = 0.0;
            for (int a = 0; a < A; ++a) sum_dq += dq[a];
            const double dv = sum_dq;
            for (int a = 0; a < A; ++a) dadv[a] = dq[a] - sum_dq / A;

            double* vw_g = g + lay.head_vw(k);
            const double* vw = p + lay.head_vw(k);
            for (int j = 0; j < R; ++j) {
                vw_g[j] += dv * h[j];
                dh[j] += dv * vw[j];
            }
            g[lay.head_vb(k)] += dv;
            outer_acc(g + lay.head_aw(k), dadv.data(), h, A, R);
            matvec_transpose_acc(p + lay.head_aw(k), dadv.data(), dh.data(), A, R);
            for (int a = 0; a < A; ++a) g[lay.head_ab(k) + a] += dadv[a];
        }

        // recurrent cell
        if (cfg.cell == CellKind::lstm) {
            const double* gates = trace.gates.data() + static_cast<size_t>(t) * G;
            const double* tc = trace.tanh_c.data() + static_cast<size_t>(t) * R;
            const double* c_prev =
                t > 0 ? trace.cell.data() + static_cast<size_t>(t - 1) * R
                      : (initial.c.empty() ? nullptr : initial.c.data());
            for (int j = 0; j < R; ++j) {
                const double ig = gates[j], fg = gates[R + j], gg = gates[2 * R + j],
                             og = gates[3 * R + j];
                const double d_o = dh[j] * tc[j];
                const double d_c = dc[j] + dh[j] * og * (1.0 - tc[j] * tc[j]);
                const double cp = c_prev ? c_prev[j] : 0.0;
                dz[j] = d_c * gg * ig * (1.0 - ig);
                dz[R + j] = d_c * cp * fg * (1.0 - fg);
                dz[2 * R + j] = d_c * ig * (1.0 - gg * gg);
                dz[3 * R + j] = d_o * og * (1.0 - og);
                dc[j] = d_c * fg;
            }
        } else {
            for (int j = 0; j < R; ++j) dz[j] = dh[j] * (1.0 - h[j] * h[j]);
        }

        const double* h_prev = t > 0 ? trace.hidden.data() + static_cast<size_t>(t - 1) * R
                                     : (initial.h.empty() ? nullptr : initial.h.data());
        outer_acc(g + lay.cell_wx, dz.data(), e, G, E);
        if (h_prev) outer_acc(g + lay.cell_wh, dz.data(), h_prev, G, R);
        for (int j = 0; j < G; ++j) g[lay.cell_b + j] += dz[j];

        std::fill(de.begin(), de.end(), 0.0);
        matvec_transpose_acc(p + lay.cell_wx, dz.data(), de.data(), G, E);
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        matvec_transpose_acc(p + lay.cell_wh, dz.data(), dh_prev.data(), G, R);

        // embed rectifier
        for (int j = 0; j < E; ++j) de[j] = e[j] > 0 ? de[j] : 0.0;
        outer_acc(g + lay.embed_w, de.data(), x, E, I);
        for (int j = 0; j < E; ++j) g[lay.embed_b + j] += de[j];

        std::copy(dh_prev.begin(), dh_prev.end(), dh.begin());
    }
}

ParameterSet backward(const ParameterSet& params, std::span<const double> obs_seq, int T,
                      const RecurrentState& initial, std::span<const double> dLdQ) {
    ForwardTrace trace;
    forward(params, obs_seq, T, initial, trace);
    ParameterSet grad(params.config);
    backward_accumulate(params, obs_seq, T, initial, trace, dLdQ, grad);
    return grad;
}

// --- batched kernels ------------------------------------------------------------

void forward_batch(const ParameterSet& params, const double* obs, int n_workers, int T,
                   const RecurrentState* initial, RecurrentState* final_states, double* q,
                   ForwardTrace* traces, bool parallel) {
    const size_t obs_stride = static_cast<size_t>(T) * params.config.input_dim;
    const size_t q_stride =
        static_cast<size_t>(T) * params.config.n_heads * params.config.n_actions;
    auto work = [&](int w) {
        forward_impl(params, {obs + w * obs_stride, obs_stride}, T, initial[w], q + w * q_stride,
                     traces ? &traces[w] : nullptr, final_states ? &final_states[w] : nullptr);
    };
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int w = 0; w < n_workers; ++w) work(w);
    } else {
        for (int w = 0; w < n_workers; ++w) work(w);
    }
}

void backward_batch(const ParameterSet& params, const double* obs, int n_workers, int T,
                    const RecurrentState* initial, const ForwardTrace* traces, const double* dLdQ,
                    std::vector<ParameterSet>& worker_grads, ParameterSet& grad, bool parallel) {
    const size_t obs_stride = static_cast<size_t>(T) * params.config.input_dim;
    const size_t q_stride =
        static_cast<size_t>(T) * params.config.n_heads * params.config.n_actions;
    worker_grads.resize(n_workers);
    auto work = [&](int w) {
        if (worker_grads[w].data.size() != params.data.size())
            worker_grads[w] = ParameterSet(params.config);
        else
            worker_grads[w].zero();
        backward_accumulate(params, {obs + w * obs_stride, obs_stride}, T, initial[w], traces[w],
                            {dLdQ + w * q_stride, q_stride}, worker_grads[w]);
    };
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int w = 0; w < n_workers; ++w) work(w);
    } else {
        for (int w = 0; w < n_workers; ++w) work(w);
    }
    if (grad.data.size() != params.data.size()) grad = ParameterSet(params.config);
    grad.zero();
    // fixed-order reduction keeps the sum independent of the thread count
    for (int w = 0; w < n_workers; ++w) {
        const std::vector<double>& src = worker_grads[w].data;
        for (size_t i = 0; i < src.size(); ++i) grad.data[i] += src[i];
    }
}

// --- checkpoints -------------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<double>>> params_to_named_arrays(
    const ParameterSet& params) {
    const ParamLayout lay = params.layout();
    const NetworkConfig& cfg = params.config;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;
    auto slice = [&](const std::string& name, size_t offset, size_t count) {
        arrays.emplace_back(name, std::vector<double>(params.data.begin() + offset,
                                                      params.data.begin() + offset + count));
    };
    const size_t I = cfg.input_dim, E = cfg.embed_dim, R = cfg.recurrent_dim, G = cfg.gate_dim(),
                 A = cfg.n_actions;
    slice("embed_w", lay.embed_w, E * I);
    slice("embed_b", lay.embed_b, E);
    slice("cell_wx", lay.cell_wx, G * E);
    slice("cell_wh", lay.cell_wh, G * R);
    slice("cell_b", lay.cell_b, G);
    for (int k = 0; k < cfg.n_heads; ++k) {
        const std::string prefix = "head" + std::to_string(k) + "_";
        slice(prefix + "vw", lay.head_vw(k), R);
        slice(prefix + "vb", lay.head_vb(k), 1);
        slice(prefix + "aw", lay.head_aw(k), A * R);
        slice(prefix + "ab", lay.head_ab(k), A);
    }
    return arrays;
}

ParameterSet params_from_named_arrays(
    const NetworkConfig& config,
    const std::vector<std::pair<std::string, std::vector<double>>>& arrays) {
    ParameterSet params(config);
    const auto expected = params_to_named_arrays(params);
    size_t found = 0;
    for (const auto& [name, values] : expected) {
        bool present = false;
        for (const auto& [got_name, got_values] : arrays) {
            if (got_name != name) continue;
            present = true;
            if (got_values.size() != values.size())
                throw ConfigError("checkpoint array '" + name + "' has " +
                                  std::to_string(got_values.size()) + " values, expected " +
                                  std::to_string(values.size()));
            break;
        }
        if (!present) throw ConfigError("checkpoint is missing array '" + name + "'");
        ++found;
    }
    (void)found;
    const ParamLayout lay = params.layout();
    auto restore = [&](const std::string& name, size_t offset) {
        for (const auto& [got_name, got_values] : arrays) {
            if (got_name == name) {
                std::copy(got_values.begin(), got_values.end(), params.data.begin() + offset);
                return;
            }
        }
    };
    restore("embed_w", lay.embed_w);
    restore("embed_b", lay.embed_b);
    restore("cell_wx", lay.cell_wx);
    restore("cell_wh", lay.cell_wh);
    restore("cell_b", lay.cell_b);
    for (int k = 0; k < config.n_heads; ++k) {
        const std::string prefix = "head" + std::to_string(k) + "_";
        restore(prefix + "vw", lay.head_vw(k));
        restore(prefix + "vb", lay.head_vb(k));
        restore(prefix + "aw", lay.head_aw(k));
        restore(prefix + "ab", lay.head_ab(k));
    }
    return params;
}

}  // namespace gnav
