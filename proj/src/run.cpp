#include "gnav/run.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace gnav {

namespace fs = std::filesystem;

EnvSpecFile read_env_spec(const std::string& path) {
    const KvFile kv = read_kv_file(path);
    EnvSpecFile spec;
    spec.layout.layout = kv.get("layout", spec.layout.layout);
    if (spec.layout.layout == "paperscale") {
        spec.layout = paper_scale_layout();
    } else {
        spec.layout.length = static_cast<int>(kv.get_long("length", spec.layout.length));
        spec.layout.rows = static_cast<int>(kv.get_long("rows", spec.layout.rows));
        spec.layout.cols = static_cast<int>(kv.get_long("cols", spec.layout.cols));
        spec.layout.arm = static_cast<int>(kv.get_long("arm", spec.layout.arm));
        spec.layout.spine = static_cast<int>(kv.get_long("spine", spec.layout.spine));
        spec.layout.teeth = static_cast<int>(kv.get_long("teeth", spec.layout.teeth));
        spec.layout.tooth_len = static_cast<int>(kv.get_long("tooth_len", spec.layout.tooth_len));
        spec.layout.tooth_gap = static_cast<int>(kv.get_long("tooth_gap", spec.layout.tooth_gap));
        spec.layout.tooth_first =
            static_cast<int>(kv.get_long("tooth_first", spec.layout.tooth_first));
    }
    spec.layout.spacing = kv.get_double("spacing", spec.layout.spacing);
    spec.layout.rotation_step =
        static_cast<int>(kv.get_long("rotation_step", spec.layout.rotation_step));
    spec.layout.jitter = kv.get_double("jitter", spec.layout.jitter);
    spec.encoder.d = static_cast<int>(kv.get_long("d", spec.encoder.d));
    spec.encoder.view_noise = kv.get_double("view_noise", spec.encoder.view_noise);
    spec.encoder.day_shift = kv.get_double("day_shift", spec.encoder.day_shift);
    spec.encoder.edge_sample_step =
        kv.get_double("edge_sample_step", spec.encoder.edge_sample_step);
    spec.val_jitter = kv.get_double("val_jitter", spec.val_jitter);
    if (kv.has("aliasing")) {
        std::istringstream ss(kv.get("aliasing"));
        std::string pair;
        while (std::getline(ss, pair, ',')) {
            const size_t colon = pair.find(':');
            NodeId a, b;
            if (colon == std::string::npos ||
                std::sscanf(pair.c_str(), "%d:%d", &a, &b) != 2)
                throw ConfigError(path + ": aliasing pairs must look like 'a:b,c:d'");
            spec.encoder.aliasing_pairs.emplace_back(a, b);
        }
    }
    return spec;
}

RunConfig read_run_config(const std::string& path) {
    const KvFile kv = read_kv_file(path);
    RunConfig cfg;
    cfg.trainer = TrainerConfig::defaults_for(algorithm_from_name(kv.get("algorithm")));
    TrainerConfig& t = cfg.trainer;
    t.gamma = kv.get_double("gamma", t.gamma);
    t.n = static_cast<int>(kv.get_long("n", t.n));
    t.n_workers = static_cast<int>(kv.get_long("n_workers", t.n_workers));
    t.n_heads = static_cast<int>(kv.get_long("n_heads", t.n_heads));
    t.p_mask = kv.get_double("p_mask", t.p_mask);
    t.learning_rate = kv.get_double("learning_rate", t.learning_rate);
    t.target_sync_interval = kv.get_long("target_sync_interval", t.target_sync_interval);
    t.total_frames = kv.get_long("total_frames", t.total_frames);
    t.embed_dim = static_cast<int>(kv.get_long("embed_dim", t.embed_dim));
    t.recurrent_dim = static_cast<int>(kv.get_long("recurrent_dim", t.recurrent_dim));
    const std::string cell = kv.get("cell", "lstm");
    if (cell == "lstm")
        t.cell = CellKind::lstm;
    else if (cell == "simple")
        t.cell = CellKind::simple;
    else
        throw ConfigError("unknown cell kind '" + cell + "'");
    t.epsilon_start = kv.get_double("epsilon_start", t.epsilon_start);
    t.epsilon_final = kv.get_double("epsilon_final", t.epsilon_final);
    t.epsilon_anneal_frac = kv.get_double("epsilon_anneal_frac", t.epsilon_anneal_frac);
    t.entropy_weight = kv.get_double("entropy_weight", t.entropy_weight);
    t.value_weight = kv.get_double("value_weight", t.value_weight);
    t.grad_clip = kv.get_double("grad_clip", t.grad_clip);
    t.rmsprop_decay = kv.get_double("rmsprop_decay", t.rmsprop_decay);
    t.rmsprop_eps = kv.get_double("rmsprop_eps", t.rmsprop_eps);
    t.report_interval = kv.get_long("report_interval", t.report_interval);
    t.eval_workers = static_cast<int>(kv.get_long("eval_workers", t.eval_workers));

    cfg.graph_file = kv.get("graph");
    cfg.features_train_file = kv.get("features_train");
    cfg.features_val_file = kv.get("features_val", "");
    cfg.t_max = static_cast<int>(kv.get_long("t_max", cfg.t_max));
    cfg.n_subgoals = static_cast<int>(kv.get_long("n_subgoals", cfg.n_subgoals));
    cfg.noise.sigma_pos = kv.get_double("sigma_pos", cfg.noise.sigma_pos);
    cfg.noise.sigma_rot = kv.get_double("sigma_rot", cfg.noise.sigma_rot);
    cfg.noise.stochastic = kv.get_bool("stochastic", cfg.noise.stochastic);
    cfg.checkpoint_interval = kv.get_long("checkpoint_interval", cfg.checkpoint_interval);
    cfg.seed_env = static_cast<uint64_t>(kv.get_long("seed_env", 1));
    cfg.seed_encoder = static_cast<uint64_t>(kv.get_long("seed_encoder", 2));
    cfg.seed_train = static_cast<uint64_t>(kv.get_long("seed_train", 3));
    cfg.seed_eval = static_cast<uint64_t>(kv.get_long("seed_eval", 4));

    if (const char* run_seed = std::getenv("RUN_SEED")) {
        char* end = nullptr;
        const unsigned long long s = std::strtoull(run_seed, &end, 10);
        if (end == run_seed || *end != '\0')
            throw ConfigError("RUN_SEED must be an unsigned integer");
        cfg.seed_env = mix_key(s, 1);
        cfg.seed_encoder = mix_key(s, 2);
        cfg.seed_train = mix_key(s, 3);
        cfg.seed_eval = mix_key(s, 4);
    }
    cfg.trainer.validate();
    return cfg;
}

void write_run_config(const RunConfig& cfg, const std::string& path) {
    KvFile kv;
    const TrainerConfig& t = cfg.trainer;
    kv.set("algorithm", algorithm_name(t.algorithm));
    kv.set("gamma", fmt_double(t.gamma));
    kv.set("n", std::to_string(t.n));
    kv.set("n_workers", std::to_string(t.n_workers));
    kv.set("n_heads", std::to_string(t.n_heads));
    kv.set("p_mask", fmt_double(t.p_mask));
    kv.set("learning_rate", fmt_double(t.learning_rate));
    kv.set("target_sync_interval", std::to_string(t.target_sync_interval));
    kv.set("total_frames", std::to_string(t.total_frames));
    kv.set("embed_dim", std::to_string(t.embed_dim));
    kv.set("recurrent_dim", std::to_string(t.recurrent_dim));
    kv.set("cell", t.cell == CellKind::lstm ? "lstm" : "simple");
    kv.set("epsilon_start", fmt_double(t.epsilon_start));
    kv.set("epsilon_final", fmt_double(t.epsilon_final));
    kv.set("epsilon_anneal_frac", fmt_double(t.epsilon_anneal_frac));
    kv.set("entropy_weight", fmt_double(t.entropy_weight));
    kv.set("value_weight", fmt_double(t.value_weight));
    kv.set("grad_clip", fmt_double(t.grad_clip));
    kv.set("rmsprop_decay", fmt_double(t.rmsprop_decay));
    kv.set("rmsprop_eps", fmt_double(t.rmsprop_eps));
    kv.set("report_interval", std::to_string(t.report_interval));
    kv.set("eval_workers", std::to_string(t.eval_workers));
    kv.set("graph", cfg.graph_file);
    kv.set("features_train", cfg.features_train_file);
    if (!cfg.features_val_file.empty()) kv.set("features_val", cfg.features_val_file);
    kv.set("t_max", std::to_string(cfg.t_max));
    kv.set("n_subgoals", std::to_string(cfg.n_subgoals));
    kv.set("sigma_pos", fmt_double(cfg.noise.sigma_pos));
    kv.set("sigma_rot", fmt_double(cfg.noise.sigma_rot));
    kv.set("stochastic", cfg.noise.stochastic ? "1" : "0");
    kv.set("checkpoint_interval", std::to_string(cfg.checkpoint_interval));
    kv.set("seed_env", std::to_string(cfg.seed_env));
    kv.set("seed_encoder", std::to_string(cfg.seed_encoder));
    kv.set("seed_train", std::to_string(cfg.seed_train));
    kv.set("seed_eval", std::to_string(cfg.seed_eval));
    write_kv_file(kv, path);
}

void write_run_manifest(const RunConfig& cfg, const std::string& config_path,
                        const std::string& out_dir) {
    KvFile kv;
    kv.set("config", config_path);
    kv.set("out_dir", out_dir);
    kv.set("seed_env", std::to_string(cfg.seed_env));
    kv.set("seed_encoder", std::to_string(cfg.seed_encoder));
    kv.set("seed_train", std::to_string(cfg.seed_train));
    kv.set("seed_eval", std::to_string(cfg.seed_eval));
    kv.set("hash_config", file_content_hash(config_path));
    kv.set("hash_graph", file_content_hash(cfg.graph_file));
    kv.set("hash_features_train", file_content_hash(cfg.features_train_file));
    if (!cfg.features_val_file.empty())
        kv.set("hash_features_val", file_content_hash(cfg.features_val_file));
    kv.set("file_config", config_path);
    kv.set("file_graph", cfg.graph_file);
    kv.set("file_features_train", cfg.features_train_file);
    if (!cfg.features_val_file.empty()) kv.set("file_features_val", cfg.features_val_file);
    write_kv_file(kv, (fs::path(out_dir) / "manifest.txt").string());
}

void verify_run_manifest(const std::string& manifest_path) {
    const KvFile kv = read_kv_file(manifest_path);
    const std::pair<const char*, const char*> checks[] = {
        {"file_config", "hash_config"},
        {"file_graph", "hash_graph"},
        {"file_features_train", "hash_features_train"},
        {"file_features_val", "hash_features_val"},
    };
    for (const auto& [file_key, hash_key] : checks) {
        if (!kv.has(file_key)) continue;
        const std::string file = kv.get(file_key);
        if (!fs::exists(file)) throw ConfigError("manifest input missing: " + file);
        if (file_content_hash(file) != kv.get(hash_key))
            throw ConfigError("manifest input changed since the run: " + file);
    }
}

BuiltEnvs build_envs(const RunConfig& cfg) {
    PoseGraph graph = read_pose_graph(cfg.graph_file);
    ObservationModel obs_train =
        ingest_precomputed_features(graph, cfg.features_train_file, cfg.noise);
    std::optional<ObservationModel> obs_val;
    if (!cfg.features_val_file.empty())
        obs_val = ingest_precomputed_features(graph, cfg.features_val_file, cfg.noise);
    RngStream layout_rng(mix_key(cfg.seed_env, 0xA));
    RewardLayout layout = place_rewards(graph, layout_rng, cfg.n_subgoals);
    return BuiltEnvs{std::move(graph), std::move(obs_train), std::move(obs_val),
                     std::move(layout)};
}

// --- command bodies ---------------------------------------------------------

void run_gen_env(const std::string& spec_path, uint64_t seed, const std::string& out_dir) {
    const EnvSpecFile spec = read_env_spec(spec_path);
    fs::create_directories(out_dir);
    auto [graph, record] = generate_synthetic_environment(spec.layout, mix_key(seed, 1));
    const fs::path dir(out_dir);
    write_pose_graph(graph, (dir / "graph.txt").string());
    write_traversal(record, (dir / "traversal_train.txt").string());
    const TraversalRecord val_record =
        jitter_record(record, spec.val_jitter, mix_key(seed, 2));
    write_traversal(val_record, (dir / "traversal_val.txt").string());
    const uint64_t enc_seed = mix_key(seed, 3);
    const ObservationModel train_model =
        encode_synthetic(spec.encoder, graph, enc_seed, Day::train);
    const ObservationModel val_model =
        encode_synthetic(spec.encoder, graph, enc_seed, Day::validation);
    write_feature_manifest(train_model, graph, (dir / "features_train.txt").string());
    write_feature_manifest(val_model, graph, (dir / "features_val.txt").string());
}

void write_checkpoint(const TrainerSnapshot& snap, const std::string& path) {
    NamedArrays arrays = params_to_named_arrays(snap.params);
    for (auto& [name, values] : params_to_named_arrays(snap.target))
        arrays.emplace_back("target_" + name, std::move(values));
    arrays.emplace_back("opt_ms", snap.opt_ms);
    arrays.emplace_back("frames", std::vector<double>{static_cast<double>(snap.frames)});
    write_named_arrays(arrays, path);
}

TrainerSnapshot read_checkpoint(const NetworkConfig& config, const std::string& path) {
    const NamedArrays arrays = read_named_arrays(path);
    NamedArrays online, target;
    TrainerSnapshot snap;
    bool have_frames = false;
    for (const auto& [name, values] : arrays) {
        if (name == "opt_ms") {
            snap.opt_ms = values;
        } else if (name == "frames") {
            if (values.size() != 1) throw ConfigError(path + ": malformed frames array");
            snap.frames = static_cast<long>(values[0]);
            have_frames = true;
        } else if (name.rfind("target_", 0) == 0) {
            target.emplace_back(name.substr(7), values);
        } else {
            online.emplace_back(name, values);
        }
    }
    snap.params = params_from_named_arrays(config, online);
    snap.target = target.empty() ? snap.params : params_from_named_arrays(config, target);
    if (snap.opt_ms.empty()) snap.opt_ms.assign(snap.params.data.size(), 0.0);
    if (snap.opt_ms.size() != snap.params.data.size())
        throw ConfigError(path + ": optimizer statistics length mismatch");
    if (!have_frames) snap.frames = 0;
    return snap;
}

ParameterSet read_checkpoint_params(const NetworkConfig& config, const std::string& path) {
    return read_checkpoint(config, path).params;
}

namespace {

NetworkConfig net_config_for(const RunConfig& cfg, int obs_dim) {
    NetworkConfig net;
    net.input_dim = obs_dim;
    net.embed_dim = cfg.trainer.embed_dim;
    net.recurrent_dim = cfg.trainer.recurrent_dim;
    net.n_heads = cfg.trainer.n_heads;
    net.n_actions = kNumActions;
    net.cell = cfg.trainer.cell;
    return net;
}

}  // namespace

void run_train(const std::string& config_path, const std::string& out_dir,
               const std::string& resume_checkpoint, bool parallel) {
    const RunConfig cfg = read_run_config(config_path);
    fs::create_directories(out_dir);
    const BuiltEnvs built = build_envs(cfg);
    const Env env(built.graph, built.obs_train, built.layout, cfg.t_max);
    std::optional<Env> val_env;
    if (built.obs_val) val_env.emplace(built.graph, *built.obs_val, built.layout, cfg.t_max);

    write_run_manifest(cfg, config_path, out_dir);

    const fs::path dir(out_dir);
    TrainHooks hooks;
    hooks.checkpoint_interval = cfg.checkpoint_interval;
    hooks.on_checkpoint = [&](const TrainerSnapshot& snap) {
        write_checkpoint(snap,
                         (dir / ("checkpoint_" + std::to_string(snap.frames) + ".txt")).string());
    };
    hooks.on_divergence = [&](const TrainerSnapshot& snap) {
        write_checkpoint(snap, (dir / "checkpoint_diverged.txt").string());
    };

    std::optional<TrainerSnapshot> resume;
    if (!resume_checkpoint.empty()) {
        resume =
            read_checkpoint(net_config_for(cfg, built.obs_train.observation_dim()),
                            resume_checkpoint);
    }

    const TrainResult result =
        train(env, val_env ? &*val_env : nullptr, cfg.trainer, cfg.seed_train, hooks, parallel,
              resume ? &*resume : nullptr);

    write_metrics(result.train_metrics, (dir / "metrics_train.txt").string());
    write_metrics(result.val_metrics, (dir / "metrics_val.txt").string());
    write_checkpoint(result.snapshot, (dir / "checkpoint_final.txt").string());
}

void run_eval(const std::string& config_path, const std::string& checkpoint_path,
              const std::string& out_dir, const std::string& mode, const std::string& traj_out) {
    if (mode != "train" && mode != "val" && mode != "both")
        throw ConfigError("eval mode must be train, val, or both");
    const RunConfig cfg = read_run_config(config_path);
    fs::create_directories(out_dir);
    const BuiltEnvs built = build_envs(cfg);
    const ParameterSet params = read_checkpoint_params(
        net_config_for(cfg, built.obs_train.observation_dim()), checkpoint_path);
    const fs::path dir(out_dir);

    std::optional<EvalReport> train_report;
    if (mode != "val") {
        const Env env(built.graph, built.obs_train, built.layout, cfg.t_max);
        RngStream rng(mix_key(cfg.seed_eval, 0x7E));
        train_report = evaluate(params, env, cfg.trainer.eval_workers, rng);
        write_eval_report(*train_report, (dir / "eval_train.txt").string());
        if (!traj_out.empty()) {
            const auto [traj, ret] = greedy_episode(params, env, 0, mix_key(cfg.seed_eval, 0x77));
            (void)ret;
            write_trajectory(traj, traj_out);
        }
    }
    if (mode != "train") {
        if (!built.obs_val) throw ConfigError("run config has no features_val file");
        const Env env(built.graph, *built.obs_val, built.layout, cfg.t_max);
        RngStream rng(mix_key(cfg.seed_eval, 0x7F));
        EvalReport val_report = evaluate(params, env, cfg.trainer.eval_workers, rng);
        if (train_report && train_report->r_min > 0.0) {
            val_report.r_relative = val_report.r_min / train_report->r_min;
            val_report.r_relative_defined = true;
        }
        write_eval_report(val_report, (dir / "eval_val.txt").string());
    }
}

void run_baseline(const std::string& graph_path, const std::string& prior, int episodes,
                  int t_max, int n_subgoals, uint64_t seed, const std::string& out_path) {
    WalkPrior walk_prior;
    if (prior == "uniform")
        walk_prior = WalkPrior::uniform;
    else if (prior == "intersection")
        walk_prior = WalkPrior::intersection;
    else
        throw ConfigError("prior must be uniform or intersection");
    const PoseGraph graph = read_pose_graph(graph_path);
    RngStream layout_rng(mix_key(seed, 0xA));
    const RewardLayout layout = place_rewards(graph, layout_rng, n_subgoals);
    RngStream rng(mix_key(seed, 0xB));
    const EvalReport report = random_walk_baseline(graph, layout, t_max, walk_prior, rng, episodes);
    write_eval_report(report, out_path);
}

void run_plot_data(const std::vector<std::pair<std::string, std::string>>& metric_files,
                   const std::string& out_path) {
    std::vector<CurveInput> seeds;
    for (const auto& [train_path, val_path] : metric_files) {
        CurveInput input;
        input.train = read_metrics(train_path);
        if (!val_path.empty()) input.val = read_metrics(val_path);
        seeds.push_back(std::move(input));
    }
    export_curves(seeds, out_path);
}

}  // namespace gnav
