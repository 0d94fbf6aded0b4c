#pragma once

#include <optional>
#include <string>

#include "gnav/eval.hpp"
#include "gnav/observation.hpp"
#include "gnav/pose_graph.hpp"
#include "gnav/trainer.hpp"

namespace gnav {

// Parsed `gen-env` spec file: layout plus synthetic encoder settings.
struct EnvSpecFile {
    LayoutSpec layout;
    EncoderSpec encoder;
    double val_jitter = 0.02;  // position jitter of the emitted validation traversal
};

EnvSpecFile read_env_spec(const std::string& path);

// Full run configuration: trainer fields plus environment assembly and seeds.
struct RunConfig {
    TrainerConfig trainer;
    std::string graph_file;
    std::string features_train_file;
    std::string features_val_file;  // optional
    int t_max = 250;
    int n_subgoals = 10;
    NoiseParams noise;
    long checkpoint_interval = 0;
    uint64_t seed_env = 1;
    uint64_t seed_encoder = 2;
    uint64_t seed_train = 3;
    uint64_t seed_eval = 4;
};

// Reads a run config; the RUN_SEED environment variable, when set, overrides
// all four seeds deterministically.
RunConfig read_run_config(const std::string& path);
void write_run_config(const RunConfig& cfg, const std::string& path);

// Run manifest: config path, seeds, output directory, and content hashes of
// every input file.
void write_run_manifest(const RunConfig& cfg, const std::string& config_path,
                        const std::string& out_dir);
void verify_run_manifest(const std::string& manifest_path);

struct BuiltEnvs {
    PoseGraph graph;
    ObservationModel obs_train;
    std::optional<ObservationModel> obs_val;
    RewardLayout layout;
};

BuiltEnvs build_envs(const RunConfig& cfg);

// --- CLI command bodies ------------------------------------------------------

// Writes graph.txt, traversal_train.txt, traversal_val.txt,
// features_train.txt, features_val.txt into out_dir.
void run_gen_env(const std::string& spec_path, uint64_t seed, const std::string& out_dir);

// Trains per the run config; writes metrics_train.txt, metrics_val.txt,
// checkpoint_final.txt, manifest.txt, and periodic/diagnostic checkpoints.
void run_train(const std::string& config_path, const std::string& out_dir,
               const std::string& resume_checkpoint = "", bool parallel = true);

// Writes eval_train.txt / eval_val.txt (mode: train | val | both).
void run_eval(const std::string& config_path, const std::string& checkpoint_path,
              const std::string& out_dir, const std::string& mode,
              const std::string& traj_out = "");

void run_baseline(const std::string& graph_path, const std::string& prior, int episodes,
                  int t_max, int n_subgoals, uint64_t seed, const std::string& out_path);

// Pairs of (train, val) metrics files, one pair per seed.
void run_plot_data(const std::vector<std::pair<std::string, std::string>>& metric_files,
                   const std::string& out_path);

// Checkpoint files hold the online parameters, target parameters, optimizer
// statistics, and the frame counter as named arrays.
void write_checkpoint(const TrainerSnapshot& snap, const std::string& path);
TrainerSnapshot read_checkpoint(const NetworkConfig& config, const std::string& path);
ParameterSet read_checkpoint_params(const NetworkConfig& config, const std::string& path);

}  // namespace gnav
