#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnav/observation.hpp"
#include "gnav/pose_graph.hpp"

namespace gnav {

// Shortest decimal form that parses back to the identical double. Keeps every
// file format diffable and byte-exact across write/read/write cycles.
std::string fmt_double(double value);

// --- traversal records: `traversal v1` -------------------------------------

void write_traversal(const TraversalRecord& record, const std::string& path);
TraversalRecord read_traversal(const std::string& path);

// --- pose graphs: `posegraph v1 spacing rotation_step` ----------------------

void write_pose_graph(const PoseGraph& graph, const std::string& path);
PoseGraph read_pose_graph(const std::string& path);

// --- feature manifests: `features v1 d` --------------------------------------

struct FeatureManifest {
    int d = 0;
    std::map<std::string, std::vector<double>> records;  // ref -> 4*d values
};

FeatureManifest read_feature_manifest(const std::string& path);
void write_feature_manifest(const ObservationModel& model, const PoseGraph& graph,
                            const std::string& path);

// --- parameter checkpoints: `params v1` --------------------------------------

using NamedArrays = std::vector<std::pair<std::string, std::vector<double>>>;

void write_named_arrays(const NamedArrays& arrays, const std::string& path);
NamedArrays read_named_arrays(const std::string& path);

// --- metrics streams: `metrics v1` --------------------------------------------

struct MetricsRecord {
    long frames = 0;
    long episodes = 0;
    double mean_return = 0.0;
    double min_return = 0.0;
    double loss = 0.0;
};

void write_metrics(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics(const std::string& path);

// --- flat key = value files ----------------------------------------------------

struct KvFile {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;  // throws ConfigError if absent
    std::string get(const std::string& key, const std::string& fallback) const;
    long get_long(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    void set(const std::string& key, std::string value);
};

KvFile read_kv_file(const std::string& path);
void write_kv_file(const KvFile& kv, const std::string& path);

// FNV-1a content hash of a file, hex encoded. Used by run manifests.
std::string file_content_hash(const std::string& path);

}  // namespace gnav
