#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gnav/pose_graph.hpp"
#include "gnav/rng.hpp"

namespace gnav {

// Four directional views, each d-dimensional, concatenated in heading order
// starting from the agent's current heading.
using FeatureVector = std::vector<double>;

inline constexpr int kViews = 4;

enum class Day { train, validation };

// Synthetic stand-in for a frozen pre-trained encoder.
struct EncoderSpec {
    int d = 8;                                          // per-view feature dimension
    std::vector<std::pair<NodeId, NodeId>> aliasing_pairs;  // pairs sharing base features
    double view_noise = 0.0;   // std of per-sample perturbation (dynamic clutter)
    double day_shift = 0.0;    // std of validation-day perturbation
    double edge_sample_step = 0.025;  // target spacing of in-between samples (meters)
};

struct NoiseParams {
    double sigma_pos = 0.05;  // meters
    double sigma_rot = 5.0;   // degrees
    bool stochastic = true;
};

// O(s) -> p(x|s): per-node view features, in-between samples along edges, and
// the position/rotation noise that turns them into a distribution. Immutable
// after construction; concurrent sampling requires caller-owned rng streams.
class ObservationModel {
  public:
    struct EdgeSamples {
        std::vector<double> offsets;   // meters from the lower-id endpoint, ascending in (0, spacing)
        std::vector<double> features;  // [sample][view][d], views in absolute heading order
    };

    ObservationModel(const PoseGraph& graph, int d, NoiseParams noise);

    int d() const { return d_; }
    int observation_dim() const { return kViews * d_; }
    double sigma_pos() const { return noise_.sigma_pos; }
    double sigma_rot() const { return noise_.sigma_rot; }
    bool stochastic() const { return noise_.stochastic; }
    double spacing() const { return spacing_; }
    int num_nodes() const { return static_cast<int>(node_features_.size() / (kViews * d_)); }

    void set_noise(NoiseParams noise) { noise_ = noise; }

    // View block for one node, absolute orientation. Length d.
    std::span<const double> node_view(NodeId node, int view) const;
    void set_node_view(NodeId node, int view, std::span<const double> values);

    // In-between samples for the undirected edge {a, b}, keyed canonically.
    const std::map<std::pair<NodeId, NodeId>, EdgeSamples>& edge_samples() const {
        return edge_samples_;
    }
    EdgeSamples& edge_samples_mut(NodeId a, NodeId b);

    // Outgoing axes (heading mod 180) with at least one incident edge, per node.
    const std::vector<std::vector<int>>& node_axes() const { return node_axes_; }
    std::optional<NodeId> forward_neighbor(NodeId node, int heading) const;
    int rotation_step() const { return rotation_step_; }

    bool operator==(const ObservationModel& other) const;

  private:
    int d_;
    NoiseParams noise_;
    double spacing_;
    int rotation_step_;
    std::vector<double> node_features_;  // [node][view][d]
    std::map<std::pair<NodeId, NodeId>, EdgeSamples> edge_samples_;
    std::vector<std::vector<int>> node_axes_;
    std::vector<std::array<NodeId, kViews>> neighbors_;
};

// Draws one observation for state (node, heading). Deterministic models
// return the node's views rotated to the agent heading; stochastic models
// first perturb position along an incident corridor axis and rotation by
// gaussian noise, then return the nearest recorded sample under the nearest
// recorded view rotation.
FeatureVector sample_observation(const ObservationModel& model, NodeId node, int heading,
                                 RngStream& rng);

// View rotation only; no rng.
FeatureVector deterministic_observation(const ObservationModel& model, NodeId node, int heading);

// Generates the frozen synthetic encoding for every node and edge of the
// graph. Deterministic in all arguments; Day::validation applies an
// independent day_shift perturbation to every sample.
ObservationModel encode_synthetic(const EncoderSpec& spec, const PoseGraph& graph, uint64_t seed,
                                  Day day, NoiseParams noise = {});

// Loads per-sample features from a manifest written by
// write_feature_manifest (node refs plus edge:<a>:<b>:<k> refs).
ObservationModel ingest_precomputed_features(const PoseGraph& graph, const std::string& manifest_path,
                                             NoiseParams noise = {});

// Loads features recorded along a real traversal: node features come from
// each node's source sample, in-between samples from their arc positions.
ObservationModel ingest_precomputed_features(const PoseGraph& graph, const TraversalRecord& record,
                                             const std::string& manifest_path,
                                             NoiseParams noise = {});

}  // namespace gnav
