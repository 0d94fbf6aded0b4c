#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gnav/errors.hpp"

namespace gnav {

using NodeId = int32_t;
inline constexpr NodeId kNoNode = -1;

// Planar pose. Heading in degrees, a multiple of the graph's rotation step
// after discretization.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    int heading = 0;
};

struct GraphNode {
    Pose pose;
    std::string feature_ref;
};

// One recorded sensory snapshot of a traversal.
struct TraversalSample {
    double t = 0.0;  // seconds
    double x = 0.0;  // meters
    double y = 0.0;
    double heading = 0.0;  // degrees, continuous
    std::string feature_ref;
};

// A single pass through the environment plus the human-declared annotations
// (loop closures and duplicated regions) needed to turn it into a graph.
struct TraversalRecord {
    std::vector<TraversalSample> samples;
    std::vector<std::pair<int, int>> closures;    // sample index pairs
    std::vector<std::pair<int, int>> dup_ranges;  // inclusive sample index intervals
};

// Discretized world model: nodes at fixed spatial intervals, directed edges
// keyed by outgoing heading (forward motion semantics). Immutable once built;
// the mutators exist for construction and for hand-built test graphs.
class PoseGraph {
  public:
    PoseGraph() : PoseGraph(0.1, 90) {}

    PoseGraph(double spacing, int rotation_step);

    NodeId add_node(Pose pose, std::string feature_ref);

    // First write wins: re-adding an edge for an occupied (node, heading)
    // slot is ignored. Endpoints must exist.
    void add_edge(NodeId from, int heading, NodeId to);

    // Forward neighbor for the given heading, or nullopt if the slot is
    // empty. Throws GraphError on an invalid node or heading.
    std::optional<NodeId> neighbor(NodeId node, int heading) const;

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_headings() const { return num_headings_; }
    double spacing() const { return spacing_; }
    int rotation_step() const { return rotation_step_; }

    const GraphNode& node(NodeId id) const;
    const std::vector<GraphNode>& nodes() const { return nodes_; }

    int heading_index(int heading) const;  // throws GraphError if off-grid
    int heading_of_index(int idx) const { return idx * rotation_step_; }

    // Outgoing headings that have an edge, ascending.
    std::vector<int> out_headings(NodeId id) const;
    int out_degree(NodeId id) const;

    // All edges as (from, heading, to), ordered by (from, heading).
    std::vector<std::tuple<NodeId, int, NodeId>> edges() const;

    bool connected() const;  // undirected reachability over all edges

    bool operator==(const PoseGraph& other) const;

  private:
    double spacing_;
    int rotation_step_;
    int num_headings_;
    std::vector<GraphNode> nodes_;
    std::vector<NodeId> edges_;  // [node * num_headings_ + heading_index], kNoNode if absent
};

// Normalizes a heading in degrees to [0, 360).
int normalize_heading(int heading);
double normalize_heading(double heading);

// Nearest multiple of `step` in [0, 360).
int discretize_heading(double heading, int step);

// --- build ----------------------------------------------------------------

// Discretizes a traversal into a pose graph: nodes at arc-length intervals of
// `spacing`, temporal-adjacency edges in both travel directions, declared
// loop closures merged (when coincident) or bridged with edges (when within
// closure_slack * spacing), declared duplicate ranges merged onto the earlier
// pass. The result must come out connected.
PoseGraph build_pose_graph(const TraversalRecord& record, double spacing, int rotation_step,
                           double closure_slack = 1.5);

// Construction bookkeeping needed to attach per-sample features to the built
// graph (see ObservationModel ingestion).
struct BuildInfo {
    std::vector<double> sample_arc;   // arc-length position of each sample
    std::vector<double> node_arc;     // arc-length position of each surviving node, by pre-merge order
    std::vector<NodeId> node_of_raw;  // raw resampled node index -> final NodeId
    int raw_node_count = 0;
};

PoseGraph build_pose_graph(const TraversalRecord& record, double spacing, int rotation_step,
                           double closure_slack, BuildInfo* info);

// --- analysis ---------------------------------------------------------------

// Maximum over (node, heading) start states and goal nodes of the minimum
// action count (rotations and forward moves both cost one step) to stand on
// the goal node, minimized over arrival headings. Throws on a disconnected
// graph.
int graph_diameter_steps(const PoseGraph& graph);

// Fraction of nodes where an optimal policy may need to rotate: nodes with
// outgoing edges on >= 2 distinct axes, plus dead ends (single outgoing
// heading).
double intersection_fraction(const PoseGraph& graph);

bool is_intersection_node(const PoseGraph& graph, NodeId id);

// Nodes with outgoing edges on >= 2 distinct axes (dead ends excluded).
// Monotone under edge insertion.
int count_branching_nodes(const PoseGraph& graph);

// --- validation alignment ---------------------------------------------------

struct AlignmentMap {
    std::vector<int> sample_for_node;  // train NodeId -> validation sample index
    std::vector<double> residual;      // meters
};

// Maps every train node to the nearest-position validation sample. Throws
// GraphError listing the offending nodes if any residual exceeds `tolerance`.
AlignmentMap align_validation(const PoseGraph& train, const TraversalRecord& val, double tolerance);

// --- synthetic environments ---------------------------------------------------

// Desk-scale substitutes for a robot recording. Every layout emits a
// traversal record that rebuilds to the returned graph exactly.
struct LayoutSpec {
    std::string layout = "grid";  // corridor | grid | plus | loop | comb
    int length = 11;              // corridor node count / loop side node count
    int rows = 6, cols = 6;       // grid
    int arm = 5;                  // plus arm length (nodes beyond the center)
    int spine = 140, teeth = 9, tooth_len = 48, tooth_gap = 16, tooth_first = 3;  // comb
    double spacing = 0.1;
    int rotation_step = 90;
    double jitter = 0.0;  // per-sample position noise std (meters), seeded
};

std::pair<PoseGraph, TraversalRecord> generate_synthetic_environment(const LayoutSpec& spec,
                                                                     uint64_t seed);

// An office-sized comb: ~572 nodes, diameter ~227 action steps.
LayoutSpec paper_scale_layout();

// Re-emits the record with fresh position jitter. Used to synthesize a
// validation traversal of the same workspace.
TraversalRecord jitter_record(const TraversalRecord& record, double jitter_std, uint64_t seed);

}  // namespace gnav
