#include "gnav/pose_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include "gnav/rng.hpp"

namespace gnav {

namespace {

double dist2(const Pose& a, const Pose& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

double dist(const Pose& a, const Pose& b) { return std::sqrt(dist2(a, b)); }

}  // namespace

int normalize_heading(int heading) {
    int h = heading % 360;
    if (h < 0) h += 360;
    return h;
}

double normalize_heading(double heading) {
    double h = std::fmod(heading, 360.0);
    if (h < 0) h += 360.0;
    return h;
}

int discretize_heading(double heading, int step) {
    const double h = normalize_heading(heading);
    const long k = std::lround(h / step);
    return normalize_heading(static_cast<int>(k) * step);
}

PoseGraph::PoseGraph(double spacing, int rotation_step)
    : spacing_(spacing), rotation_step_(rotation_step) {
    if (spacing <= 0.0) throw GraphError("pose graph spacing must be positive");
    if (rotation_step <= 0 || 360 % rotation_step != 0 || 180 % rotation_step != 0)
        throw GraphError("rotation step must divide 180 and 360");
    num_headings_ = 360 / rotation_step;
}

NodeId PoseGraph::add_node(Pose pose, std::string feature_ref) {
    pose.heading = normalize_heading(pose.heading);
    if (pose.heading % rotation_step_ != 0) throw GraphError("node heading off the rotation grid");
    nodes_.push_back({pose, std::move(feature_ref)});
    edges_.resize(nodes_.size() * num_headings_, kNoNode);
    return static_cast<NodeId>(nodes_.size()) - 1;
}

int PoseGraph::heading_index(int heading) const {
    const int h = normalize_heading(heading);
    if (h % rotation_step_ != 0) {
        throw GraphError("heading " + std::to_string(heading) + " is off the rotation grid");
    }
    return h / rotation_step_;
}

void PoseGraph::add_edge(NodeId from, int heading, NodeId to) {
    if (from < 0 || from >= num_nodes() || to < 0 || to >= num_nodes())
        throw GraphError("edge endpoint does not exist");
    NodeId& slot = edges_[static_cast<size_t>(from) * num_headings_ + heading_index(heading)];
    if (slot == kNoNode) slot = to;
}

std::optional<NodeId> PoseGraph::neighbor(NodeId node, int heading) const {
    if (node < 0 || node >= num_nodes())
        throw GraphError("node " + std::to_string(node) + " does not exist");
    const NodeId to = edges_[static_cast<size_t>(node) * num_headings_ + heading_index(heading)];
    if (to == kNoNode) return std::nullopt;
    return to;
}

const GraphNode& PoseGraph::node(NodeId id) const {
    if (id < 0 || id >= num_nodes())
        throw GraphError("node " + std::to_string(id) + " does not exist");
    return nodes_[id];
}

std::vector<int> PoseGraph::out_headings(NodeId id) const {
    std::vector<int> out;
    for (int h = 0; h < num_headings_; ++h) {
        if (edges_[static_cast<size_t>(id) * num_headings_ + h] != kNoNode)
            out.push_back(h * rotation_step_);
    }
    return out;
}

int PoseGraph::out_degree(NodeId id) const { return static_cast<int>(out_headings(id).size()); }

std::vector<std::tuple<NodeId, int, NodeId>> PoseGraph::edges() const {
    std::vector<std::tuple<NodeId, int, NodeId>> out;
    for (NodeId n = 0; n < num_nodes(); ++n) {
        for (int h = 0; h < num_headings_; ++h) {
            const NodeId to = edges_[static_cast<size_t>(n) * num_headings_ + h];
            if (to != kNoNode) out.emplace_back(n, h * rotation_step_, to);
        }
    }
    return out;
}

bool PoseGraph::connected() const {
    const int n = num_nodes();
    if (n <= 1) return true;
    std::vector<std::vector<NodeId>> adj(n);
    for (const auto& [a, h, b] : edges()) {
        (void)h;
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> seen(n, 0);
    std::deque<NodeId> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty()) {
        const NodeId cur = queue.front();
        queue.pop_front();
        for (NodeId nb : adj[cur]) {
            if (!seen[nb]) {
                seen[nb] = 1;
                ++count;
                queue.push_back(nb);
            }
        }
    }
    return count == n;
}

bool PoseGraph::operator==(const PoseGraph& other) const {
    if (spacing_ != other.spacing_ || rotation_step_ != other.rotation_step_) return false;
    if (nodes_.size() != other.nodes_.size() || edges_ != other.edges_) return false;
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const GraphNode& a = nodes_[i];
        const GraphNode& b = other.nodes_[i];
        if (a.pose.x != b.pose.x || a.pose.y != b.pose.y || a.pose.heading != b.pose.heading ||
            a.feature_ref != b.feature_ref)
            return false;
    }
    return true;
}

// --- build ----------------------------------------------------------------

namespace {

struct RawNode {
    Pose pose;
    double arc = 0.0;
    int source_sample = 0;  // nearest recorded sample
};

// Resample the traversal polyline at arc-length intervals of `spacing`.
std::vector<RawNode> resample(const std::vector<TraversalSample>& samples, double spacing,
                              int rotation_step) {
    std::vector<double> arc(samples.size(), 0.0);
    for (size_t i = 1; i < samples.size(); ++i) {
        const double dx = samples[i].x - samples[i - 1].x;
        const double dy = samples[i].y - samples[i - 1].y;
        arc[i] = arc[i - 1] + std::hypot(dx, dy);
    }
    const double total = arc.back();
    // 1e-6 absorbs accumulated rounding in the arc sums; a node that misses
    // the end of the traversal by under a micro-spacing is still placed
    const int count = static_cast<int>(std::floor(total / spacing + 1e-6)) + 1;

    std::vector<RawNode> raw(count);
    size_t seg = 0;  // segment index: node arc position lies in [arc[seg], arc[seg+1]]
    for (int k = 0; k < count; ++k) {
        const double s = std::min(k * spacing, total);
        while (seg + 2 < samples.size() && arc[seg + 1] < s) ++seg;
        RawNode& node = raw[k];
        node.arc = s;
        if (samples.size() == 1) {
            node.pose.x = samples[0].x;
            node.pose.y = samples[0].y;
        } else {
            const double seg_len = arc[seg + 1] - arc[seg];
            const double t = seg_len > 0 ? (s - arc[seg]) / seg_len : 0.0;
            node.pose.x = samples[seg].x + t * (samples[seg + 1].x - samples[seg].x);
            node.pose.y = samples[seg].y + t * (samples[seg + 1].y - samples[seg].y);
        }
        // nearest recorded sample by arc distance, earlier on ties
        size_t best = seg;
        if (seg + 1 < samples.size() && std::abs(arc[seg + 1] - s) < std::abs(arc[seg] - s))
            best = seg + 1;
        node.source_sample = static_cast<int>(best);
        node.pose.heading = discretize_heading(samples[best].heading, rotation_step);
    }
    return raw;
}

class UnionFind {
  public:
    explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Smaller index becomes the representative ("discard the later copy").
    void merge(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);
        parent_[b] = a;
    }

  private:
    std::vector<int> parent_;
};

}  // namespace

PoseGraph build_pose_graph(const TraversalRecord& record, double spacing, int rotation_step,
                           double closure_slack) {
    return build_pose_graph(record, spacing, rotation_step, closure_slack, nullptr);
}

PoseGraph build_pose_graph(const TraversalRecord& record, double spacing, int rotation_step,
                           double closure_slack, BuildInfo* info) {
    if (record.samples.empty()) throw GraphError("traversal record is empty");
    if (spacing <= 0.0) throw GraphError("spacing must be positive");
    for (size_t i = 1; i < record.samples.size(); ++i) {
        if (record.samples[i].t < record.samples[i - 1].t)
            throw GraphError("traversal samples out of timestamp order at index " +
                             std::to_string(i));
    }
    const int n_samples = static_cast<int>(record.samples.size());
    auto check_index = [&](int i, const char* what) {
        if (i < 0 || i >= n_samples)
            throw GraphError(std::string(what) + " sample index " + std::to_string(i) +
                             " out of range");
    };
    for (const auto& [a, b] : record.closures) {
        check_index(a, "closure");
        check_index(b, "closure");
    }
    for (const auto& [a, b] : record.dup_ranges) {
        check_index(a, "dup");
        check_index(b, "dup");
        if (a > b) throw GraphError("dup range with start after end");
    }

    std::vector<RawNode> raw = resample(record.samples, spacing, rotation_step);
    const int n_raw = static_cast<int>(raw.size());

    // arc position of each sample, for closure/dup lookups and feature ingestion
    std::vector<double> sample_arc(n_samples, 0.0);
    for (int i = 1; i < n_samples; ++i) {
        const double dx = record.samples[i].x - record.samples[i - 1].x;
        const double dy = record.samples[i].y - record.samples[i - 1].y;
        sample_arc[i] = sample_arc[i - 1] + std::hypot(dx, dy);
    }
    auto raw_node_of_sample = [&](int sample) {
        const int k = static_cast<int>(std::lround(sample_arc[sample] / spacing));
        return std::clamp(k, 0, n_raw - 1);
    };

    // temporal adjacency between consecutive raw nodes, both travel directions
    std::vector<std::tuple<int, int, int>> raw_edges;  // (raw_from, heading, raw_to)
    for (int k = 0; k + 1 < n_raw; ++k) {
        const Pose& a = raw[k].pose;
        const Pose& b = raw[k + 1].pose;
        if (dist(a, b) < spacing * 0.25) continue;  // switchback fold, no spatial motion
        const int h = discretize_heading(std::atan2(b.y - a.y, b.x - a.x) * 180.0 / M_PI,
                                         rotation_step);
        raw_edges.emplace_back(k, h, k + 1);
        raw_edges.emplace_back(k + 1, normalize_heading(h + 180), k);
    }

    UnionFind uf(n_raw);

    // duplicate ranges: later copies collapse onto the nearest surviving node
    std::vector<char> is_dup(n_raw, 0);
    for (int k = 0; k < n_raw; ++k) {
        for (const auto& [lo, hi] : record.dup_ranges) {
            if (raw[k].source_sample >= lo && raw[k].source_sample <= hi) {
                is_dup[k] = 1;
                break;
            }
        }
    }
    for (int k = 0; k < n_raw; ++k) {
        if (!is_dup[k]) continue;
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (int m = 0; m < n_raw; ++m) {
            if (is_dup[m]) continue;
            const double d = dist2(raw[k].pose, raw[m].pose);
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        if (best < 0 || std::sqrt(best_d) > spacing * closure_slack) {
            throw GraphError("declared duplicate node at sample " +
                             std::to_string(raw[k].source_sample) +
                             " has no nearby earlier pass to merge into");
        }
        uf.merge(k, best);
    }

    // loop closures: coincident endpoints merge, nearby endpoints get an edge
    for (const auto& [ia, ib] : record.closures) {
        const int ka = raw_node_of_sample(ia);
        const int kb = raw_node_of_sample(ib);
        if (ka == kb) continue;
        const double d = dist(raw[ka].pose, raw[kb].pose);
        if (d > spacing * closure_slack) {
            std::ostringstream msg;
            msg << "closure between samples " << ia << " and " << ib << " spans " << d
                << " m, beyond " << closure_slack << " x spacing";
            throw GraphError(msg.str());
        }
        if (d < spacing * 0.5) {
            uf.merge(ka, kb);
        } else {
            const int h = discretize_heading(
                std::atan2(raw[kb].pose.y - raw[ka].pose.y, raw[kb].pose.x - raw[ka].pose.x) *
                    180.0 / M_PI,
                rotation_step);
            raw_edges.emplace_back(ka, h, kb);
            raw_edges.emplace_back(kb, normalize_heading(h + 180), ka);
        }
    }

    // compact surviving nodes into dense ids, preserving traversal order
    std::vector<NodeId> final_id(n_raw, kNoNode);
    PoseGraph graph(spacing, rotation_step);
    std::vector<double> node_arc;
    for (int k = 0; k < n_raw; ++k) {
        if (uf.find(k) != k) continue;
        final_id[k] = graph.add_node(raw[k].pose, record.samples[raw[k].source_sample].feature_ref);
        node_arc.push_back(raw[k].arc);
    }
    for (int k = 0; k < n_raw; ++k) final_id[k] = final_id[uf.find(k)];

    for (const auto& [a, h, b] : raw_edges) {
        const NodeId fa = final_id[a];
        const NodeId fb = final_id[b];
        if (fa == fb) continue;
        graph.add_edge(fa, h, fb);
    }

    // distinct surviving poses must stay at least half a spacing apart;
    // anything closer is an undeclared duplicate
    for (NodeId a = 0; a < graph.num_nodes(); ++a) {
        for (NodeId b = a + 1; b < graph.num_nodes(); ++b) {
            if (dist(graph.node(a).pose, graph.node(b).pose) < spacing * 0.5) {
                throw GraphError("nodes " + std::to_string(a) + " and " + std::to_string(b) +
                                 " are closer than spacing/2; declare a closure or dup range");
            }
        }
    }

    if (!graph.connected()) throw GraphError("pose graph is disconnected after dedup");

    if (info) {
        info->sample_arc = std::move(sample_arc);
        info->node_arc = std::move(node_arc);
        info->node_of_raw = std::move(final_id);
        info->raw_node_count = n_raw;
    }
    return graph;
}

// --- analysis ---------------------------------------------------------------

namespace {

// Predecessor lists of the (node, heading) action graph: turns plus reversed
// forward edges.
struct ReverseStateGraph {
    int n_nodes = 0;
    int n_headings = 0;
    std::vector<std::vector<int>> forward_pred;  // state id of (m,h) with edge (m,h)->node, per (node,h)

    explicit ReverseStateGraph(const PoseGraph& g)
        : n_nodes(g.num_nodes()), n_headings(g.num_headings()),
          forward_pred(static_cast<size_t>(n_nodes) * n_headings) {
        for (const auto& [from, heading, to] : g.edges()) {
            const int h = heading / g.rotation_step();
            forward_pred[static_cast<size_t>(to) * n_headings + h].push_back(from * n_headings + h);
        }
    }

    int state(NodeId node, int h_idx) const { return node * n_headings + h_idx; }
    int states() const { return n_nodes * n_headings; }
};

// BFS over reversed actions from the given source states. dist[s] = minimum
// action count from state s to any source.
std::vector<int> reverse_bfs(const ReverseStateGraph& rg, const std::vector<std::pair<int, int>>& sources) {
    std::vector<int> dist(rg.states(), -1);
    std::deque<int> queue;
    for (const auto& [s, d] : sources) {
        if (dist[s] == -1 || dist[s] > d) {
            dist[s] = d;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        const int node = s / rg.n_headings;
        const int h = s % rg.n_headings;
        const int d = dist[s] + 1;
        auto relax = [&](int p) {
            if (dist[p] == -1) {
                dist[p] = d;
                queue.push_back(p);
            }
        };
        // predecessors by rotation: a turn from (node, h+-1) lands in (node, h)
        relax(rg.state(node, (h + 1) % rg.n_headings));
        relax(rg.state(node, (h + rg.n_headings - 1) % rg.n_headings));
        for (int p : rg.forward_pred[s]) relax(p);
    }
    return dist;
}

}  // namespace

int graph_diameter_steps(const PoseGraph& graph) {
    if (!graph.connected()) throw GraphError("diameter of a disconnected graph");
    if (graph.num_nodes() == 1) return 0;
    const ReverseStateGraph rg(graph);
    int diameter = 0;
    for (NodeId goal = 0; goal < graph.num_nodes(); ++goal) {
        std::vector<std::pair<int, int>> sources;
        for (int h = 0; h < rg.n_headings; ++h) sources.emplace_back(rg.state(goal, h), 0);
        const std::vector<int> dist = reverse_bfs(rg, sources);
        for (int s = 0; s < rg.states(); ++s) {
            if (dist[s] < 0) throw GraphError("goal node unreachable from some state");
            diameter = std::max(diameter, dist[s]);
        }
    }
    return diameter;
}

bool is_intersection_node(const PoseGraph& graph, NodeId id) {
    const std::vector<int> headings = graph.out_headings(id);
    if (headings.size() == 1) return true;  // dead end: turn-around required
    int axes = 0;
    bool axis_seen[2] = {false, false};
    for (int h : headings) {
        const int axis = (h % 180) == 0 ? 0 : 1;
        if (!axis_seen[axis]) {
            axis_seen[axis] = true;
            ++axes;
        }
    }
    return axes >= 2;
}

namespace {

int count_intersections(const PoseGraph& graph) {
    int count = 0;
    for (NodeId n = 0; n < graph.num_nodes(); ++n) count += is_intersection_node(graph, n);
    return count;
}

}  // namespace

double intersection_fraction(const PoseGraph& graph) {
    if (graph.num_nodes() == 0) return 0.0;
    return static_cast<double>(count_intersections(graph)) / graph.num_nodes();
}

int count_branching_nodes(const PoseGraph& graph) {
    int count = 0;
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        bool axis_seen[2] = {false, false};
        for (int h : graph.out_headings(n)) axis_seen[(h % 180) == 0 ? 0 : 1] = true;
        count += axis_seen[0] && axis_seen[1];
    }
    return count;
}

// --- validation alignment ---------------------------------------------------

AlignmentMap align_validation(const PoseGraph& train, const TraversalRecord& val,
                              double tolerance) {
    if (tolerance <= 0.0) throw GraphError("alignment tolerance must be positive");
    if (val.samples.empty()) throw GraphError("validation record is empty");
    AlignmentMap map;
    map.sample_for_node.resize(train.num_nodes(), -1);
    map.residual.resize(train.num_nodes(), 0.0);
    std::vector<NodeId> unmatched;
    for (NodeId n = 0; n < train.num_nodes(); ++n) {
        const Pose& p = train.node(n).pose;
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (size_t i = 0; i < val.samples.size(); ++i) {
            const double dx = val.samples[i].x - p.x;
            const double dy = val.samples[i].y - p.y;
            const double d = dx * dx + dy * dy;
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        map.sample_for_node[n] = best;
        map.residual[n] = std::sqrt(best_d);
        if (map.residual[n] > tolerance) unmatched.push_back(n);
    }
    if (!unmatched.empty()) {
        std::ostringstream msg;
        msg << "alignment failed, " << unmatched.size() << " node(s) beyond " << tolerance
            << " m:";
        for (NodeId n : unmatched) msg << ' ' << n;
        throw GraphError(msg.str());
    }
    return map;
}

// --- synthetic environments ---------------------------------------------------

namespace {

struct WalkBuilder {
    std::vector<TraversalSample> samples;
    std::vector<std::pair<int, int>> closures;
    std::vector<std::pair<int, int>> dup_ranges;
    double step;

    explicit WalkBuilder(double spacing) : step(spacing) {}

    int emit(double x, double y, double heading) {
        TraversalSample s;
        s.t = static_cast<double>(samples.size());
        s.x = x;
        s.y = y;
        s.heading = heading;
        s.feature_ref = "s" + std::to_string(samples.size());
        samples.push_back(std::move(s));
        return static_cast<int>(samples.size()) - 1;
    }

    // Walk in a straight line from the last sample, emitting `count` new
    // samples one step apart.
    void advance(int count, double dir_deg) {
        const double rad = dir_deg * M_PI / 180.0;
        double x = samples.back().x;
        double y = samples.back().y;
        for (int i = 0; i < count; ++i) {
            x += step * std::cos(rad);
            y += step * std::sin(rad);
            emit(x, y, dir_deg);
        }
    }

    TraversalRecord record() const { return {samples, closures, dup_ranges}; }
};

TraversalRecord corridor_record(const LayoutSpec& spec) {
    if (spec.length < 1) throw ConfigError("corridor length must be >= 1");
    WalkBuilder walk(spec.spacing);
    walk.emit(0.0, 0.0, 0.0);
    walk.advance(spec.length - 1, 0.0);
    return walk.record();
}

TraversalRecord grid_record(const LayoutSpec& spec) {
    if (spec.rows < 1 || spec.cols < 1) throw ConfigError("grid must have positive dimensions");
    WalkBuilder walk(spec.spacing);
    // boustrophedon over rows; missing vertical adjacencies become closures
    walk.emit(0.0, 0.0, 0.0);
    std::vector<std::vector<int>> sample_at(spec.rows, std::vector<int>(spec.cols, -1));
    sample_at[0][0] = 0;
    for (int r = 0; r < spec.rows; ++r) {
        const bool rightward = (r % 2 == 0);
        for (int c = 1; c < spec.cols; ++c) {
            walk.advance(1, rightward ? 0.0 : 180.0);
            const int col = rightward ? c : spec.cols - 1 - c;
            sample_at[r][col] = static_cast<int>(walk.samples.size()) - 1;
        }
        if (r + 1 < spec.rows) {
            walk.advance(1, 90.0);
            const int col = rightward ? spec.cols - 1 : 0;
            sample_at[r + 1][col] = static_cast<int>(walk.samples.size()) - 1;
        }
    }
    for (int r = 0; r + 1 < spec.rows; ++r) {
        const int walked_col = (r % 2 == 0) ? spec.cols - 1 : 0;
        for (int c = 0; c < spec.cols; ++c) {
            if (c == walked_col) continue;
            walk.closures.emplace_back(sample_at[r][c], sample_at[r + 1][c]);
        }
    }
    return walk.record();
}

TraversalRecord plus_record(const LayoutSpec& spec) {
    if (spec.arm < 1) throw ConfigError("plus arm length must be >= 1");
    const int arm = spec.arm;
    WalkBuilder walk(spec.spacing);
    // west tip -> east tip, then out-and-back on the north and south arms
    walk.emit(-arm * spec.spacing, 0.0, 0.0);
    walk.advance(2 * arm, 0.0);
    auto out_and_back = [&](double out_dir) {
        walk.advance(arm, out_dir);
        const int back_start = static_cast<int>(walk.samples.size());
        walk.advance(arm, normalize_heading(out_dir + 180.0));
        walk.dup_ranges.emplace_back(back_start, static_cast<int>(walk.samples.size()) - 1);
    };
    // return to center first (duplicate of the east half of the spine)
    {
        const int back_start = static_cast<int>(walk.samples.size());
        walk.advance(arm, 180.0);
        walk.dup_ranges.emplace_back(back_start, static_cast<int>(walk.samples.size()) - 1);
    }
    out_and_back(90.0);
    out_and_back(270.0);
    return walk.record();
}

TraversalRecord loop_record(const LayoutSpec& spec) {
    if (spec.length < 2) throw ConfigError("loop side must be >= 2 nodes");
    const int side = spec.length - 1;  // steps per side
    WalkBuilder walk(spec.spacing);
    walk.emit(0.0, 0.0, 0.0);
    walk.advance(side, 0.0);
    walk.advance(side, 90.0);
    walk.advance(side, 180.0);
    walk.advance(side, 270.0);  // re-enters the start corner
    walk.closures.emplace_back(0, static_cast<int>(walk.samples.size()) - 1);
    return walk.record();
}

TraversalRecord comb_record(const LayoutSpec& spec) {
    if (spec.spine < 2 || spec.teeth < 0 || spec.tooth_len < 0)
        throw ConfigError("malformed comb layout");
    WalkBuilder walk(spec.spacing);
    walk.emit(0.0, 0.0, 0.0);
    int at = 0;  // current spine column
    for (int j = 0; j < spec.teeth; ++j) {
        const int attach = spec.tooth_first + j * spec.tooth_gap;
        if (attach <= at || attach >= spec.spine)
            throw ConfigError("comb tooth attachment out of range");
        walk.advance(attach - at, 0.0);
        at = attach;
        walk.advance(spec.tooth_len, 90.0);
        const int back_start = static_cast<int>(walk.samples.size());
        walk.advance(spec.tooth_len, 270.0);
        walk.dup_ranges.emplace_back(back_start, static_cast<int>(walk.samples.size()) - 1);
    }
    walk.advance(spec.spine - 1 - at, 0.0);
    return walk.record();
}

}  // namespace

LayoutSpec paper_scale_layout() {
    LayoutSpec spec;
    spec.layout = "comb";
    spec.spine = 140;
    spec.teeth = 9;
    spec.tooth_len = 48;
    spec.tooth_gap = 16;
    spec.tooth_first = 3;
    return spec;
}

TraversalRecord jitter_record(const TraversalRecord& record, double jitter_std, uint64_t seed) {
    TraversalRecord out = record;
    RngStream rng(mix_key(seed, 0x71772));
    for (auto& s : out.samples) {
        s.x += rng.normal(0.0, jitter_std);
        s.y += rng.normal(0.0, jitter_std);
    }
    return out;
}

std::pair<PoseGraph, TraversalRecord> generate_synthetic_environment(const LayoutSpec& spec,
                                                                     uint64_t seed) {
    TraversalRecord record;
    if (spec.layout == "corridor") {
        record = corridor_record(spec);
    } else if (spec.layout == "grid") {
        record = grid_record(spec);
    } else if (spec.layout == "plus") {
        record = plus_record(spec);
    } else if (spec.layout == "loop") {
        record = loop_record(spec);
    } else if (spec.layout == "comb") {
        record = comb_record(spec);
    } else {
        throw ConfigError("unknown layout '" + spec.layout + "'");
    }
    if (spec.jitter > 0.0) record = jitter_record(record, spec.jitter, seed);
    PoseGraph graph = build_pose_graph(record, spec.spacing, spec.rotation_step);
    return {std::move(graph), std::move(record)};
}

}  // namespace gnav
