#include "gnav/observation.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "gnav/formats.hpp"

namespace gnav {

ObservationModel::ObservationModel(const PoseGraph& graph, int d, NoiseParams noise)
    : d_(d), noise_(noise), spacing_(graph.spacing()), rotation_step_(graph.rotation_step()) {
    if (d < 1) throw ConfigError("feature dimension must be >= 1");
    if (graph.num_headings() != kViews)
        throw ConfigError("observation model requires a 90-degree rotation step (4 views)");
    if (noise.sigma_pos < 0 || noise.sigma_rot < 0)
        throw ConfigError("observation noise stds must be >= 0");
    node_features_.assign(static_cast<size_t>(graph.num_nodes()) * kViews * d_, 0.0);
    node_axes_.resize(graph.num_nodes());
    neighbors_.resize(graph.num_nodes());
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        neighbors_[n].fill(kNoNode);
        for (int h : graph.out_headings(n)) {
            neighbors_[n][h / rotation_step_] = *graph.neighbor(n, h);
            const int axis = h % 180;
            auto& axes = node_axes_[n];
            if (std::find(axes.begin(), axes.end(), axis) == axes.end()) axes.push_back(axis);
        }
        std::sort(node_axes_[n].begin(), node_axes_[n].end());
    }
}

std::span<const double> ObservationModel::node_view(NodeId node, int view) const {
    return {node_features_.data() + (static_cast<size_t>(node) * kViews + view) * d_,
            static_cast<size_t>(d_)};
}

void ObservationModel::set_node_view(NodeId node, int view, std::span<const double> values) {
    if (static_cast<int>(values.size()) != d_) throw ConfigError("view feature length mismatch");
    std::copy(values.begin(), values.end(),
              node_features_.begin() + (static_cast<size_t>(node) * kViews + view) * d_);
}

ObservationModel::EdgeSamples& ObservationModel::edge_samples_mut(NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return edge_samples_[{a, b}];
}

std::optional<NodeId> ObservationModel::forward_neighbor(NodeId node, int heading) const {
    const NodeId to = neighbors_[node][normalize_heading(heading) / rotation_step_];
    if (to == kNoNode) return std::nullopt;
    return to;
}

bool ObservationModel::operator==(const ObservationModel& other) const {
    if (d_ != other.d_ || spacing_ != other.spacing_ || rotation_step_ != other.rotation_step_)
        return false;
    if (noise_.sigma_pos != other.noise_.sigma_pos || noise_.sigma_rot != other.noise_.sigma_rot ||
        noise_.stochastic != other.noise_.stochastic)
        return false;
    if (node_features_ != other.node_features_) return false;
    if (edge_samples_.size() != other.edge_samples_.size()) return false;
    auto it = other.edge_samples_.begin();
    for (const auto& [key, samples] : edge_samples_) {
        if (it->first != key || it->second.offsets != samples.offsets ||
            it->second.features != samples.features)
            return false;
        ++it;
    }
    return true;
}

namespace {

void gather_views(std::span<const double> block, int d, int start_view, FeatureVector& out) {
    out.resize(static_cast<size_t>(kViews) * d);
    for (int v = 0; v < kViews; ++v) {
        const int src = (start_view + v) % kViews;
        std::copy_n(block.data() + static_cast<size_t>(src) * d, d,
                    out.begin() + static_cast<size_t>(v) * d);
    }
}

}  // namespace

FeatureVector deterministic_observation(const ObservationModel& model, NodeId node, int heading) {
    if (node < 0 || node >= model.num_nodes())
        throw GraphError("observation for nonexistent node " + std::to_string(node));
    const int start = normalize_heading(heading) / model.rotation_step();
    std::span<const double> block{
        model.node_view(node, 0).data(), static_cast<size_t>(kViews) * model.d()};
    FeatureVector out;
    gather_views(block, model.d(), start, out);
    return out;
}

FeatureVector sample_observation(const ObservationModel& model, NodeId node, int heading,
                                 RngStream& rng) {
    if (!model.stochastic()) return deterministic_observation(model, node, heading);
    if (node < 0 || node >= model.num_nodes())
        throw GraphError("observation for nonexistent node " + std::to_string(node));

    // corridor axis for the positional perturbation
    const std::vector<int>& axes = model.node_axes()[node];
    int axis = -1;
    if (axes.size() >= 2) {
        axis = axes[rng.uniform_int(static_cast<uint32_t>(axes.size()))];
    } else if (axes.size() == 1) {
        axis = axes[0];
    }
    const double dp = rng.normal(0.0, model.sigma_pos());
    const double dh = rng.normal(0.0, model.sigma_rot());

    // nearest recorded sample to the perturbed position: the node itself or an
    // in-between sample on the edge in the perturbed direction
    std::span<const double> block{model.node_view(node, 0).data(),
                                  static_cast<size_t>(kViews) * model.d()};
    if (axis >= 0) {
        const int dir = dp >= 0 ? axis : axis + 180;
        const double off = std::abs(dp);
        if (auto nbr = model.forward_neighbor(node, dir)) {
            const NodeId lo = std::min(node, *nbr);
            const NodeId hi = std::max(node, *nbr);
            const auto it = model.edge_samples().find({lo, hi});
            if (it != model.edge_samples().end()) {
                double best = off;  // distance to the node sample at offset 0
                int best_j = -1;
                for (size_t j = 0; j < it->second.offsets.size(); ++j) {
                    const double o =
                        node == lo ? it->second.offsets[j] : model.spacing() - it->second.offsets[j];
                    const double dist = std::abs(off - o);
                    if (dist < best) {
                        best = dist;
                        best_j = static_cast<int>(j);
                    }
                }
                if (best_j >= 0) {
                    block = {it->second.features.data() +
                                 static_cast<size_t>(best_j) * kViews * model.d(),
                             static_cast<size_t>(kViews) * model.d()};
                }
            }
        }
    }

    const int shift = static_cast<int>(std::lround(dh / model.rotation_step()));
    const int start =
        ((normalize_heading(heading) / model.rotation_step() + shift) % kViews + kViews) % kViews;
    FeatureVector out;
    gather_views(block, model.d(), start, out);
    return out;
}

// --- synthetic encoder -------------------------------------------------------

namespace {

void fill_normal(uint64_t key, double scale, std::span<double> out, bool accumulate) {
    RngStream rng(key);
    for (double& x : out) {
        const double v = scale * rng.normal();
        x = accumulate ? x + v : v;
    }
}

}  // namespace

ObservationModel encode_synthetic(const EncoderSpec& spec, const PoseGraph& graph, uint64_t seed,
                                  Day day, NoiseParams noise) {
    if (spec.d < 1) throw ConfigError("encoder dimension must be >= 1");
    if (spec.view_noise < 0 || spec.day_shift < 0)
        throw ConfigError("encoder noise stds must be >= 0");

    std::vector<NodeId> base_of(graph.num_nodes());
    for (NodeId n = 0; n < graph.num_nodes(); ++n) base_of[n] = n;
    for (const auto& [a, b] : spec.aliasing_pairs) {
        if (a < 0 || a >= graph.num_nodes() || b < 0 || b >= graph.num_nodes())
            throw ConfigError("aliasing pair references missing node");
        base_of[b] = base_of[a];
    }

    ObservationModel model(graph, spec.d, noise);
    std::vector<double> view(spec.d);
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        for (int v = 0; v < kViews; ++v) {
            fill_normal(mix_key(seed, 1, static_cast<uint64_t>(base_of[n]), v), 1.0, view, false);
            if (spec.view_noise > 0)
                fill_normal(mix_key(seed, 2, static_cast<uint64_t>(n) * kViews + v),
                            spec.view_noise, view, true);
            if (day == Day::validation && spec.day_shift > 0)
                fill_normal(mix_key(seed, 3, static_cast<uint64_t>(n) * kViews + v), spec.day_shift,
                            view, true);
            model.set_node_view(n, v, view);
        }
    }

    // in-between samples: linear blends of the endpoint features plus clutter
    int n_samples = 0;
    if (spec.edge_sample_step > 0 && spec.edge_sample_step < graph.spacing())
        n_samples = static_cast<int>(std::lround(graph.spacing() / spec.edge_sample_step)) - 1;
    if (n_samples > 0) {
        for (const auto& [from, heading, to] : graph.edges()) {
            (void)heading;
            const NodeId lo = std::min(from, to);
            const NodeId hi = std::max(from, to);
            auto& samples = model.edge_samples_mut(lo, hi);
            if (!samples.offsets.empty()) continue;
            samples.offsets.resize(n_samples);
            samples.features.resize(static_cast<size_t>(n_samples) * kViews * spec.d);
            for (int k = 0; k < n_samples; ++k) {
                const double offset = (k + 1) * graph.spacing() / (n_samples + 1);
                samples.offsets[k] = offset;
                const double t = offset / graph.spacing();
                for (int v = 0; v < kViews; ++v) {
                    std::span<double> out{samples.features.data() +
                                              (static_cast<size_t>(k) * kViews + v) * spec.d,
                                          static_cast<size_t>(spec.d)};
                    const auto a = model.node_view(lo, v);
                    const auto b = model.node_view(hi, v);
                    for (int j = 0; j < spec.d; ++j) out[j] = (1.0 - t) * a[j] + t * b[j];
                    if (spec.view_noise > 0) {
                        const uint64_t sub = mix_key(static_cast<uint64_t>(lo),
                                                     static_cast<uint64_t>(hi),
                                                     static_cast<uint64_t>(k) * kViews + v);
                        fill_normal(mix_key(seed, 4, sub), spec.view_noise, out, true);
                    }
                }
            }
        }
    }
    return model;
}

// --- precomputed feature ingestion --------------------------------------------

namespace {

void assign_node_features(ObservationModel& model, const PoseGraph& graph,
                          const FeatureManifest& manifest) {
    if (manifest.d != model.d())
        throw ConfigError("manifest dimension " + std::to_string(manifest.d) +
                          " does not match model dimension " + std::to_string(model.d()));
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        const std::string& ref = graph.node(n).feature_ref;
        const auto it = manifest.records.find(ref);
        if (it == manifest.records.end())
            throw ConfigError("manifest is missing feature record '" + ref + "' for node " +
                              std::to_string(n));
        for (int v = 0; v < kViews; ++v)
            model.set_node_view(n, v,
                                {it->second.data() + static_cast<size_t>(v) * model.d(),
                                 static_cast<size_t>(model.d())});
    }
}

}  // namespace

ObservationModel ingest_precomputed_features(const PoseGraph& graph,
                                             const std::string& manifest_path, NoiseParams noise) {
    const FeatureManifest manifest = read_feature_manifest(manifest_path);
    ObservationModel model(graph, manifest.d, noise);
    assign_node_features(model, graph, manifest);

    // edge:<a>:<b>:<k> records carry in-between samples at uniform offsets
    struct Pending {
        int k;
        const std::vector<double>* values;
    };
    std::map<std::pair<NodeId, NodeId>, std::vector<Pending>> pending;
    for (const auto& [ref, values] : manifest.records) {
        if (ref.rfind("edge:", 0) != 0) continue;
        NodeId a = 0, b = 0;
        int k = 0;
        if (std::sscanf(ref.c_str(), "edge:%d:%d:%d", &a, &b, &k) != 3)
            throw ConfigError("malformed edge feature ref '" + ref + "'");
        if (a < 0 || a >= graph.num_nodes() || b < 0 || b >= graph.num_nodes())
            throw ConfigError("edge feature ref '" + ref + "' references missing node");
        pending[{std::min(a, b), std::max(a, b)}].push_back({k, &values});
    }
    for (auto& [key, list] : pending) {
        std::sort(list.begin(), list.end(), [](const Pending& a, const Pending& b) {
            return a.k < b.k;
        });
        auto& samples = model.edge_samples_mut(key.first, key.second);
        const int count = static_cast<int>(list.size());
        samples.offsets.resize(count);
        samples.features.resize(static_cast<size_t>(count) * kViews * model.d());
        for (int j = 0; j < count; ++j) {
            samples.offsets[j] = (j + 1) * model.spacing() / (count + 1);
            std::copy(list[j].values->begin(), list[j].values->end(),
                      samples.features.begin() + static_cast<size_t>(j) * kViews * model.d());
        }
    }
    return model;
}

ObservationModel ingest_precomputed_features(const PoseGraph& graph, const TraversalRecord& record,
                                             const std::string& manifest_path, NoiseParams noise) {
    const FeatureManifest manifest = read_feature_manifest(manifest_path);
    ObservationModel model(graph, manifest.d, noise);
    assign_node_features(model, graph, manifest);

    BuildInfo info;
    build_pose_graph(record, graph.spacing(), graph.rotation_step(), 1.5, &info);

    auto in_dup_range = [&](int sample) {
        for (const auto& [lo, hi] : record.dup_ranges)
            if (sample >= lo && sample <= hi) return true;
        return false;
    };

    struct Collected {
        double offset;
        const std::vector<double>* values;
    };
    std::map<std::pair<NodeId, NodeId>, std::vector<Collected>> collected;
    const double spacing = graph.spacing();
    for (size_t i = 0; i < record.samples.size(); ++i) {
        if (in_dup_range(static_cast<int>(i))) continue;  // later copies are discarded
        const double arc = info.sample_arc[i];
        const double nearest = std::lround(arc / spacing) * spacing;
        if (std::abs(arc - nearest) < spacing * 1e-6) continue;  // node sample, handled by ref
        const int klo = static_cast<int>(std::floor(arc / spacing));
        if (klo < 0 || klo + 1 >= info.raw_node_count) continue;
        const NodeId a = info.node_of_raw[klo];
        const NodeId b = info.node_of_raw[klo + 1];
        if (a == b) continue;
        const auto it = manifest.records.find(record.samples[i].feature_ref);
        if (it == manifest.records.end())
            throw ConfigError("manifest is missing feature record '" +
                              record.samples[i].feature_ref + "'");
        const double off_from_a = arc - klo * spacing;
        const NodeId lo = std::min(a, b);
        collected[{lo, std::max(a, b)}].push_back(
            {a == lo ? off_from_a : spacing - off_from_a, &it->second});
    }
    for (auto& [key, list] : collected) {
        std::sort(list.begin(), list.end(),
                  [](const Collected& a, const Collected& b) { return a.offset < b.offset; });
        auto& samples = model.edge_samples_mut(key.first, key.second);
        for (const Collected& c : list) {
            if (!samples.offsets.empty() && c.offset <= samples.offsets.back()) continue;
            samples.offsets.push_back(c.offset);
            samples.features.insert(samples.features.end(), c.values->begin(), c.values->end());
        }
    }
    return model;
}

}  // namespace gnav
