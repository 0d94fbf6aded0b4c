#include "gnav/formats.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gnav/errors.hpp"

namespace gnav {

std::string fmt_double(double value) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return in;
}

double parse_double(const std::string& token, const std::string& path, int line) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        throw IoError(path + ":" + std::to_string(line) + ": bad number '" + token + "'");
    return v;
}

long parse_long(const std::string& token, const std::string& path, int line) {
    char* end = nullptr;
    const long v = std::strtol(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0')
        throw IoError(path + ":" + std::to_string(line) + ": bad integer '" + token + "'");
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream ss(line);
    std::string token;
    while (ss >> token) tokens.push_back(std::move(token));
    return tokens;
}

void expect_header(const std::vector<std::string>& tokens, const std::string& kind,
                   size_t min_tokens, const std::string& path) {
    if (tokens.size() < min_tokens || tokens[0] != kind || tokens[1] != "v1")
        throw IoError(path + ": expected '" + kind + " v1' header");
}

}  // namespace

// --- traversal ---------------------------------------------------------------

void write_traversal(const TraversalRecord& record, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "traversal v1\n";
    for (const auto& s : record.samples) {
        out << fmt_double(s.t) << ' ' << fmt_double(s.x) << ' ' << fmt_double(s.y) << ' '
            << fmt_double(s.heading) << ' ' << s.feature_ref << '\n';
    }
    for (const auto& [a, b] : record.closures) out << "closure " << a << ' ' << b << '\n';
    for (const auto& [a, b] : record.dup_ranges) out << "dup " << a << ' ' << b << '\n';
}

TraversalRecord read_traversal(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    expect_header(split_ws(line), "traversal", 2, path);
    TraversalRecord record;
    while (std::getline(in, line)) {
        ++lineno;
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "closure" || tok[0] == "dup") {
            if (tok.size() != 3)
                throw IoError(path + ":" + std::to_string(lineno) + ": malformed " + tok[0] +
                              " line");
            const int a = static_cast<int>(parse_long(tok[1], path, lineno));
            const int b = static_cast<int>(parse_long(tok[2], path, lineno));
            if (tok[0] == "closure")
                record.closures.emplace_back(a, b);
            else
                record.dup_ranges.emplace_back(a, b);
        } else {
            if (tok.size() != 5)
                throw IoError(path + ":" + std::to_string(lineno) + ": malformed sample line");
            TraversalSample s;
            s.t = parse_double(tok[0], path, lineno);
            s.x = parse_double(tok[1], path, lineno);
            s.y = parse_double(tok[2], path, lineno);
            s.heading = parse_double(tok[3], path, lineno);
            s.feature_ref = tok[4];
            record.samples.push_back(std::move(s));
        }
    }
    return record;
}

// --- pose graph ---------------------------------------------------------------

void write_pose_graph(const PoseGraph& graph, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "posegraph v1 " << fmt_double(graph.spacing()) << ' ' << graph.rotation_step() << '\n';
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        const GraphNode& node = graph.node(n);
        out << "node " << n << ' ' << fmt_double(node.pose.x) << ' ' << fmt_double(node.pose.y)
            << ' ' << node.pose.heading << ' ' << node.feature_ref << '\n';
    }
    for (const auto& [from, heading, to] : graph.edges())
        out << "edge " << from << ' ' << heading << ' ' << to << '\n';
}

PoseGraph read_pose_graph(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const std::vector<std::string> header = split_ws(line);
    expect_header(header, "posegraph", 4, path);
    PoseGraph graph(parse_double(header[2], path, 1),
                    static_cast<int>(parse_long(header[3], path, 1)));
    struct PendingEdge {
        NodeId from;
        int heading;
        NodeId to;
    };
    std::vector<PendingEdge> edges;
    while (std::getline(in, line)) {
        ++lineno;
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "node") {
            if (tok.size() != 6)
                throw IoError(path + ":" + std::to_string(lineno) + ": malformed node line");
            const NodeId id = static_cast<NodeId>(parse_long(tok[1], path, lineno));
            Pose pose{parse_double(tok[2], path, lineno), parse_double(tok[3], path, lineno),
                      static_cast<int>(parse_long(tok[4], path, lineno))};
            const NodeId got = graph.add_node(pose, tok[5]);
            if (got != id)
                throw IoError(path + ":" + std::to_string(lineno) + ": node ids must be dense");
        } else if (tok[0] == "edge") {
            if (tok.size() != 4)
                throw IoError(path + ":" + std::to_string(lineno) + ": malformed edge line");
            edges.push_back({static_cast<NodeId>(parse_long(tok[1], path, lineno)),
                             static_cast<int>(parse_long(tok[2], path, lineno)),
                             static_cast<NodeId>(parse_long(tok[3], path, lineno))});
        } else {
            throw IoError(path + ":" + std::to_string(lineno) + ": unknown line '" + tok[0] + "'");
        }
    }
    for (const PendingEdge& e : edges) graph.add_edge(e.from, e.heading, e.to);
    return graph;
}

// --- feature manifest -----------------------------------------------------------

FeatureManifest read_feature_manifest(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const std::vector<std::string> header = split_ws(line);
    expect_header(header, "features", 3, path);
    FeatureManifest manifest;
    manifest.d = static_cast<int>(parse_long(header[2], path, 1));
    if (manifest.d < 1) throw IoError(path + ": feature dimension must be >= 1");
    while (std::getline(in, line)) {
        ++lineno;
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "feat") {
            if (static_cast<int>(tok.size()) != 2 + kViews * manifest.d)
                throw ConfigError("feature record '" + (tok.size() > 1 ? tok[1] : "?") + "' has " +
                                  std::to_string(tok.size() - 2) + " values, expected " +
                                  std::to_string(kViews * manifest.d));
            std::vector<double>& values = manifest.records[tok[1]];
            values.resize(static_cast<size_t>(kViews) * manifest.d);
            for (int i = 0; i < kViews * manifest.d; ++i)
                values[i] = parse_double(tok[2 + i], path, lineno);
        } else if (tok[0] == "viewfeat") {
            if (static_cast<int>(tok.size()) != 3 + manifest.d)
                throw ConfigError("feature record '" + (tok.size() > 1 ? tok[1] : "?") + "' has " +
                                  std::to_string(tok.size() - 3) + " values, expected " +
                                  std::to_string(manifest.d));
            const int view = static_cast<int>(parse_long(tok[2], path, lineno));
            if (view < 0 || view >= kViews)
                throw ConfigError("feature record '" + tok[1] + "' has bad view index " + tok[2]);
            std::vector<double>& values = manifest.records[tok[1]];
            values.resize(static_cast<size_t>(kViews) * manifest.d);
            for (int i = 0; i < manifest.d; ++i)
                values[static_cast<size_t>(view) * manifest.d + i] =
                    parse_double(tok[3 + i], path, lineno);
        } else {
            throw IoError(path + ":" + std::to_string(lineno) + ": unknown line '" + tok[0] + "'");
        }
    }
    return manifest;
}

void write_feature_manifest(const ObservationModel& model, const PoseGraph& graph,
                            const std::string& path) {
    std::ofstream out = open_out(path);
    out << "features v1 " << model.d() << '\n';
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        out << "feat " << graph.node(n).feature_ref;
        for (int v = 0; v < kViews; ++v)
            for (double x : model.node_view(n, v)) out << ' ' << fmt_double(x);
        out << '\n';
    }
    for (const auto& [key, samples] : model.edge_samples()) {
        const int count = static_cast<int>(samples.offsets.size());
        for (int k = 0; k < count; ++k) {
            out << "feat edge:" << key.first << ':' << key.second << ':' << k;
            const size_t base = static_cast<size_t>(k) * kViews * model.d();
            for (int i = 0; i < kViews * model.d(); ++i)
                out << ' ' << fmt_double(samples.features[base + i]);
            out << '\n';
        }
    }
}

// --- named arrays ---------------------------------------------------------------

void write_named_arrays(const NamedArrays& arrays, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "params v1\n";
    for (const auto& [name, values] : arrays) {
        out << "array " << name << ' ' << values.size() << '\n';
        for (size_t i = 0; i < values.size(); ++i) {
            out << fmt_double(values[i]) << (i + 1 == values.size() ? '\n' : ' ');
        }
        if (values.empty()) out << '\n';
    }
}

NamedArrays read_named_arrays(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string word;
    if (!(in >> word) || word != "params" || !(in >> word) || word != "v1")
        throw IoError(path + ": expected 'params v1' header");
    NamedArrays arrays;
    while (in >> word) {
        if (word != "array") throw IoError(path + ": expected 'array', got '" + word + "'");
        std::string name;
        size_t len = 0;
        if (!(in >> name >> len)) throw IoError(path + ": malformed array header");
        std::vector<double> values(len);
        for (size_t i = 0; i < len; ++i) {
            if (!(in >> word)) throw IoError(path + ": array '" + name + "' truncated");
            values[i] = parse_double(word, path, 0);
        }
        arrays.emplace_back(std::move(name), std::move(values));
    }
    return arrays;
}

// --- metrics ---------------------------------------------------------------------

void write_metrics(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "metrics v1\n";
    for (const MetricsRecord& r : records) {
        out << r.frames << ' ' << r.episodes << ' ' << fmt_double(r.mean_return) << ' '
            << fmt_double(r.min_return) << ' ' << fmt_double(r.loss) << '\n';
    }
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    expect_header(split_ws(line), "metrics", 2, path);
    std::vector<MetricsRecord> records;
    while (std::getline(in, line)) {
        ++lineno;
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() != 5)
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed metrics line");
        MetricsRecord r;
        r.frames = parse_long(tok[0], path, lineno);
        r.episodes = parse_long(tok[1], path, lineno);
        r.mean_return = parse_double(tok[2], path, lineno);
        r.min_return = parse_double(tok[3], path, lineno);
        r.loss = parse_double(tok[4], path, lineno);
        records.push_back(r);
    }
    return records;
}

// --- key = value files ------------------------------------------------------------

bool KvFile::has(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return true;
    return false;
}

std::string KvFile::get(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return v;
    throw ConfigError("missing config key '" + key + "'");
}

std::string KvFile::get(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
}

long KvFile::get_long(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    char* end = nullptr;
    const double parsed = std::strtod(v.c_str(), &end);  // accepts 2e6 style budgets
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "' has bad integer value '" + v + "'");
    return static_cast<long>(parsed);
}

double KvFile::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    char* end = nullptr;
    const double parsed = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "' has bad numeric value '" + v + "'");
    return parsed;
}

bool KvFile::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config key '" + key + "' has bad boolean value '" + v + "'");
}

void KvFile::set(const std::string& key, std::string value) {
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries.emplace_back(key, std::move(value));
}

KvFile read_kv_file(const std::string& path) {
    std::ifstream in = open_in(path);
    KvFile kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (!split_ws(line).empty())
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            continue;
        }
        auto trim = [](std::string s) {
            const size_t a = s.find_first_not_of(" \t\r");
            const size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty config key");
        kv.set(key, value);
    }
    return kv;
}

void write_kv_file(const KvFile& kv, const std::string& path) {
    std::ofstream out = open_out(path);
    for (const auto& [k, v] : kv.entries) out << k << " = " << v << '\n';
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    uint64_t hash = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

}  // namespace gnav
