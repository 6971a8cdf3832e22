#include "fsrl/flowsheet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace fsrl {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kNumUnitKinds> kKindNames{
    "feed", "reactor", "heat_exchanger", "column", "splitter", "mixer", "product", "undefined"};
constexpr std::array<const char*, kNumUnitKinds> kKindPrefix{"F", "R", "HEX", "C", "S", "M", "P", "U"};

constexpr int kFormatVersion = 1;

}  // namespace

bool is_valid(const Stream& s) {
    return std::isfinite(s.flow) && s.flow >= 0.0 && s.temperature_c >= 5.0 && s.temperature_c <= 200.0 &&
           is_valid(s.x);
}

const char* to_string(UnitKind k) { return kKindNames[static_cast<int>(k)]; }

UnitKind unit_kind_from_string(const std::string& s) {
    for (int i = 0; i < kNumUnitKinds; ++i) {
        if (s == kKindNames[i]) return static_cast<UnitKind>(i);
    }
    throw std::invalid_argument("unknown unit kind '" + s + "'");
}

bool has_design(UnitKind k) {
    return k == UnitKind::Reactor || k == UnitKind::HeatExchanger || k == UnitKind::Column || k == UnitKind::Splitter;
}

bool is_unit(UnitKind k) { return k != UnitKind::Feed && k != UnitKind::Product && k != UnitKind::Undefined; }

DesignLimits DesignLimits::from(const Config& cfg) {
    DesignLimits l;
    l.reactor = {cfg.reactor.min_length, cfg.reactor.max_length};
    l.hex = {cfg.hex.min_water_inlet_c, cfg.hex.max_water_inlet_c};
    l.column = {cfg.column.min_d_to_f, cfg.column.max_d_to_f};
    l.splitter = {0.0, 1.0};
    l.max_units = cfg.env.max_units;
    return l;
}

const DesignRange& DesignLimits::range(UnitKind k) const {
    switch (k) {
        case UnitKind::Reactor: return reactor;
        case UnitKind::HeatExchanger: return hex;
        case UnitKind::Column: return column;
        case UnitKind::Splitter: return splitter;
        default: throw std::invalid_argument(std::string("unit kind has no design value: ") + to_string(k));
    }
}

FlowsheetGraph FlowsheetGraph::create(const Stream& feed) {
    FlowsheetGraph g;
    g.feed_ = feed;
    int f = g.add_node(UnitKind::Feed);
    int u = g.add_node(UnitKind::Undefined);
    g.edges_.push_back({f, u, 0, false, true, feed});
    return g;
}

int FlowsheetGraph::add_node(UnitKind kind, std::optional<double> design) {
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({id, kind, design});
    return id;
}

const UnitNode& FlowsheetGraph::node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw std::out_of_range("no node with id " + std::to_string(id));
    return nodes_[id];
}

std::vector<int> FlowsheetGraph::open_streams() const {
    std::vector<int> out;
    for (const auto& n : nodes_) {
        if (n.kind == UnitKind::Undefined) out.push_back(n.id);
    }
    return out;
}

int FlowsheetGraph::unit_count() const {
    return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const UnitNode& n) { return is_unit(n.kind); }));
}

bool FlowsheetGraph::all_resolved() const {
    return std::all_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.resolved; });
}

int FlowsheetGraph::inlet_edge(int id) const {
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        if (edges_[i].target == id && !edges_[i].recycle) return static_cast<int>(i);
    }
    return -1;
}

std::vector<int> FlowsheetGraph::inlet_edges(int id) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        if (edges_[i].target == id) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> FlowsheetGraph::outlet_edges(int id) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        if (edges_[i].source == id) out.push_back(static_cast<int>(i));
    }
    std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return edges_[a].port < edges_[b].port; });
    return out;
}

FlowsheetGraph FlowsheetGraph::extend(int location, UnitKind kind, std::optional<double> design,
                                      const DesignLimits& limits) const {
    if (location < 0 || location >= static_cast<int>(nodes_.size()) || nodes_[location].kind != UnitKind::Undefined) {
        throw IllegalActionError("node " + std::to_string(location) + " is not an open stream");
    }
    int added_units = 0;
    switch (kind) {
        case UnitKind::Reactor:
        case UnitKind::HeatExchanger:
        case UnitKind::Column: added_units = 1; break;
        case UnitKind::Splitter: added_units = 2; break;  // splitter + mixer
        case UnitKind::Product: added_units = 0; break;
        default: throw IllegalActionError(std::string("cannot place unit kind ") + to_string(kind));
    }
    if (has_design(kind)) {
        if (!design) throw IllegalActionError(std::string("missing design value for ") + to_string(kind));
        if (!std::isfinite(*design) || !limits.range(kind).contains(*design)) {
            throw IllegalActionError(std::string("design value out of range for ") + to_string(kind) + ": " +
                                     std::to_string(*design));
        }
    } else {
        design.reset();
    }
    if (unit_count() + added_units > limits.max_units) {
        throw UnitCapError("unit cap of " + std::to_string(limits.max_units) + " exceeded");
    }

    FlowsheetGraph g = *this;
    g.nodes_[location].kind = kind;
    g.nodes_[location].design = design;
    const int in = g.inlet_edge(location);
    const Stream inlet = in >= 0 ? g.edges_[in].stream : feed_;

    switch (kind) {
        case UnitKind::Reactor:
        case UnitKind::HeatExchanger: {
            int child = g.add_node(UnitKind::Undefined);
            g.edges_.push_back({location, child, 0, false, false, inlet});
            break;
        }
        case UnitKind::Column: {
            int distillate = g.add_node(UnitKind::Undefined);
            int bottoms = g.add_node(UnitKind::Undefined);
            g.edges_.push_back({location, distillate, 0, false, false, inlet});
            g.edges_.push_back({location, bottoms, 1, false, false, inlet});
            break;
        }
        case UnitKind::Splitter: {
            int mixer = g.add_node(UnitKind::Mixer);
            int purge = g.add_node(UnitKind::Undefined);
            auto feed_edge = std::find_if(g.edges_.begin(), g.edges_.end(),
                                          [](const Edge& e) { return e.source == 0; });
            const int downstream = feed_edge->target;
            feed_edge->target = mixer;
            g.edges_.push_back({mixer, downstream, 0, false, false, feed_});
            Stream empty = feed_;
            empty.flow = 0.0;
            g.edges_.push_back({location, mixer, 0, true, false, empty});
            g.edges_.push_back({location, purge, 1, false, false, inlet});
            break;
        }
        default: break;
    }
    for (auto& e : g.edges_) e.resolved = (e.source == 0);
    return g;
}

FlowsheetGraph FlowsheetGraph::close_all_open() const {
    FlowsheetGraph g = *this;
    for (auto& n : g.nodes_) {
        if (n.kind == UnitKind::Undefined) n.kind = UnitKind::Product;
    }
    return g;
}

FeatureGraph FlowsheetGraph::to_feature_graph(const DesignLimits& limits, const FeatureConfig& features) const {
    if (!all_resolved()) throw SimulationRequiredError("flowsheet has unresolved streams; simulate first");
    FeatureGraph fg;
    fg.num_nodes = static_cast<int>(nodes_.size());
    fg.node_features.assign(static_cast<std::size_t>(fg.num_nodes) * FeatureGraph::kNodeFeatures, 0.0);
    for (const auto& n : nodes_) {
        double* row = fg.node_features.data() + static_cast<std::size_t>(n.id) * FeatureGraph::kNodeFeatures;
        row[static_cast<int>(n.kind)] = 1.0;
        if (n.design) row[kNumUnitKinds] = limits.range(n.kind).normalize(*n.design);
        row[kNumUnitKinds + 1] = n.kind == UnitKind::Undefined ? 1.0 : 0.0;
    }
    const double t_span = features.t_max_c - features.t_min_c;
    for (const auto& e : edges_) {
        fg.edge_source.push_back(e.source);
        fg.edge_target.push_back(e.target);
        fg.edge_features.push_back((e.stream.temperature_c - features.t_min_c) / t_span);
        fg.edge_features.push_back(e.stream.flow / features.feed_flow_scale);
        for (std::size_t i = 0; i < kNumComponents; ++i) fg.edge_features.push_back(e.stream.x[i]);
    }
    return fg;
}

namespace {

json stream_to_json(const Stream& s) {
    return json{{"temperature_c", s.temperature_c}, {"flow", s.flow}, {"x", s.x.x}};
}

template <class T>
T get_at(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing key '") + key + "'", where);
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad value for '") + key + "': " + e.what(), where + "/" + key);
    }
}

Stream stream_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError("stream must be an object", where);
    Stream s;
    s.temperature_c = get_at<double>(j, "temperature_c", where);
    s.flow = get_at<double>(j, "flow", where);
    s.x.x = get_at<std::array<double, kNumComponents>>(j, "x", where);
    return s;
}

}  // namespace

std::string FlowsheetGraph::to_json() const {
    json j;
    j["format"] = "fsrl-flowsheet";
    j["version"] = kFormatVersion;
    j["feed"] = stream_to_json(feed_);
    j["nodes"] = json::array();
    for (const auto& n : nodes_) {
        json jn{{"id", n.id}, {"kind", to_string(n.kind)}};
        jn["design"] = n.design ? json(*n.design) : json(nullptr);
        j["nodes"].push_back(jn);
    }
    j["edges"] = json::array();
    for (const auto& e : edges_) {
        j["edges"].push_back(json{{"from", e.source},
                                  {"to", e.target},
                                  {"port", e.port},
                                  {"recycle", e.recycle},
                                  {"resolved", e.resolved},
                                  {"stream", stream_to_json(e.stream)}});
    }
    return j.dump(2);
}

FlowsheetGraph FlowsheetGraph::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), "byte " + std::to_string(e.byte));
    }
    if (!j.is_object()) throw ParseError("flowsheet must be a JSON object", "/");
    if (get_at<std::string>(j, "format", "") != "fsrl-flowsheet") throw ParseError("unexpected format tag", "/format");
    if (get_at<int>(j, "version", "") != kFormatVersion) throw ParseError("unsupported version", "/version");

    FlowsheetGraph g;
    g.feed_ = stream_from_json(j.at("feed"), "/feed");
    const json& jn = j.contains("nodes") ? j["nodes"] : throw ParseError("missing key 'nodes'", "/");
    if (!jn.is_array()) throw ParseError("'nodes' must be an array", "/nodes");
    for (std::size_t i = 0; i < jn.size(); ++i) {
        const std::string where = "/nodes/" + std::to_string(i);
        const int id = get_at<int>(jn[i], "id", where);
        if (id != static_cast<int>(i)) throw ParseError("node ids must be 0..n-1 in order", where + "/id");
        UnitKind kind;
        try {
            kind = unit_kind_from_string(get_at<std::string>(jn[i], "kind", where));
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), where + "/kind");
        }
        std::optional<double> design;
        if (jn[i].contains("design") && !jn[i]["design"].is_null()) design = get_at<double>(jn[i], "design", where);
        if (has_design(kind) != design.has_value()) throw ParseError("design value presence does not match kind", where);
        g.nodes_.push_back({id, kind, design});
    }
    if (g.nodes_.empty() || g.nodes_[0].kind != UnitKind::Feed) throw ParseError("node 0 must be the feed", "/nodes/0");

    const json& je = j.contains("edges") ? j["edges"] : throw ParseError("missing key 'edges'", "/");
    if (!je.is_array()) throw ParseError("'edges' must be an array", "/edges");
    const int n = static_cast<int>(g.nodes_.size());
    for (std::size_t i = 0; i < je.size(); ++i) {
        const std::string where = "/edges/" + std::to_string(i);
        Edge e;
        e.source = get_at<int>(je[i], "from", where);
        e.target = get_at<int>(je[i], "to", where);
        if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n) throw ParseError("edge endpoint out of range", where);
        e.port = je[i].value("port", 0);
        e.recycle = je[i].value("recycle", false);
        e.resolved = je[i].value("resolved", false);
        e.stream = stream_from_json(je[i].contains("stream") ? je[i]["stream"] : throw ParseError("missing stream", where),
                                    where + "/stream");
        g.edges_.push_back(e);
    }
    for (const auto& node : g.nodes_) {
        if (node.kind == UnitKind::Undefined || node.kind == UnitKind::Product) {
            if (g.inlet_edges(node.id).size() != 1 || !g.outlet_edges(node.id).empty()) {
                throw ParseError("sink node must have exactly one inlet and no outlet", "/nodes/" + std::to_string(node.id));
            }
        }
    }
    return g;
}

std::vector<std::string> node_labels(const FlowsheetGraph& g) {
    std::array<int, kNumUnitKinds> counter{};
    std::vector<std::string> labels;
    for (const auto& n : g.nodes()) {
        int k = static_cast<int>(n.kind);
        labels.push_back(std::string(kKindPrefix[k]) + std::to_string(++counter[k]));
    }
    return labels;
}

std::string FlowsheetGraph::to_dot() const {
    const auto labels = node_labels(*this);
    std::ostringstream os;
    os.precision(4);
    os << "digraph flowsheet {\n  rankdir=LR;\n";
    for (const auto& n : nodes_) {
        os << "  n" << n.id << " [label=\"" << labels[n.id];
        if (n.design) os << "\\n" << *n.design;
        os << "\"";
        switch (n.kind) {
            case UnitKind::Feed:
            case UnitKind::Product: os << ", shape=oval"; break;
            case UnitKind::Undefined: os << ", shape=point"; break;
            default: os << ", shape=box"; break;
        }
        os << "];\n";
    }
    for (const auto& e : edges_) {
        os << "  n" << e.source << " -> n" << e.target << " [label=\"" << e.stream.flow << " mol/s\\n"
           << e.stream.temperature_c << " C\"";
        if (e.recycle) os << ", style=dashed";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace fsrl
