#pragma once

// Directed flowsheet graph. Nodes are feeds, unit operations, products and
// "undefined" open streams; edges carry process streams. Graph values are
// immutable: extend() returns a new graph.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsrl/config.hpp"
#include "fsrl/thermo.hpp"

namespace fsrl {

struct Stream {
    double temperature_c = 25.0;
    double flow = 0.0;  // mol/s
    Composition x{};

    double component_flow(std::size_t i) const { return flow * x[i]; }
    bool operator==(const Stream&) const = default;
};

// Molar flow >= 0, temperature within [5, 200] deg C, valid composition.
bool is_valid(const Stream& s);

enum class UnitKind { Feed, Reactor, HeatExchanger, Column, Splitter, Mixer, Product, Undefined };
inline constexpr int kNumUnitKinds = 8;

const char* to_string(UnitKind k);
UnitKind unit_kind_from_string(const std::string& s);

// Kinds that carry a design value.
bool has_design(UnitKind k);
// Kinds that count toward the unit cap.
bool is_unit(UnitKind k);

struct UnitNode {
    int id = 0;
    UnitKind kind = UnitKind::Undefined;
    std::optional<double> design;

    bool operator==(const UnitNode&) const = default;
};

struct Edge {
    int source = 0;
    int target = 0;
    int port = 0;          // outlet index on the source: column 0 = distillate, 1 = bottoms; splitter 0 = recycle, 1 = purge
    bool recycle = false;  // splitter -> mixer edge
    bool resolved = false;
    Stream stream{};

    bool operator==(const Edge&) const = default;
};

class IllegalActionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnitCapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SimulationRequiredError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::string location)
        : std::runtime_error(what + " (at " + location + ")"), location_(std::move(location)) {}
    const std::string& location() const { return location_; }

private:
    std::string location_;
};

struct DesignRange {
    double lo = 0.0;
    double hi = 1.0;
    double scale(double unit_value) const { return lo + unit_value * (hi - lo); }
    double normalize(double value) const { return (value - lo) / (hi - lo); }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

struct DesignLimits {
    DesignRange reactor{0.05, 20.0};
    DesignRange hex{5.0, 53.8};
    DesignRange column{0.05, 0.95};
    DesignRange splitter{0.0, 1.0};
    int max_units = 25;

    static DesignLimits from(const Config& cfg);
    // Throws std::invalid_argument for kinds without a design value.
    const DesignRange& range(UnitKind k) const;
};

struct FeatureGraph {
    static constexpr int kNodeFeatures = kNumUnitKinds + 2;
    static constexpr int kEdgeFeatures = 2 + static_cast<int>(kNumComponents);

    int num_nodes = 0;
    std::vector<double> node_features;  // num_nodes x kNodeFeatures, row-major
    std::vector<int> edge_source;
    std::vector<int> edge_target;
    std::vector<double> edge_features;  // num_edges x kEdgeFeatures, row-major

    int num_edges() const { return static_cast<int>(edge_source.size()); }
};

class FlowsheetGraph {
public:
    FlowsheetGraph() = default;

    static FlowsheetGraph create(const Stream& feed);

    const std::vector<UnitNode>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<Edge>& mutable_edges() { return edges_; }
    const Stream& feed() const { return feed_; }
    const UnitNode& node(int id) const;

    bool degenerate() const { return feed_.flow == 0.0; }

    // Undefined node ids in insertion order.
    std::vector<int> open_streams() const;
    int unit_count() const;
    bool all_resolved() const;

    // Index of the edge entering `id` (first match) or -1.
    int inlet_edge(int id) const;
    std::vector<int> inlet_edges(int id) const;
    std::vector<int> outlet_edges(int id) const;

    FlowsheetGraph extend(int location, UnitKind kind, std::optional<double> design,
                          const DesignLimits& limits = {}) const;
    // Converts every open stream to a Product (used when the unit cap is hit).
    FlowsheetGraph close_all_open() const;

    FeatureGraph to_feature_graph(const DesignLimits& limits = {}, const FeatureConfig& features = {}) const;

    std::string to_json() const;
    static FlowsheetGraph from_json(const std::string& text);
    std::string to_dot() const;

    bool operator==(const FlowsheetGraph&) const = default;

private:
    int add_node(UnitKind kind, std::optional<double> design = std::nullopt);

    std::vector<UnitNode> nodes_;  // nodes_[i].id == i
    std::vector<Edge> edges_;
    Stream feed_{};
};

inline FlowsheetGraph new_flowsheet(const Stream& feed) { return FlowsheetGraph::create(feed); }

// Short display label per node ("R1", "C2", ...), numbered by kind in id order.
std::vector<std::string> node_labels(const FlowsheetGraph& g);

}  // namespace fsrl
