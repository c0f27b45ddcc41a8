#ifndef SLICK_CONFIG_HH
#define SLICK_CONFIG_HH

// Parser and validator for the configuration language: a subset of Click's.
//
//   // declarations
//   src :: FromTestDevice(eth0, SIZE 128);
//   w :: Wire;
//   // connections; ports default to 0, chains desugar pairwise
//   src -> w -> [0] sink :: ToTestDevice(eth1);
//   c [2] -> rt;
//
// Arguments are split at top-level commas (quote- and paren-aware) and passed
// verbatim to element constructors.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <slick/error.hh>

namespace slick {

class Element;

namespace config {

struct ElementDecl {
    std::string name;
    std::string cls;
    std::vector<std::string> args;
    uint32_t line = 0;
    uint32_t column = 0;

    bool same_as(const ElementDecl &o) const {
        return name == o.name && cls == o.cls && args == o.args;
    }
};

struct Endpoint {
    std::string element;
    uint16_t port = 0;
    bool operator==(const Endpoint &) const = default;
};

struct Connection {
    Endpoint from;
    Endpoint to;
    uint32_t line = 0;
    uint32_t column = 0;
};

struct ConfigGraph {
    std::vector<ElementDecl> decls;
    std::vector<Connection> connections;

    const ElementDecl *find(std::string_view name) const;
    // Equality ignoring source positions.
    bool structurally_equal(const ConfigGraph &o) const;
};

class ParseError : public Error {
  public:
    ParseError(uint32_t line, uint32_t column, const std::string &msg);
    uint32_t line() const { return _line; }
    uint32_t column() const { return _column; }
    const std::string &message() const { return _msg; }

  private:
    uint32_t _line, _column;
    std::string _msg;
};

ConfigGraph parse_config(std::string_view text);
std::string print_config(const ConfigGraph &g);

std::vector<std::string> split_args(std::string_view raw);
// Strips one level of "..." or '...' quoting; other strings are returned as is.
std::string unquote(std::string_view s);

// --- validation ------------------------------------------------------------

struct PortSpec {
    uint16_t inputs = 1;
    // When set, any number of inputs may be connected.
    bool variable_inputs = false;
    uint16_t outputs = 1;
    // Outputs listed here may stay unconnected; missing entries are mandatory.
    std::vector<bool> optional_outputs;

    bool output_optional(uint16_t port) const {
        return port < optional_outputs.size() && optional_outputs[port];
    }
};

enum class TaskKind { None, Always, WhenOutputConnected };

struct ElementClass {
    std::string name;
    // May throw std::invalid_argument for arguments that make the port
    // layout impossible (e.g. a Classifier without patterns).
    std::function<PortSpec(const std::vector<std::string> &)> ports;
    TaskKind task = TaskKind::None;
    std::function<std::unique_ptr<Element>()> factory;
};

class ElementRegistry {
  public:
    void add(ElementClass c);
    const ElementClass *find(std::string_view name) const;
    std::vector<std::string> names() const;

  private:
    std::map<std::string, ElementClass, std::less<>> _classes;
};

class GraphError : public Error {
  public:
    enum Kind { UnknownClass, PortOutOfRange, DuplicatePortUse, DanglingMandatoryPort };

    GraphError(Kind kind, std::string element, const std::string &msg);
    Kind kind() const { return _kind; }
    const std::string &element() const { return _element; }

  private:
    Kind _kind;
    std::string _element;
};

const char *graph_error_name(GraphError::Kind k);

struct CheckedNode {
    const ElementDecl *decl = nullptr;
    const ElementClass *cls = nullptr;
    PortSpec ports;
    uint16_t ninputs = 0; // connected-input count for variable-input elements
    bool is_task = false;
};

struct CheckedGraph {
    std::shared_ptr<const ConfigGraph> graph;
    std::vector<CheckedNode> nodes; // same order as graph->decls
    std::vector<size_t> tasks;      // indices into nodes

    size_t index_of(std::string_view name) const;
};

CheckedGraph validate_graph(const ConfigGraph &g, const ElementRegistry &registry);

} // namespace config
} // namespace slick

#endif
