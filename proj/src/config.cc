#include <slick/config.hh>

#include <cctype>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace slick::config {

const ElementDecl *ConfigGraph::find(std::string_view name) const {
    for (const auto &d : decls)
        if (d.name == name)
            return &d;
    return nullptr;
}

bool ConfigGraph::structurally_equal(const ConfigGraph &o) const {
    if (decls.size() != o.decls.size() || connections.size() != o.connections.size())
        return false;
    for (size_t i = 0; i < decls.size(); ++i)
        if (!decls[i].same_as(o.decls[i]))
            return false;
    for (size_t i = 0; i < connections.size(); ++i)
        if (!(connections[i].from == o.connections[i].from) ||
            !(connections[i].to == o.connections[i].to))
            return false;
    return true;
}

ParseError::ParseError(uint32_t line, uint32_t column, const std::string &msg)
    : Error(fmt::format("{}:{}: {}", line, column, msg)), _line(line), _column(column),
      _msg(msg) {}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '@';
}

enum class Tok { Ident, ColonColon, Args, Port, Arrow, Semi, End };

const char *tok_name(Tok t) {
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::ColonColon: return "'::'";
    case Tok::Args: return "'('";
    case Tok::Port: return "'['";
    case Tok::Arrow: return "'->'";
    case Tok::Semi: return "';'";
    case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    std::string text; // identifier, or raw argument text
    uint16_t port = 0;
    uint32_t line = 1, column = 1;
};

class Lexer {
  public:
    explicit Lexer(std::string_view s) : _s(s) {}

    Token next() {
        skip_space();
        Token t;
        t.line = _line;
        t.column = _col;
        if (_i >= _s.size())
            return t;
        char c = _s[_i];
        if (ident_start(c)) {
            size_t b = _i;
            while (_i < _s.size() && ident_char(_s[_i]))
                advance();
            t.kind = Tok::Ident;
            t.text = std::string(_s.substr(b, _i - b));
        } else if (c == ':' && peek(1) == ':') {
            advance(2);
            t.kind = Tok::ColonColon;
        } else if (c == '-' && peek(1) == '>') {
            advance(2);
            t.kind = Tok::Arrow;
        } else if (c == ';') {
            advance();
            t.kind = Tok::Semi;
        } else if (c == '(') {
            t.kind = Tok::Args;
            t.text = raw_args(t);
        } else if (c == '[') {
            t.kind = Tok::Port;
            t.port = port(t);
        } else {
            throw ParseError(_line, _col,
                             fmt::format("unexpected character '{}'", printable(c)));
        }
        return t;
    }

  private:
    static std::string printable(char c) {
        if (std::isprint(static_cast<unsigned char>(c)))
            return std::string(1, c);
        return fmt::format("\\x{:02x}", static_cast<unsigned char>(c));
    }

    char peek(size_t k) const { return _i + k < _s.size() ? _s[_i + k] : '\0'; }

    void advance(size_t n = 1) {
        while (n-- && _i < _s.size()) {
            if (_s[_i] == '\n') {
                ++_line;
                _col = 1;
            } else {
                ++_col;
            }
            ++_i;
        }
    }

    // Skips a comment starting at the cursor; returns false if none.
    bool skip_comment() {
        if (peek(0) == '/' && peek(1) == '/') {
            while (_i < _s.size() && _s[_i] != '\n')
                advance();
            return true;
        }
        if (peek(0) == '/' && peek(1) == '*') {
            uint32_t l = _line, c = _col;
            advance(2);
            while (_i < _s.size() && !(peek(0) == '*' && peek(1) == '/'))
                advance();
            if (_i >= _s.size())
                throw ParseError(l, c, "unterminated comment");
            advance(2);
            return true;
        }
        return false;
    }

    void skip_space() {
        for (;;) {
            while (_i < _s.size() && std::isspace(static_cast<unsigned char>(_s[_i])))
                advance();
            if (!skip_comment())
                return;
        }
    }

    // Returns the text between the parentheses with comments removed.
    std::string raw_args(const Token &at) {
        advance(); // '('
        std::string out;
        int depth = 0;
        while (_i < _s.size()) {
            char c = _s[_i];
            if (c == '"' || c == '\'') {
                size_t b = _i;
                uint32_t l = _line, col = _col;
                advance();
                while (_i < _s.size() && _s[_i] != c) {
                    if (_s[_i] == '\\' && c == '"')
                        advance();
                    advance();
                }
                if (_i >= _s.size())
                    throw ParseError(l, col, "unterminated string");
                advance();
                out.append(_s.substr(b, _i - b));
                continue;
            }
            if (skip_comment())
                continue;
            if (c == '(')
                ++depth;
            else if (c == ')' && depth-- == 0) {
                advance();
                return out;
            }
            out.push_back(c);
            advance();
        }
        throw ParseError(at.line, at.column, "unterminated argument list, expected ')'");
    }

    uint16_t port(const Token &at) {
        advance(); // '['
        skip_space();
        uint32_t v = 0;
        size_t digits = 0;
        while (_i < _s.size() && std::isdigit(static_cast<unsigned char>(_s[_i]))) {
            v = v * 10 + uint32_t(_s[_i] - '0');
            if (v > 0xffff)
                throw ParseError(at.line, at.column, "port number out of range");
            ++digits;
            advance();
        }
        if (!digits)
            throw ParseError(_line, _col, "expected port number");
        skip_space();
        if (peek(0) != ']')
            throw ParseError(_line, _col, "expected ']'");
        advance();
        return uint16_t(v);
    }

    std::string_view _s;
    size_t _i = 0;
    uint32_t _line = 1, _col = 1;
};

struct Ref {
    std::string name;
    uint32_t line, column;
    std::optional<uint16_t> in_port, out_port;
    uint32_t in_line = 0, in_col = 0;
};

class Parser {
  public:
    explicit Parser(std::string_view text) : _lex(text) { _tok = _lex.next(); }

    ConfigGraph parse() {
        while (_tok.kind != Tok::End) {
            if (_tok.kind == Tok::Semi) {
                shift();
                continue;
            }
            statement();
        }
        check_references();
        return std::move(_g);
    }

  private:
    void shift() { _tok = _lex.next(); }

    [[noreturn]] void expected(const char *what) {
        throw ParseError(_tok.line, _tok.column,
                         fmt::format("expected {}, found {}", what,
                                     _tok.kind == Tok::Ident ? "'" + _tok.text + "'"
                                                             : tok_name(_tok.kind)));
    }

    Ref element_ref() {
        Ref r;
        if (_tok.kind == Tok::Port) {
            r.in_port = _tok.port;
            r.in_line = _tok.line;
            r.in_col = _tok.column;
            shift();
        }
        if (_tok.kind != Tok::Ident)
            expected("element name");
        r.name = _tok.text;
        r.line = _tok.line;
        r.column = _tok.column;
        shift();
        if (_tok.kind == Tok::ColonColon) {
            shift();
            if (_tok.kind != Tok::Ident)
                expected("element class");
            ElementDecl d;
            d.name = r.name;
            d.cls = _tok.text;
            d.line = r.line;
            d.column = r.column;
            shift();
            if (_tok.kind == Tok::Args) {
                d.args = split_args(_tok.text);
                shift();
            }
            if (_declared.count(d.name))
                throw ParseError(d.line, d.column,
                                 fmt::format("redeclaration of element '{}'", d.name));
            _declared.insert(d.name);
            _g.decls.push_back(std::move(d));
        } else if (_tok.kind == Tok::Args) {
            expected("'::' before argument list");
        }
        if (_tok.kind == Tok::Port) {
            r.out_port = _tok.port;
            shift();
        }
        return r;
    }

    void statement() {
        Ref left = element_ref();
        if (left.in_port)
            throw ParseError(left.in_line, left.in_col,
                             "input port given for element with no predecessor");
        while (_tok.kind == Tok::Arrow) {
            uint32_t al = _tok.line, ac = _tok.column;
            shift();
            Ref right = element_ref();
            Connection c;
            c.from = {left.name, left.out_port.value_or(0)};
            c.to = {right.name, right.in_port.value_or(0)};
            c.line = al;
            c.column = ac;
            _uses.push_back({left.name, left.line, left.column});
            _uses.push_back({right.name, right.line, right.column});
            _g.connections.push_back(std::move(c));
            right.in_port.reset();
            left = std::move(right);
        }
        if (left.out_port)
            throw ParseError(_tok.line, _tok.column, "output port given with no successor");
        if (_tok.kind == Tok::Semi)
            shift();
        else if (_tok.kind != Tok::End)
            expected("';' or '->'");
    }

    void check_references() {
        for (const auto &u : _uses)
            if (!_declared.count(u.name))
                throw ParseError(u.line, u.column,
                                 fmt::format("undeclared element '{}'", u.name));
    }

    struct Use {
        std::string name;
        uint32_t line, column;
    };

    Lexer _lex;
    Token _tok;
    ConfigGraph _g;
    std::set<std::string, std::less<>> _declared;
    std::vector<Use> _uses;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

} // namespace

ConfigGraph parse_config(std::string_view text) { return Parser(text).parse(); }

std::vector<std::string> split_args(std::string_view raw) {
    std::vector<std::string> out;
    if (trim(raw).empty())
        return out;
    int depth = 0;
    size_t start = 0;
    char quote = 0;
    for (size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (quote) {
            if (c == '\\' && quote == '"')
                ++i;
            else if (c == quote)
                quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '(') {
            ++depth;
        } else if (c == ')') {
            --depth;
        } else if (c == ',' && depth == 0) {
            out.emplace_back(trim(raw.substr(start, i - start)));
            start = i + 1;
        }
    }
    out.emplace_back(trim(raw.substr(start)));
    return out;
}

std::string unquote(std::string_view s) {
    if (s.size() < 2 || (s.front() != '"' && s.front() != '\'') || s.back() != s.front())
        return std::string(s);
    std::string out;
    char q = s.front();
    for (size_t i = 1; i + 1 < s.size(); ++i) {
        if (q == '"' && s[i] == '\\' && i + 2 < s.size()) {
            ++i;
            switch (s[i]) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            default: out.push_back(s[i]);
            }
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string print_config(const ConfigGraph &g) {
    std::string out;
    for (const auto &d : g.decls) {
        out += fmt::format("{} :: {}(", d.name, d.cls);
        for (size_t i = 0; i < d.args.size(); ++i)
            out += (i ? ", " : "") + d.args[i];
        out += ");\n";
    }
    for (const auto &c : g.connections)
        out += fmt::format("{} [{}] -> [{}] {};\n", c.from.element, c.from.port, c.to.port,
                           c.to.element);
    return out;
}

// --- registry and validation ----------------------------------------------

void ElementRegistry::add(ElementClass c) {
    std::string name = c.name;
    if (!_classes.emplace(name, std::move(c)).second)
        throw std::logic_error("element class registered twice: " + name);
}

const ElementClass *ElementRegistry::find(std::string_view name) const {
    auto it = _classes.find(name);
    return it == _classes.end() ? nullptr : &it->second;
}

std::vector<std::string> ElementRegistry::names() const {
    std::vector<std::string> v;
    for (const auto &[n, _] : _classes)
        v.push_back(n);
    return v;
}

GraphError::GraphError(Kind kind, std::string element, const std::string &msg)
    : Error(fmt::format("{}: {}: {}", graph_error_name(kind), element, msg)), _kind(kind),
      _element(std::move(element)) {}

const char *graph_error_name(GraphError::Kind k) {
    switch (k) {
    case GraphError::UnknownClass: return "UnknownClass";
    case GraphError::PortOutOfRange: return "PortOutOfRange";
    case GraphError::DuplicatePortUse: return "DuplicatePortUse";
    case GraphError::DanglingMandatoryPort: return "DanglingMandatoryPort";
    }
    return "?";
}

size_t CheckedGraph::index_of(std::string_view name) const {
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].decl->name == name)
            return i;
    return SIZE_MAX;
}

CheckedGraph validate_graph(const ConfigGraph &g, const ElementRegistry &registry) {
    CheckedGraph cg;
    auto owned = std::make_shared<ConfigGraph>(g);
    cg.graph = owned;
    std::unordered_map<std::string, size_t> index;
    for (const auto &d : owned->decls) {
        CheckedNode n;
        n.decl = &d;
        n.cls = registry.find(d.cls);
        if (!n.cls)
            throw GraphError(GraphError::UnknownClass, d.name,
                             fmt::format("no element class named '{}'", d.cls));
        try {
            n.ports = n.cls->ports(d.args);
        } catch (const std::invalid_argument &e) {
            throw ElementInitError(d.name, e.what());
        }
        n.ninputs = n.ports.variable_inputs ? 0 : n.ports.inputs;
        index.emplace(d.name, cg.nodes.size());
        cg.nodes.push_back(std::move(n));
    }

    std::set<std::pair<size_t, uint16_t>> used_out, used_in;
    for (const auto &c : owned->connections) {
        size_t fi = index.at(c.from.element), ti = index.at(c.to.element);
        CheckedNode &from = cg.nodes[fi];
        CheckedNode &to = cg.nodes[ti];
        if (c.from.port >= from.ports.outputs)
            throw GraphError(GraphError::PortOutOfRange, c.from.element,
                             fmt::format("output port {} out of range ({} has {} outputs)",
                                         c.from.port, from.decl->cls, from.ports.outputs));
        if (!to.ports.variable_inputs && c.to.port >= to.ports.inputs)
            throw GraphError(GraphError::PortOutOfRange, c.to.element,
                             fmt::format("input port {} out of range ({} has {} inputs)",
                                         c.to.port, to.decl->cls, to.ports.inputs));
        if (!used_out.insert({fi, c.from.port}).second)
            throw GraphError(GraphError::DuplicatePortUse, c.from.element,
                             fmt::format("output port {} connected twice", c.from.port));
        if (!used_in.insert({ti, c.to.port}).second)
            throw GraphError(GraphError::DuplicatePortUse, c.to.element,
                             fmt::format("input port {} connected twice", c.to.port));
        if (to.ports.variable_inputs)
            to.ninputs = std::max<uint16_t>(to.ninputs, uint16_t(c.to.port + 1));
    }

    for (size_t i = 0; i < cg.nodes.size(); ++i) {
        CheckedNode &n = cg.nodes[i];
        for (uint16_t p = 0; p < n.ports.outputs; ++p)
            if (!used_out.count({i, p}) && !n.ports.output_optional(p))
                throw GraphError(GraphError::DanglingMandatoryPort, n.decl->name,
                                 fmt::format("output port {} is not connected", p));
        switch (n.cls->task) {
        case TaskKind::None: break;
        case TaskKind::Always: n.is_task = true; break;
        case TaskKind::WhenOutputConnected: n.is_task = used_out.count({i, 0}) > 0; break;
        }
        if (n.is_task)
            cg.tasks.push_back(i);
    }
    return cg;
}

} // namespace slick::config
