#include <slick/element.hh>

#include <cctype>
#include <charconv>
#include <stdexcept>

#include <slick/config.hh>
#include <slick/runtime.hh>

namespace slick {

void Element::configure(const std::vector<std::string> &args) {
    if (!args.empty())
        throw std::invalid_argument(std::string(class_name()) + " takes no arguments");
}

void Element::push(int port, Packet p) {
    instance().count_error();
    kill(p);
    (void)port;
}

uint32_t Element::run_task(uint32_t) { return 0; }

bool Element::has_read_handler(std::string_view h) const {
    return _read_handlers.find(h) != _read_handlers.end() ||
           _counters.find(std::string(h)) != _counters.end();
}

bool Element::has_write_handler(std::string_view h) const {
    return _write_handlers.find(h) != _write_handlers.end();
}

std::string Element::call_read(std::string_view h) const {
    auto it = _read_handlers.find(h);
    if (it != _read_handlers.end())
        return it->second();
    // Every counter doubles as a read handler.
    auto c = _counters.find(std::string(h));
    if (c == _counters.end())
        throw std::out_of_range(_name + ": no read handler '" + std::string(h) + "'");
    return std::to_string(c->second);
}

void Element::call_write(std::string_view h, std::string_view value) {
    auto it = _write_handlers.find(h);
    if (it == _write_handlers.end())
        throw std::out_of_range(_name + ": no write handler '" + std::string(h) + "'");
    it->second(value);
}

void Element::add_read_handler(std::string h, std::function<std::string()> f) {
    _read_handlers[std::move(h)] = std::move(f);
}

void Element::add_write_handler(std::string h, std::function<void(std::string_view)> f) {
    _write_handlers[std::move(h)] = std::move(f);
}

bool Element::output_connected(int port) const {
    return port >= 0 && size_t(port) < _outputs.size() && _outputs[size_t(port)].element;
}

void Element::output(int port, Packet p) {
    if (size_t(port) < _outputs.size()) [[likely]] {
        const Target &t = _outputs[size_t(port)];
        if (t.element) [[likely]] {
            t.element->push(t.port, p);
            return;
        }
    }
    kill(p);
}

void Element::kill(Packet &p) {
    p.release();
    _instance->count_drop();
}

// --- Args ------------------------------------------------------------------

namespace {

bool is_keyword_word(std::string_view w) {
    if (w.empty())
        return false;
    for (char c : w)
        if (!(std::isupper(static_cast<unsigned char>(c)) || c == '_' ||
              std::isdigit(static_cast<unsigned char>(c))))
            return false;
    return std::isupper(static_cast<unsigned char>(w[0]));
}

std::string_view first_word(std::string_view s, std::string_view &rest) {
    size_t i = 0;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])))
        ++i;
    rest = s.substr(i);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front())))
        rest.remove_prefix(1);
    return s.substr(0, i);
}

} // namespace

Args::Args(const std::vector<std::string> &args) : _args(args), _used(args.size(), false) {}

std::optional<std::string> Args::keyword(std::string_view key) {
    for (size_t i = 0; i < _args.size(); ++i) {
        if (_used[i])
            continue;
        std::string_view rest;
        if (first_word(_args[i], rest) == key) {
            _used[i] = true;
            return config::unquote(rest);
        }
    }
    return std::nullopt;
}

std::optional<uint64_t> Args::keyword_uint(std::string_view key) {
    auto v = keyword(key);
    if (!v)
        return std::nullopt;
    auto n = parse_uint(*v);
    if (!n)
        throw std::invalid_argument(std::string(key) + " expects an unsigned integer");
    return n;
}

std::optional<bool> Args::keyword_bool(std::string_view key) {
    auto v = keyword(key);
    if (!v)
        return std::nullopt;
    if (v->empty())
        return true;
    auto b = parse_bool(*v);
    if (!b)
        throw std::invalid_argument(std::string(key) + " expects true or false");
    return b;
}

std::vector<std::string> Args::positional() const {
    std::vector<std::string> out;
    for (size_t i = 0; i < _args.size(); ++i)
        if (!_used[i])
            out.push_back(_args[i]);
    return out;
}

void Args::reject_unknown_keywords() const {
    for (size_t i = 0; i < _args.size(); ++i) {
        if (_used[i])
            continue;
        std::string_view rest;
        std::string_view w = first_word(_args[i], rest);
        if (is_keyword_word(w) && !rest.empty())
            throw std::invalid_argument("unknown keyword " + std::string(w));
    }
}

std::optional<uint64_t> parse_uint(std::string_view s) {
    uint64_t v = 0;
    if (s.empty())
        return std::nullopt;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    return std::nullopt;
}

} // namespace slick
