#include "internal.hh"

#include <algorithm>
#include <deque>
#include <fstream>

namespace slick::elements {

bool is_plain_literal(std::string_view pattern) {
    return !pattern.empty() &&
           pattern.find_first_of("\\^$.|?*+()[]{}") == std::string_view::npos;
}

namespace {

// Index just past the bracket expression starting at i ('[').
size_t skip_class(std::string_view p, size_t i) {
    ++i;
    if (i < p.size() && p[i] == '^')
        ++i;
    if (i < p.size() && p[i] == ']')
        ++i;
    while (i < p.size() && p[i] != ']')
        i += p[i] == '\\' ? 2 : 1;
    return std::min(i + 1, p.size());
}

// Index just past the group starting at i ('(').
size_t skip_group(std::string_view p, size_t i) {
    int depth = 0;
    while (i < p.size()) {
        char c = p[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        if (c == '[') {
            i = skip_class(p, i);
            continue;
        }
        if (c == '(')
            ++depth;
        else if (c == ')' && --depth == 0)
            return i + 1;
        ++i;
    }
    return p.size();
}

bool has_top_level_alternation(std::string_view p) {
    for (size_t i = 0; i < p.size();) {
        char c = p[i];
        if (c == '\\')
            i += 2;
        else if (c == '[')
            i = skip_class(p, i);
        else if (c == '(')
            i = skip_group(p, i);
        else if (c == '|')
            return true;
        else
            ++i;
    }
    return false;
}

} // namespace

std::string required_literal(std::string_view p) {
    if (has_top_level_alternation(p))
        return {};
    std::string best, cur;
    bool last_literal = false;
    auto end_run = [&] {
        if (cur.size() > best.size())
            best = cur;
        cur.clear();
        last_literal = false;
    };
    auto skip_lazy = [&](size_t &i) {
        if (i < p.size() && p[i] == '?')
            ++i;
    };
    size_t i = 0;
    while (i < p.size()) {
        char c = p[i];
        switch (c) {
        case '\\':
            if (i + 1 >= p.size() || std::isalnum(static_cast<unsigned char>(p[i + 1]))) {
                // Character-class escapes, backreferences, \b, \xHH...
                end_run();
                i += 2;
            } else {
                cur.push_back(p[i + 1]);
                last_literal = true;
                i += 2;
            }
            break;
        case '[':
            end_run();
            i = skip_class(p, i);
            break;
        case '(':
            end_run();
            i = skip_group(p, i);
            break;
        case '*':
        case '?':
        case '{':
            // The preceding atom may be absent.
            if (last_literal && !cur.empty())
                cur.pop_back();
            end_run();
            if (c == '{') {
                size_t close = p.find('}', i);
                i = close == std::string_view::npos ? p.size() : close + 1;
            } else {
                ++i;
            }
            skip_lazy(i);
            break;
        case '+':
            end_run();
            ++i;
            skip_lazy(i);
            break;
        case '.':
        case '^':
        case '$':
            end_run();
            ++i;
            break;
        default:
            cur.push_back(c);
            last_literal = true;
            ++i;
        }
    }
    end_run();
    return best;
}

PatternSet::PatternSet(std::vector<std::string> patterns) : _patterns(std::move(patterns)) {
    for (size_t i = 0; i < _patterns.size(); ++i) {
        const std::string &p = _patterns[i];
        if (p.empty())
            throw std::invalid_argument("pattern " + std::to_string(i + 1) + " is empty");
        try {
            _regex.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error &e) {
            throw std::invalid_argument("pattern " + std::to_string(i + 1) + " '" + p +
                                        "' is invalid: " + e.what());
        }
        _plain.push_back(is_plain_literal(p));
        _literals.push_back(_plain.back() ? p : required_literal(p));
        if (_literals.back().empty())
            _always.push_back(uint32_t(i));
    }
    build();
}

void PatternSet::build() {
    _nodes.clear();
    _nodes.emplace_back();
    _nodes[0].next.fill(-1);
    for (size_t i = 0; i < _literals.size(); ++i) {
        const std::string &lit = _literals[i];
        if (lit.empty())
            continue;
        int32_t s = 0;
        for (unsigned char c : lit) {
            if (_nodes[size_t(s)].next[c] < 0) {
                _nodes[size_t(s)].next[c] = int32_t(_nodes.size());
                _nodes.emplace_back();
                _nodes.back().next.fill(-1);
            }
            s = _nodes[size_t(s)].next[c];
        }
        _nodes[size_t(s)].out.push_back(uint32_t(i));
    }
    // Breadth-first completion of the goto function into a DFA.
    std::deque<int32_t> q;
    for (int c = 0; c < 256; ++c) {
        int32_t &n = _nodes[0].next[size_t(c)];
        if (n < 0) {
            n = 0;
        } else {
            _nodes[size_t(n)].fail = 0;
            q.push_back(n);
        }
    }
    while (!q.empty()) {
        int32_t s = q.front();
        q.pop_front();
        Node &node = _nodes[size_t(s)];
        const Node &f = _nodes[size_t(node.fail)];
        node.out.insert(node.out.end(), f.out.begin(), f.out.end());
        for (int c = 0; c < 256; ++c) {
            int32_t t = _nodes[size_t(s)].next[size_t(c)];
            int32_t via_fail = _nodes[size_t(_nodes[size_t(s)].fail)].next[size_t(c)];
            if (t < 0) {
                _nodes[size_t(s)].next[size_t(c)] = via_fail;
            } else {
                _nodes[size_t(t)].fail = via_fail;
                q.push_back(t);
            }
        }
    }
}

bool PatternSet::confirm(size_t i, std::span<const uint8_t> data) const {
    if (_plain[i])
        return true;
    auto first = reinterpret_cast<const char *>(data.data());
    return std::regex_search(first, first + data.size(), _regex[i]);
}

void PatternSet::match(std::span<const uint8_t> data, std::vector<uint32_t> &out) const {
    out.clear();
    int32_t s = 0;
    for (uint8_t c : data) {
        s = _nodes[size_t(s)].next[c];
        const auto &o = _nodes[size_t(s)].out;
        out.insert(out.end(), o.begin(), o.end());
    }
    out.insert(out.end(), _always.begin(), _always.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    out.erase(std::remove_if(out.begin(), out.end(),
                             [&](uint32_t i) { return !confirm(i, data); }),
              out.end());
}

bool PatternSet::any(std::span<const uint8_t> data) const {
    std::vector<uint32_t> hits;
    match(data, hits);
    return !hits.empty();
}

std::vector<std::string> read_pattern_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot read pattern file " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.empty())
            out.push_back(line);
    }
    return out;
}

namespace {

// PatternMatch(PATTERNFILE): payloads matching any pattern leave on port 1,
// everything else on port 0.
class PatternMatch final : public Element {
  public:
    const char *class_name() const override { return "PatternMatch"; }

    void configure(const std::vector<std::string> &args) override {
        if (args.size() != 1)
            throw std::invalid_argument("expected PatternMatch(PATTERNFILE)");
        auto pats = read_pattern_file(instance().resolve_path(config::unquote(args[0])));
        if (pats.empty())
            throw std::invalid_argument("pattern file is empty");
        _set = std::make_unique<PatternSet>(std::move(pats));
    }

    void initialize() override {
        for (size_t i = 0; i < _set->size(); ++i)
            _hits.push_back(&counter("pattern" + std::to_string(i + 1)));
        _matched = &counter("matched");
        _hit_scratch.reserve(_set->size());
    }

    void push(int, Packet p) override {
        net::IPv4Info ip;
        std::span<const uint8_t> payload;
        if (net::parse_ipv4_frame(p.bytes(), ip) == net::FrameKind::IPv4)
            payload = p.bytes().subspan(ip.payload_offset, ip.payload_len);
        if (payload.empty()) {
            output(0, p);
            return;
        }
        _set->match(payload, _hit_scratch);
        if (_hit_scratch.empty()) {
            output(0, p);
            return;
        }
        for (uint32_t i : _hit_scratch)
            ++*_hits[i];
        ++*_matched;
        output(1, p);
    }

  private:
    std::unique_ptr<PatternSet> _set;
    std::vector<uint64_t *> _hits;
    std::vector<uint32_t> _hit_scratch;
    uint64_t *_matched = nullptr;
};

} // namespace

void register_patternmatch(config::ElementRegistry &r) {
    r.add(make_class<PatternMatch>("PatternMatch", fixed_ports(1, 2)));
}

} // namespace slick::elements
