#include "internal.hh"

namespace slick::elements {

namespace {

std::vector<uint8_t> parse_hex_bytes(std::string_view s, std::string_view what) {
    if (s.empty() || s.size() % 2)
        throw std::invalid_argument("classifier " + std::string(what) +
                                    " needs an even number of hex digits");
    try {
        return crypto::from_hex(s);
    } catch (const std::exception &) {
        throw std::invalid_argument("classifier " + std::string(what) + " is not hex: '" +
                                    std::string(s) + "'");
    }
}

} // namespace

ClassifierPattern parse_classifier_pattern(std::string_view s) {
    ClassifierPattern pat;
    size_t i = 0;
    bool saw_default = false;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
            ++j;
        if (j == i)
            break;
        std::string_view t = s.substr(i, j - i);
        i = j;
        if (t == "-") {
            saw_default = true;
            continue;
        }
        size_t slash = t.find('/');
        if (slash == std::string_view::npos)
            throw std::invalid_argument("classifier term must be OFFSET/HEX: '" +
                                        std::string(t) + "'");
        auto off = parse_uint(t.substr(0, slash));
        if (!off || *off > 65535)
            throw std::invalid_argument("bad classifier offset in '" + std::string(t) + "'");
        std::string_view rest = t.substr(slash + 1);
        size_t pct = rest.find('%');
        ClassifierTerm term;
        term.offset = uint32_t(*off);
        term.value = parse_hex_bytes(rest.substr(0, pct), "value");
        if (pct != std::string_view::npos) {
            term.mask = parse_hex_bytes(rest.substr(pct + 1), "mask");
            if (term.mask.size() != term.value.size())
                throw std::invalid_argument("classifier mask and value differ in length");
        } else {
            term.mask.assign(term.value.size(), 0xff);
        }
        for (size_t k = 0; k < term.value.size(); ++k)
            term.value[k] &= term.mask[k];
        pat.terms.push_back(std::move(term));
    }
    if (saw_default && !pat.terms.empty())
        throw std::invalid_argument("'-' cannot be combined with other terms");
    if (!saw_default && pat.terms.empty())
        throw std::invalid_argument("empty classifier pattern");
    return pat;
}

bool ClassifierPattern::matches(std::span<const uint8_t> frame) const {
    for (const auto &t : terms) {
        if (t.offset + t.value.size() > frame.size())
            return false;
        for (size_t k = 0; k < t.value.size(); ++k)
            if ((frame[t.offset + k] & t.mask[k]) != t.value[k])
                return false;
    }
    return true;
}

namespace {

// Classifier(PATTERN, ...): the first matching pattern selects the output.
class Classifier final : public Element {
  public:
    const char *class_name() const override { return "Classifier"; }

    void configure(const std::vector<std::string> &args) override {
        for (const auto &a : args)
            _patterns.push_back(parse_classifier_pattern(a));
    }

    void initialize() override { _unmatched = &counter("unmatched"); }

    void push(int, Packet p) override {
        auto bytes = p.bytes();
        for (size_t i = 0; i < _patterns.size(); ++i) {
            if (_patterns[i].matches(bytes)) {
                output(int(i), p);
                return;
            }
        }
        ++*_unmatched;
        kill(p);
    }

  private:
    std::vector<ClassifierPattern> _patterns;
    uint64_t *_unmatched = nullptr;
};

} // namespace

void register_classifier(config::ElementRegistry &r) {
    config::ElementClass c = make_class<Classifier>("Classifier", fixed_ports(1, 1));
    c.ports = [](const std::vector<std::string> &args) {
        if (args.empty())
            throw std::invalid_argument("Classifier needs at least one pattern");
        return fixed_ports(1, uint16_t(args.size()));
    };
    r.add(std::move(c));
}

} // namespace slick::elements
