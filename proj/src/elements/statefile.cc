#include "internal.hh"

#include <slick/log.hh>
#include <slick/persist.hh>

namespace slick::elements {
namespace {

// StateFile(KEY, PATH [, PERIOD ms])
//
// Restores element state once the graph is up and seals it every PERIOD
// milliseconds. Write handlers "seal" and "unseal" trigger either manually.
class StateFile final : public Element {
  public:
    const char *class_name() const override { return "StateFile"; }

    void configure(const std::vector<std::string> &args) override {
        Args a(args);
        auto period = a.keyword_uint("PERIOD");
        a.reject_unknown_keywords();
        auto pos = a.positional();
        if (pos.size() != 2)
            throw std::invalid_argument("expected StateFile(KEY, PATH [, PERIOD ms])");
        _spec.key = resolve_key(instance(), config::unquote(pos[0]), "statefile");
        const auto &override_path = instance().settings().state_file_override;
        _spec.path = override_path ? *override_path
                                   : instance().resolve_path(config::unquote(pos[1]));
        if (period && *period > 0)
            _spec.period_ns = *period * 1000000;
    }

    void initialize() override {
        _seals = &counter("seals");
        _restored = &counter("restored");
        add_write_handler("seal", [this](std::string_view) { seal(); });
        add_write_handler("unseal", [this](std::string_view) { unseal(); });
        add_read_handler("path", [this] { return _spec.path; });
        if (instance().settings().restore_state) {
            instance().on_started([this] {
                try {
                    unseal();
                } catch (const persist::MissingFile &) {
                    log::info("{}: no state file at {}, starting fresh", name(), _spec.path);
                }
            });
        }
        if (_spec.period_ns) {
            instance().schedule_periodic(
                *_spec.period_ns,
                [this] {
                    try {
                        seal();
                    } catch (const Error &e) {
                        log::error("{}: periodic seal failed: {}", name(), e.what());
                    }
                },
                this);
        }
    }

    ~StateFile() override { crypto::cleanse(_spec.key); }

  private:
    void seal() {
        persist::seal_state(instance(), _spec);
        ++*_seals;
    }

    void unseal() { *_restored += persist::unseal_state(instance(), _spec); }

    persist::StateFileSpec _spec;
    uint64_t *_seals = nullptr;
    uint64_t *_restored = nullptr;
};

} // namespace

void register_statefile(config::ElementRegistry &r) {
    r.add(make_class<StateFile>("StateFile", fixed_ports(0, 0)));
}

} // namespace slick::elements
