#ifndef SLICK_ELEMENTS_INTERNAL_HH
#define SLICK_ELEMENTS_INTERNAL_HH

#include <memory>

#include <slick/config.hh>
#include <slick/element.hh>
#include <slick/elements.hh>
#include <slick/runtime.hh>

namespace slick::elements {

void register_basic(config::ElementRegistry &r);
void register_devices(config::ElementRegistry &r);
void register_firewall(config::ElementRegistry &r);
void register_routetable(config::ElementRegistry &r);
void register_classifier(config::ElementRegistry &r);
void register_arpresponder(config::ElementRegistry &r);
void register_patternmatch(config::ElementRegistry &r);
void register_secure(config::ElementRegistry &r);
void register_dpdkring(config::ElementRegistry &r);
void register_statefile(config::ElementRegistry &r);

inline config::PortSpec fixed_ports(uint16_t in, uint16_t out,
                                    std::vector<bool> optional = {}) {
    config::PortSpec p;
    p.inputs = in;
    p.outputs = out;
    p.optional_outputs = std::move(optional);
    return p;
}

template <typename T>
config::ElementClass make_class(const char *name, config::PortSpec ports,
                                config::TaskKind task = config::TaskKind::None) {
    config::ElementClass c;
    c.name = name;
    c.ports = [ports](const std::vector<std::string> &) { return ports; };
    c.task = task;
    c.factory = [] { return std::make_unique<T>(); };
    return c;
}

} // namespace slick::elements

#endif
