#include "internal.hh"

namespace slick::elements {

const config::ElementRegistry &default_registry() {
    static const config::ElementRegistry reg = [] {
        config::ElementRegistry r;
        register_basic(r);
        register_devices(r);
        register_firewall(r);
        register_routetable(r);
        register_classifier(r);
        register_arpresponder(r);
        register_patternmatch(r);
        register_secure(r);
        register_dpdkring(r);
        register_statefile(r);
        return r;
    }();
    return reg;
}

} // namespace slick::elements
