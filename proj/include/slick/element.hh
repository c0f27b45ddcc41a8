#ifndef SLICK_ELEMENT_HH
#define SLICK_ELEMENT_HH

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <slick/error.hh>
#include <slick/packet.hh>

namespace slick {

class Instance;

// Element base class. Every element receives packets through push() and
// must either emit each one with output() or dispose of it with kill().
// Sources additionally implement run_task(); handlers are called only
// between scheduler iterations.
class Element {
  public:
    virtual ~Element() = default;

    virtual const char *class_name() const = 0;

    // Throw std::invalid_argument (or ElementInitError) on bad arguments.
    virtual void configure(const std::vector<std::string> &args);
    // Called once every element is configured and connected.
    virtual void initialize() {}

    virtual void push(int port, Packet p);

    // Sources: emit up to `budget` packets, return how many were handled.
    virtual uint32_t run_task(uint32_t budget);
    // Sources: true once no further input can ever arrive.
    virtual bool task_exhausted() const { return true; }
    // Elements holding packets (transmit queues) report them here.
    virtual bool has_pending() const { return false; }

    // Persistence hooks. The byte layout is up to the element.
    virtual bool has_state() const { return false; }
    virtual std::vector<uint8_t> state_write() const { return {}; }
    virtual void state_read(std::span<const uint8_t>) {}

    const std::string &name() const { return _name; }
    Instance &instance() const { return *_instance; }

    // Named statistics; references stay valid for the element's lifetime.
    uint64_t &counter(const std::string &name) { return _counters[name]; }
    const std::map<std::string, uint64_t> &counters() const { return _counters; }

    bool has_read_handler(std::string_view h) const;
    bool has_write_handler(std::string_view h) const;
    // Throw std::out_of_range for unknown handlers.
    std::string call_read(std::string_view h) const;
    void call_write(std::string_view h, std::string_view value);

    uint16_t noutputs() const { return uint16_t(_outputs.size()); }
    bool output_connected(int port) const;

  protected:
    void add_read_handler(std::string h, std::function<std::string()> f);
    void add_write_handler(std::string h, std::function<void(std::string_view)> f);

    void output(int port, Packet p);
    // Frees the packet and counts it as dropped by the instance.
    void kill(Packet &p);

  private:
    friend class Instance;
    struct Target {
        Element *element = nullptr;
        int port = 0;
    };

    std::string _name;
    Instance *_instance = nullptr;
    std::vector<Target> _outputs;
    std::map<std::string, uint64_t> _counters;
    std::map<std::string, std::function<std::string()>, std::less<>> _read_handlers;
    std::map<std::string, std::function<void(std::string_view)>, std::less<>> _write_handlers;
};

// Click-style argument access: "KEYWORD value" arguments are picked out by
// name, everything else is positional in order.
class Args {
  public:
    explicit Args(const std::vector<std::string> &args);

    std::optional<std::string> keyword(std::string_view key);
    std::optional<uint64_t> keyword_uint(std::string_view key);
    std::optional<bool> keyword_bool(std::string_view key);

    // Arguments not consumed by keyword lookups, in order.
    std::vector<std::string> positional() const;
    // Fails when a remaining argument looks like an unknown KEYWORD.
    void reject_unknown_keywords() const;

  private:
    std::vector<std::string> _args;
    std::vector<bool> _used;
};

std::optional<uint64_t> parse_uint(std::string_view s);
std::optional<bool> parse_bool(std::string_view s);

} // namespace slick

#endif
