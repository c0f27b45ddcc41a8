#ifndef SLICK_RUNTIME_HH
#define SLICK_RUNTIME_HH

// Running instances: element instantiation, the poll-mode task scheduler and
// the timer event scheduler.
//
// Timer optimization. With it enabled, immediately-scheduled events never
// touch the clock: they go on a FIFO that is drained in the same scheduler
// pass, ahead of timestamped events. The clock is read once per pass only
// while timestamped (periodic or one-shot) events are pending. With it
// disabled the scheduler behaves like stock Click: scheduling an immediate
// event stamps it with now(), and every pass reads the clock to look for
// due timers.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include <slick/chain.hh>
#include <slick/clock.hh>
#include <slick/config.hh>
#include <slick/crypto.hh>
#include <slick/element.hh>
#include <slick/packet.hh>
#include <slick/testdevice.hh>

namespace slick {

enum class Role { Primary, Secondary };

const char *role_name(Role r);

// Process-wide shared state: the untrusted packet memory, the ring registry
// and the in-process test NICs.
struct Platform {
    HugePageMemory memory;
    chain::RingRegistry rings;
    TestDeviceRegistry devices;
};

struct InstanceSettings {
    std::string id = "slick0";
    Role role = Role::Primary;
    std::shared_ptr<Platform> platform;

    ClockKind clock = ClockKind::Host;
    // Overrides the clock's default per-read cost when set.
    std::optional<uint64_t> clock_read_cost_ns;
    bool timer_optimization = true;
    uint32_t burst = 32;
    bool yield_when_idle = true;

    size_t enclave_size = Enclave::kDefaultSize;
    uint32_t untrusted_pool_capacity = 4096;
    uint32_t trusted_pool_capacity = 2048;
    uint32_t buf_size = PacketPool::kDefaultBufSize;

    // Provisioned secrets, referenced from element arguments as $name.
    std::map<std::string, std::vector<uint8_t>> secrets;
    // Sealing-key derivation bound to this instance's identity; referenced
    // from element arguments as "derive".
    std::function<crypto::Key256(std::string_view purpose)> derive_key;

    // Relative paths in element arguments resolve against this directory.
    std::string base_dir;
    // Replaces the path of a StateFile element when set.
    std::optional<std::string> state_file_override;
    // Run the state restore step at startup.
    bool restore_state = true;
};

struct TimerEvent {
    enum class Kind { Immediate, Periodic, OneShot };

    Kind kind = Kind::OneShot;
    uint64_t deadline_ns = 0;
    uint64_t interval_ns = 0;
    Element *element = nullptr; // owner, informational
    std::function<void()> action;
};

// Hard failure that stops the instance (e.g. an exhausted nonce space).
class FatalError : public Error {
  public:
    using Error::Error;
};

struct StopCondition {
    uint64_t max_rx = 0;          // stop once this many packets were received
    uint64_t max_tx = 0;          // ... or transmitted
    uint64_t max_iterations = 0;  // scheduler passes
    uint64_t wall_ns = 0;         // host time
    uint64_t virtual_ns = 0;      // instance clock time (not accounted)
    bool drain = false;           // stop when all sources are exhausted and idle
    const std::atomic<bool> *stop_flag = nullptr;
    std::function<bool()> until;  // checked every pass
};

struct RunStats {
    uint64_t rx = 0;
    uint64_t tx = 0;
    uint64_t drops = 0;
    uint64_t errors = 0;
    uint64_t iterations = 0;
    uint64_t clock_reads = 0;
    uint64_t clock_cost_ns = 0;
    uint64_t duration_ns = 0;
    std::map<std::string, uint64_t> counters; // "element.counter" -> value

    std::string to_json() const;
};

class Instance {
  public:
    Instance(const config::CheckedGraph &graph, InstanceSettings settings);
    ~Instance();
    Instance(const Instance &) = delete;
    Instance &operator=(const Instance &) = delete;

    const std::string &id() const { return _settings.id; }
    Role role() const { return _settings.role; }
    const InstanceSettings &settings() const { return _settings; }
    Platform &platform() const { return *_settings.platform; }

    ClockSource &clock() { return _clock; }
    Enclave &enclave() { return *_enclave; }
    EnclaveBounds bounds() const { return _enclave->bounds(); }
    PacketPool &untrusted_pool() { return *_untrusted; }
    PacketPool &trusted_pool() { return *_trusted; }

    const std::vector<std::unique_ptr<Element>> &elements() const { return _elements; }
    Element *find(std::string_view name) const;
    size_t task_count() const { return _tasks.size(); }

    void count_rx(uint64_t n = 1) { _rx += n; }
    void count_tx(uint64_t n = 1) { _tx += n; }
    void count_drop() { ++_drops; }
    void count_error() { ++_errors; }

    // Returns an id usable with cancel_timer.
    uint64_t schedule_timer(TimerEvent ev);
    uint64_t schedule_periodic(uint64_t interval_ns, std::function<void()> action,
                               Element *owner = nullptr);
    uint64_t schedule_immediate(std::function<void()> action, Element *owner = nullptr);
    void cancel_timer(uint64_t id);
    size_t pending_timers() const;
    bool has_timestamped_timers() const { return !_timed.empty(); }
    uint64_t timers_fired() const { return _timers_fired; }

    // One scheduler pass: poll every task with the burst budget, then fire
    // due timers. Returns the number of packets the tasks handled.
    uint32_t run_once();
    RunStats run(const StopCondition &stop);
    RunStats stats() const;
    // True when every source is exhausted and nothing is queued anywhere.
    bool drained() const;

    // "element.handler" addressing.
    std::string read_handler(std::string_view path) const;
    void write_handler(std::string_view path, std::string_view value = {});

    // Secrets and paths for element configuration.
    const std::vector<uint8_t> *secret(std::string_view name) const;
    std::string resolve_path(std::string_view p) const;

    // Work to run once every element has initialized (state restore).
    void on_started(std::function<void()> f) { _startup.push_back(std::move(f)); }

  private:
    struct Timed {
        uint64_t deadline;
        uint64_t seq;
        uint64_t id;
        bool operator>(const Timed &o) const {
            return deadline != o.deadline ? deadline > o.deadline : seq > o.seq;
        }
    };
    struct Entry {
        TimerEvent ev;
        bool cancelled = false;
    };

    void run_timers();
    void fire(uint64_t id, uint64_t now, bool timestamped);

    InstanceSettings _settings;
    ClockSource _clock;
    std::unique_ptr<Enclave> _enclave;
    std::shared_ptr<PacketPool> _trusted;
    std::shared_ptr<PacketPool> _untrusted;
    std::vector<std::unique_ptr<Element>> _elements;
    std::vector<Element *> _tasks;
    std::vector<std::function<void()>> _startup;

    uint64_t _rx = 0, _tx = 0, _drops = 0, _errors = 0, _iterations = 0;

    uint64_t _next_timer_id = 1;
    uint64_t _timer_seq = 0;
    uint64_t _timers_fired = 0;
    std::map<uint64_t, Entry> _timers;
    std::vector<uint64_t> _immediate;
    std::vector<uint64_t> _immediate_scratch;
    std::priority_queue<Timed, std::vector<Timed>, std::greater<>> _timed;

    friend std::unique_ptr<Instance> instantiate(const config::CheckedGraph &,
                                                 InstanceSettings);
    void build(const config::CheckedGraph &graph);
};

// Builds every element, pre-allocates pools and per-task storage, runs the
// startup hooks. Throws ElementInitError.
std::unique_ptr<Instance> instantiate(const config::CheckedGraph &graph,
                                      InstanceSettings settings);

// Reads SLICK_CLOCK (host | nicptp); returns `fallback` when unset.
ClockKind clock_from_env(ClockKind fallback = ClockKind::Host);

} // namespace slick

#endif
