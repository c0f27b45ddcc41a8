#include <slick/runtime.hh>

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include <slick/log.hh>

namespace slick {

const char *role_name(Role r) { return r == Role::Primary ? "primary" : "secondary"; }

namespace {

ClockSource make_clock(const InstanceSettings &s) {
    ClockSource c = [&] {
        switch (s.clock) {
        case ClockKind::NicPtp: return ClockSource::nic_ptp();
        case ClockKind::InstrumentedTest: return ClockSource::instrumented();
        case ClockKind::Host: break;
        }
        return ClockSource::host();
    }();
    if (s.clock_read_cost_ns)
        c.set_read_cost_ns(*s.clock_read_cost_ns);
    return c;
}

InstanceSettings normalize(InstanceSettings s) {
    if (!s.platform)
        s.platform = std::make_shared<Platform>();
    if (s.burst == 0)
        s.burst = 1;
    return s;
}

} // namespace

ClockKind clock_from_env(ClockKind fallback) {
    const char *v = std::getenv("SLICK_CLOCK");
    if (!v || !*v)
        return fallback;
    auto k = parse_clock_kind(v);
    if (!k || *k == ClockKind::InstrumentedTest) {
        log::warn("ignoring SLICK_CLOCK={} (expected host or nicptp)", v);
        return fallback;
    }
    return *k;
}

Instance::Instance(const config::CheckedGraph &, InstanceSettings settings)
    : _settings(normalize(std::move(settings))), _clock(make_clock(_settings)) {}

Instance::~Instance() {
    // Return every buffer still referenced by queued state before the pools go.
    _elements.clear();
}

void Instance::build(const config::CheckedGraph &graph) {
    _enclave = std::make_unique<Enclave>(_settings.enclave_size);
    _trusted = pool_create(*_enclave, _settings.trusted_pool_capacity, _settings.buf_size);
    _untrusted = pool_create(_settings.platform->memory, _settings.untrusted_pool_capacity,
                             _settings.buf_size);

    _elements.reserve(graph.nodes.size());
    for (const auto &node : graph.nodes) {
        auto e = node.cls->factory();
        e->_name = node.decl->name;
        e->_instance = this;
        e->_outputs.resize(node.ports.outputs);
        _elements.push_back(std::move(e));
    }
    for (const auto &c : graph.graph->connections) {
        Element *from = _elements[graph.index_of(c.from.element)].get();
        Element *to = _elements[graph.index_of(c.to.element)].get();
        from->_outputs[c.from.port] = {to, c.to.port};
    }
    for (size_t i = 0; i < _elements.size(); ++i) {
        Element &e = *_elements[i];
        try {
            e.configure(graph.nodes[i].decl->args);
        } catch (const std::invalid_argument &x) {
            throw ElementInitError(e.name(), x.what());
        } catch (const ElementInitError &) {
            throw;
        } catch (const chain::RingError &) {
            throw;
        } catch (const Error &x) {
            throw ElementInitError(e.name(), x.what());
        }
    }
    for (size_t idx : graph.tasks)
        _tasks.push_back(_elements[idx].get());
    for (auto &e : _elements) {
        try {
            e->initialize();
        } catch (const std::invalid_argument &x) {
            throw ElementInitError(e->name(), x.what());
        }
    }
    for (auto &f : _startup)
        f();
    _startup.clear();
}

std::unique_ptr<Instance> instantiate(const config::CheckedGraph &graph,
                                      InstanceSettings settings) {
    std::unique_ptr<Instance> inst(new Instance(graph, std::move(settings)));
    inst->build(graph);
    return inst;
}

Element *Instance::find(std::string_view name) const {
    for (const auto &e : _elements)
        if (e->name() == name)
            return e.get();
    return nullptr;
}

// --- timers ----------------------------------------------------------------

uint64_t Instance::schedule_timer(TimerEvent ev) {
    uint64_t id = _next_timer_id++;
    bool immediate = ev.kind == TimerEvent::Kind::Immediate;
    if (immediate && !_settings.timer_optimization)
        ev.deadline_ns = _clock.now();
    uint64_t deadline = ev.deadline_ns;
    _timers.emplace(id, Entry{std::move(ev), false});
    if (immediate && _settings.timer_optimization)
        _immediate.push_back(id);
    else
        _timed.push(Timed{deadline, _timer_seq++, id});
    return id;
}

uint64_t Instance::schedule_periodic(uint64_t interval_ns, std::function<void()> action,
                                     Element *owner) {
    if (interval_ns == 0)
        throw std::invalid_argument("periodic timer needs a positive interval");
    TimerEvent ev;
    ev.kind = TimerEvent::Kind::Periodic;
    ev.interval_ns = interval_ns;
    ev.deadline_ns = _clock.now() + interval_ns;
    ev.element = owner;
    ev.action = std::move(action);
    return schedule_timer(std::move(ev));
}

uint64_t Instance::schedule_immediate(std::function<void()> action, Element *owner) {
    TimerEvent ev;
    ev.kind = TimerEvent::Kind::Immediate;
    ev.element = owner;
    ev.action = std::move(action);
    return schedule_timer(std::move(ev));
}

void Instance::cancel_timer(uint64_t id) {
    auto it = _timers.find(id);
    if (it != _timers.end())
        it->second.cancelled = true;
}

size_t Instance::pending_timers() const {
    size_t n = 0;
    for (const auto &[id, e] : _timers)
        n += e.cancelled ? 0 : 1;
    return n;
}

void Instance::fire(uint64_t id, uint64_t now, bool timestamped) {
    auto it = _timers.find(id);
    if (it == _timers.end())
        return;
    if (it->second.cancelled) {
        _timers.erase(it);
        return;
    }
    TimerEvent &ev = it->second.ev;
    ++_timers_fired;
    if (ev.action)
        ev.action();
    // The action may have cancelled or rescheduled; look the entry up again.
    it = _timers.find(id);
    if (it == _timers.end())
        return;
    if (!it->second.cancelled && it->second.ev.kind == TimerEvent::Kind::Periodic &&
        timestamped) {
        it->second.ev.deadline_ns += it->second.ev.interval_ns;
        _timed.push(Timed{it->second.ev.deadline_ns, _timer_seq++, id});
    } else {
        _timers.erase(it);
    }
    (void)now;
}

void Instance::run_timers() {
    if (_settings.timer_optimization) {
        if (!_immediate.empty()) {
            _immediate_scratch.swap(_immediate);
            for (uint64_t id : _immediate_scratch)
                fire(id, 0, false);
            _immediate_scratch.clear();
        }
        if (_timed.empty()) [[likely]]
            return;
    }
    uint64_t now = _clock.now();
    while (!_timed.empty() && _timed.top().deadline <= now) {
        Timed t = _timed.top();
        _timed.pop();
        fire(t.id, now, true);
    }
}

// --- scheduler -------------------------------------------------------------

uint32_t Instance::run_once() {
    ++_iterations;
    uint32_t work = 0;
    for (Element *t : _tasks) {
        try {
            work += t->run_task(_settings.burst);
        } catch (const FatalError &) {
            throw;
        } catch (const std::exception &x) {
            ++_errors;
            log::error("{}: task {} failed: {}", id(), t->name(), x.what());
        }
    }
    run_timers();
    return work;
}

bool Instance::drained() const {
    if (!_immediate.empty())
        return false;
    for (Element *t : _tasks)
        if (!t->task_exhausted())
            return false;
    for (const auto &e : _elements)
        if (e->has_pending())
            return false;
    return true;
}

RunStats Instance::run(const StopCondition &stop) {
    const uint64_t wall_start = wall_ns();
    const uint64_t virt_start = _clock.peek();
    const uint64_t iter_start = _iterations;
    for (;;) {
        if (stop.stop_flag && stop.stop_flag->load(std::memory_order_relaxed))
            break;
        if (stop.until && stop.until())
            break;
        uint32_t work = run_once();
        if (stop.max_rx && _rx >= stop.max_rx)
            break;
        if (stop.max_tx && _tx >= stop.max_tx)
            break;
        if (stop.max_iterations && _iterations - iter_start >= stop.max_iterations)
            break;
        if (stop.virtual_ns && _clock.peek() - virt_start >= stop.virtual_ns)
            break;
        if (stop.wall_ns && wall_ns() - wall_start >= stop.wall_ns)
            break;
        if (work == 0) {
            if (stop.drain && drained())
                break;
            if (_settings.yield_when_idle)
                std::this_thread::yield();
        }
    }
    RunStats s = stats();
    s.duration_ns = wall_ns() - wall_start;
    return s;
}

RunStats Instance::stats() const {
    RunStats s;
    s.rx = _rx;
    s.tx = _tx;
    s.drops = _drops;
    s.errors = _errors;
    s.iterations = _iterations;
    s.clock_reads = _clock.read_count();
    s.clock_cost_ns = _clock.virtual_cost_ns();
    for (const auto &e : _elements)
        for (const auto &[k, v] : e->counters())
            s.counters[e->name() + "." + k] = v;
    return s;
}

std::string RunStats::to_json() const {
    nlohmann::ordered_json j;
    j["rx"] = rx;
    j["tx"] = tx;
    j["drops"] = drops;
    j["errors"] = errors;
    j["iterations"] = iterations;
    j["clock_reads"] = clock_reads;
    j["clock_cost_ns"] = clock_cost_ns;
    j["duration_ns"] = duration_ns;
    j["counters"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : counters)
        j["counters"][k] = v;
    return j.dump();
}

// --- handlers and configuration helpers ----------------------------------

namespace {

std::pair<std::string_view, std::string_view> split_handler(std::string_view path) {
    size_t dot = path.find('.');
    if (dot == std::string_view::npos)
        throw std::out_of_range("handler path must be element.handler");
    return {path.substr(0, dot), path.substr(dot + 1)};
}

} // namespace

std::string Instance::read_handler(std::string_view path) const {
    auto [el, h] = split_handler(path);
    Element *e = find(el);
    if (!e)
        throw std::out_of_range("no element named '" + std::string(el) + "'");
    return e->call_read(h);
}

void Instance::write_handler(std::string_view path, std::string_view value) {
    auto [el, h] = split_handler(path);
    Element *e = find(el);
    if (!e)
        throw std::out_of_range("no element named '" + std::string(el) + "'");
    e->call_write(h, value);
}

const std::vector<uint8_t> *Instance::secret(std::string_view name) const {
    auto it = _settings.secrets.find(std::string(name));
    return it == _settings.secrets.end() ? nullptr : &it->second;
}

std::string Instance::resolve_path(std::string_view p) const {
    std::filesystem::path path(p);
    if (path.is_absolute() || _settings.base_dir.empty())
        return path.string();
    if (std::filesystem::exists(path))
        return path.string();
    return (std::filesystem::path(_settings.base_dir) / path).string();
}

} // namespace slick
