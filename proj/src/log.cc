#include <slick/log.hh>

#include <atomic>
#include <cstdio>
#include <mutex>

namespace slick::log {

namespace {

std::mutex sink_lock;
Sink current_sink;
std::atomic<int> min_level{static_cast<int>(Level::Info)};

const char *level_name(Level l) {
    switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warning";
    case Level::Error: return "error";
    }
    return "?";
}

} // namespace

Sink set_sink(Sink sink) {
    std::lock_guard<std::mutex> g(sink_lock);
    Sink old = std::move(current_sink);
    current_sink = std::move(sink);
    return old;
}

void set_level(Level min) { min_level.store(static_cast<int>(min)); }

void write(Level level, std::string_view msg) {
    if (static_cast<int>(level) < min_level.load(std::memory_order_relaxed))
        return;
    std::lock_guard<std::mutex> g(sink_lock);
    if (current_sink) {
        current_sink(level, msg);
        return;
    }
    std::fprintf(stderr, "slick: %s: %.*s\n", level_name(level),
                 static_cast<int>(msg.size()), msg.data());
}

} // namespace slick::log
