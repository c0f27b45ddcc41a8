#ifndef SLICK_LOG_HH
#define SLICK_LOG_HH

#include <functional>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace slick::log {

enum class Level { Debug, Info, Warn, Error };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink; returns the previous one. Passing an empty
// function restores the stderr sink.
Sink set_sink(Sink sink);
void set_level(Level min);
void write(Level level, std::string_view msg);

template <typename... Args>
void debug(fmt::format_string<Args...> f, Args &&...args) {
    write(Level::Debug, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void info(fmt::format_string<Args...> f, Args &&...args) {
    write(Level::Info, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void warn(fmt::format_string<Args...> f, Args &&...args) {
    write(Level::Warn, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void error(fmt::format_string<Args...> f, Args &&...args) {
    write(Level::Error, fmt::format(f, std::forward<Args>(args)...));
}

} // namespace slick::log

#endif
