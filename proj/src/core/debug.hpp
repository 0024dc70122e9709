#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <stdexcept>
#include <string>

// Minimal stderr logger. Level comes from CASCADE_LOG (error|warn|info|debug),
// default warn.

namespace cascade::logging {

enum Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline int configured_level() {
    static int level = [] {
        const char* e = std::getenv("CASCADE_LOG");
        if (e == nullptr) return static_cast<int>(kWarn);
        if (std::strcmp(e, "error") == 0) return static_cast<int>(kError);
        if (std::strcmp(e, "info") == 0) return static_cast<int>(kInfo);
        if (std::strcmp(e, "debug") == 0) return static_cast<int>(kDebug);
        return static_cast<int>(kWarn);
    }();
    return level;
}

inline void logf(Level lvl, const char* tag, const char* fmt, ...) {
    if (static_cast<int>(lvl) > configured_level()) return;
    char buf[1024];
    va_list ap;
    va_start(ap, fmt);
    vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    static const char* names[] = {"ERROR", "WARN", "INFO", "DEBUG"};
    fprintf(stderr, "[cascade %s] %s: %s\n", names[lvl], tag, buf);
}

}  // namespace cascade::logging

// Precondition check that throws instead of aborting, so violations are
// testable.
#define CASC_ASSERT(cond, what)                                                      \
    do {                                                                             \
        if (!(cond))                                                                 \
            throw std::logic_error(std::string("precondition violated at ") +       \
                                   __FILE__ + ":" + std::to_string(__LINE__) + ": " + (what)); \
    } while (0)

#define CASC_ERROR(tag, ...) ::cascade::logging::logf(::cascade::logging::kError, tag, __VA_ARGS__)
#define CASC_WARN(tag, ...) ::cascade::logging::logf(::cascade::logging::kWarn, tag, __VA_ARGS__)
#define CASC_INFO(tag, ...) ::cascade::logging::logf(::cascade::logging::kInfo, tag, __VA_ARGS__)
#define CASC_DEBUG(tag, ...) ::cascade::logging::logf(::cascade::logging::kDebug, tag, __VA_ARGS__)
