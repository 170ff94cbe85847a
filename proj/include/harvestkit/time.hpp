#pragma once

#include <atomic>
#include <chrono>
#include <string>

namespace harvestkit {

/// UTC instant at second granularity.
using Instant = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline constexpr Seconds hours(long long h) { return Seconds{h * 3600}; }
inline constexpr Seconds days(long long d) { return Seconds{d * 86400}; }

/// `YYYY-MM-DDThh:mm:ssZ`
std::string format_datestamp(Instant t);
/// `YYYY-MM-DD`
std::string format_day(Instant t);

Instant make_instant(int year, unsigned month, unsigned day, unsigned hour = 0, unsigned minute = 0,
                     unsigned second = 0);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Instant now() const = 0;
};

class SystemClock final : public Clock {
public:
    Instant now() const override {
        return std::chrono::floor<Seconds>(std::chrono::system_clock::now());
    }
};

/// Test and simulation clock; only moves when told to.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Instant start = Instant{}) : t_(start.time_since_epoch().count()) {}
    Instant now() const override { return Instant{Seconds{t_.load()}}; }
    void set(Instant t) { t_.store(t.time_since_epoch().count()); }
    void advance(Seconds d) { t_.fetch_add(d.count()); }

private:
    std::atomic<long long> t_;
};

}  // namespace harvestkit
