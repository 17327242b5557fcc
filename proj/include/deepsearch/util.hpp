#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace deepsearch {

using Clock = std::chrono::steady_clock;

/// Absolute point in time after which a call must give up.
class Deadline {
public:
    Deadline() : at_(Clock::time_point::max()) {}
    explicit Deadline(Clock::time_point at) : at_(at) {}

    static Deadline never() { return Deadline{}; }
    static Deadline after(std::chrono::milliseconds d) { return Deadline{Clock::now() + d}; }

    bool unbounded() const { return at_ == Clock::time_point::max(); }
    bool expired() const { return !unbounded() && Clock::now() >= at_; }
    Clock::time_point at() const { return at_; }

    std::chrono::milliseconds remaining() const;

    /// The earlier of this deadline and now + d.
    Deadline tightened(std::chrono::milliseconds d) const;

private:
    Clock::time_point at_;
};

/// Sleeps for `latency`, but never past `deadline`. Returns false when the
/// deadline cut the sleep short.
bool sleep_within(std::chrono::milliseconds latency, const Deadline& deadline);

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// Number of UTF-8 code points (invalid bytes count as one each).
std::size_t utf8_length(std::string_view s);

/// Longest prefix of `s` holding at most `max_chars` code points.
std::string_view utf8_prefix(std::string_view s, std::size_t max_chars);

/// Length of the UTF-8 sequence starting at s[i], 1 for invalid bytes.
std::size_t utf8_sequence_length(std::string_view s, std::size_t i);

/// Current wall-clock time as ISO-8601 UTC with milliseconds.
std::string iso_timestamp();

/// Runs fn(0..count-1) on at most `width` worker threads and waits for all of
/// them. Exceptions escaping fn terminate the process, so callers catch.
void parallel_for(std::size_t count, std::size_t width, const std::function<void(std::size_t)>& fn);

} // namespace deepsearch
