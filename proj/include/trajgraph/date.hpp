#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace trajgraph {

// Calendar date backed by std::chrono::sys_days. Serialized as ISO-8601.
class Date {
public:
    Date() : days_(std::chrono::sys_days{}) {}
    explicit Date(std::chrono::sys_days d) : days_(d) {}
    Date(int year, unsigned month, unsigned day);

    static std::optional<Date> parse_iso(std::string_view text);
    static std::optional<Date> make(int year, unsigned month, unsigned day);

    std::string to_iso() const;

    Date plus_days(long n) const { return Date(days_ + std::chrono::days{n}); }
    // Calendar-month arithmetic; day-of-month clamps to the target month's end.
    Date plus_months(int n) const;

    long days_until(const Date& other) const {
        return (other.days_ - days_).count();
    }

    std::chrono::sys_days raw() const { return days_; }

    auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_;
};

}  // namespace trajgraph
