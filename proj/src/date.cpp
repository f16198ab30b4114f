#include "trajgraph/date.hpp"

#include <cstdio>

namespace trajgraph {

namespace {

std::optional<Date> checked(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                       std::chrono::day{day}};
    if (!ymd.ok()) return std::nullopt;
    return Date(sys_days{ymd});
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    days_ = sys_days{year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                    std::chrono::day{day}}};
}

std::optional<Date> Date::make(int year, unsigned month, unsigned day) {
    return checked(year, month, day);
}

std::optional<Date> Date::parse_iso(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i == 4 || i == 7) continue;
        char c = text[i];
        if (c < '0' || c > '9') return std::nullopt;
        unsigned v = static_cast<unsigned>(c - '0');
        if (i < 4) y = y * 10 + static_cast<int>(v);
        else if (i < 7) m = m * 10 + v;
        else d = d * 10 + v;
    }
    return checked(y, m, d);
}

std::string Date::to_iso() const {
    using namespace std::chrono;
    year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return std::string(buf);
}

Date Date::plus_months(int n) const {
    using namespace std::chrono;
    year_month_day ymd{days_};
    year_month ym = year_month{ymd.year(), ymd.month()} + months{n};
    year_month_day target{ym.year(), ym.month(), ymd.day()};
    if (!target.ok()) target = ym.year() / ym.month() / last;
    return Date(sys_days{target});
}

}  // namespace trajgraph
