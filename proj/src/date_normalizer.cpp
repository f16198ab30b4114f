#include "trajgraph/date_normalizer.hpp"

#include <array>
#include <cctype>
#include <string>
#include <vector>

#include "trajgraph/common.hpp"

namespace trajgraph::ingest {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

std::optional<int> to_int(std::string_view s) {
    if (!all_digits(s) || s.size() > 6) return std::nullopt;
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

std::optional<unsigned> month_from_name(std::string_view token) {
    static const std::array<const char*, 12> names = {"january",  "february", "march",
                                                      "april",    "may",      "june",
                                                      "july",     "august",   "september",
                                                      "october",  "november", "december"};
    for (unsigned i = 0; i < names.size(); ++i) {
        std::string_view full = names[i];
        if (token == full) return i + 1;
        if (token.size() == 3 && full.substr(0, 3) == token) return i + 1;
    }
    return std::nullopt;
}

std::optional<Date> parse_slashed(const std::string& s, DateLocale locale) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == '/') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3) return std::nullopt;
    auto a = to_int(parts[0]), b = to_int(parts[1]), y = to_int(parts[2]);
    if (!a || !b || !y || parts[2].size() != 4) return std::nullopt;
    unsigned month = static_cast<unsigned>(locale == DateLocale::US ? *a : *b);
    unsigned day = static_cast<unsigned>(locale == DateLocale::US ? *b : *a);
    return Date::make(*y, month, day);
}

// "jan 5, 2010" / "january 5 2010" / "5 jan 2010"
std::optional<Date> parse_month_name(const std::vector<std::string>& words) {
    if (words.size() != 3) return std::nullopt;
    auto strip_comma = [](std::string w) {
        while (!w.empty() && (w.back() == ',' || w.back() == '.')) w.pop_back();
        return w;
    };
    std::string w0 = strip_comma(words[0]);
    std::string w1 = strip_comma(words[1]);
    std::string w2 = strip_comma(words[2]);
    auto year = to_int(w2);
    if (!year || w2.size() != 4) return std::nullopt;
    if (auto m = month_from_name(w0)) {
        auto d = to_int(w1);
        if (!d) return std::nullopt;
        return Date::make(*year, *m, static_cast<unsigned>(*d));
    }
    if (auto m = month_from_name(w1)) {
        auto d = to_int(w0);
        if (!d) return std::nullopt;
        return Date::make(*year, *m, static_cast<unsigned>(*d));
    }
    return std::nullopt;
}

std::optional<Date> parse_relative(const std::vector<std::string>& words,
                                   std::optional<Date> dct) {
    if (words.size() == 1) {
        if (words[0] == "today") return dct;
        if (words[0] == "yesterday") return dct ? std::optional(dct->plus_days(-1)) : std::nullopt;
        if (words[0] == "tomorrow") return dct ? std::optional(dct->plus_days(1)) : std::nullopt;
        return std::nullopt;
    }
    if (words.size() != 3 || !dct) return std::nullopt;
    auto n = to_int(words[0]);
    if (!n) return std::nullopt;
    const std::string& unit = words[1];
    const std::string& dir = words[2];
    int sign;
    if (dir == "ago") sign = -1;
    else if (dir == "later") sign = 1;
    else return std::nullopt;
    if (unit == "day" || unit == "days") return dct->plus_days(sign * *n);
    if (unit == "week" || unit == "weeks") return dct->plus_days(sign * *n * 7);
    if (unit == "month" || unit == "months") return dct->plus_months(sign * *n);
    return std::nullopt;
}

}  // namespace

std::optional<Date> normalize_date(std::string_view text, std::optional<Date> dct,
                                   DateLocale locale) {
    std::string s = lowercase(trim(text));
    if (s.empty()) return std::nullopt;

    if (auto d = Date::parse_iso(s)) return d;
    if (s.find('/') != std::string::npos) return parse_slashed(s, locale);

    std::vector<std::string> words = split_words(s);
    if (auto d = parse_month_name(words)) return d;
    return parse_relative(words, dct);
}

}  // namespace trajgraph::ingest
