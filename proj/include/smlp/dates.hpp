#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smlp {

/** A calendar date with day precision, stored as days since 1970-01-01.
 *
 * All log and collection timestamps are truncated to this resolution;
 * monthly buckets are anchored to the first of the month. */
struct Date {
    std::int32_t days = 0; // days since 1970-01-01, may be negative

    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day) {
        using namespace std::chrono;
        const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                 std::chrono::day{day}};
        return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
    }

    /// Parses "YYYY-MM-DD". Returns nullopt on malformed or non-existent dates.
    static std::optional<Date> parse(std::string_view text) {
        int y = 0;
        unsigned m = 0, d = 0;
        char tail = '\0';
        if (std::sscanf(std::string(text).c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
            return std::nullopt;
        using namespace std::chrono;
        const year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                 std::chrono::day{d}};
        if (!ymd.ok())
            return std::nullopt;
        return from_ymd(y, m, d);
    }

    /// Parsing variant that treats malformed input as an error.
    static Date parse_or_throw(std::string_view text) {
        const auto d = parse(text);
        if (!d)
            throw std::invalid_argument("bad date: " + std::string(text));
        return *d;
    }

    int year() const { return static_cast<int>(ymd().year()); }
    unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    unsigned day() const { return static_cast<unsigned>(ymd().day()); }

    /// Months since year 0, used to index monthly buckets.
    int month_index() const { return year() * 12 + static_cast<int>(month()) - 1; }

    Date plus_days(int n) const { return Date{days + n}; }

    /// First day of this date's month.
    Date first_of_month() const { return from_ymd(year(), month(), 1); }

    /// First day of the month n months after this date's month.
    Date plus_months(int n) const {
        const int idx = month_index() + n;
        const int y = idx >= 0 ? idx / 12 : (idx - 11) / 12;
        const int m = idx - y * 12;
        return from_ymd(y, static_cast<unsigned>(m + 1), 1);
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::year_month_day ymd() const {
        using namespace std::chrono;
        return year_month_day{sys_days{std::chrono::days{days}}};
    }
};

/// b - a in whole days.
inline int days_between(Date a, Date b) { return b.days - a.days; }

/// b - a in whole months, ignoring the day of month.
inline int months_between(Date a, Date b) { return b.month_index() - a.month_index(); }

} // namespace smlp
