#pragma once

#include <optional>
#include <string_view>

#include "trajgraph/date.hpp"

namespace trajgraph::ingest {

enum class DateLocale { US, EU };  // slash-format day/month order

// Maps a time-expression surface string to a calendar date for a fixed
// grammar subset:
//   - absolute dates: ISO (2010-01-02), slashed (01/02/2010, locale-ordered),
//     month-name ("Jan 2, 2010", "January 2 2010"), day-first ("2 Jan 2010")
//   - relative to dct: yesterday / today / tomorrow,
//     "N days|weeks|months ago|later"
// Anything else (including relative expressions without a dct) yields an
// absent result; the caller keeps the mention unlinked.
std::optional<Date> normalize_date(std::string_view text, std::optional<Date> dct,
                                   DateLocale locale);

}  // namespace trajgraph::ingest
