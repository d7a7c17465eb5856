#pragma once

// Scorecard ingestion: one row per batting innings.
//
// Indices are 0-based in code. Player, year, decade and opposition index 0
// correspond to the first player seen, the first calendar year in the span,
// the first calendar decade and the alphabetically first opposition (the
// reference country) respectively.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace batrank {

enum class Venue : std::uint8_t { home = 1, away = 2 };

struct InningsRecord {
    std::size_t player = 0;
    int calendar_year = 0;
    std::size_t year = 0;    // index into the contiguous year span
    std::size_t decade = 0;  // calendar-decade era index
    double age = 0.0;
    Venue venue = Venue::home;
    int match_innings = 1;    // 1..4
    std::size_t opposition = 0;
    int runs = 0;
    bool not_out = false;
    bool duck = false;        // runs == 0 and dismissed
    std::string date;         // optional ISO-8601, kept for round-trips

    bool completed() const { return !not_out; }
};

struct Dims {
    std::size_t players = 0;
    std::size_t years = 0;
    std::size_t decades = 0;
    std::size_t oppositions = 0;

    bool operator==(const Dims&) const = default;
};

struct Dataset {
    std::vector<InningsRecord> records;
    std::vector<std::string> player_ids;         // index -> id
    std::map<std::string, std::size_t> player_index;
    std::vector<std::string> opposition_labels;  // alphabetical, [0] = reference
    int first_year = 0;
    std::vector<std::size_t> decade_of_year;     // year index -> decade index
    std::vector<int> decade_start;               // decade index -> first calendar year of that decade (e.g. 1870)
    Dims dims;
    std::vector<std::size_t> per_player_counts;

    int last_year() const { return first_year + static_cast<int>(dims.years) - 1; }
    std::size_t year_index(int calendar_year) const;
};

// Thrown for malformed input. line is 1-based (header is line 1), 0 when not
// tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// One innings before index mapping.
struct RawInnings {
    std::string player;
    std::string date;
    int year = 0;
    double age = 0.0;
    Venue venue = Venue::home;
    int match_innings = 1;
    std::string opposition;
    int runs = 0;
    bool not_out = false;
};

struct BuildOptions {
    // Full opposition list; labels outside it are rejected. Sorted on use.
    std::optional<std::vector<std::string>> oppositions;
    // Widen the year span beyond the data.
    std::optional<int> first_year;
    std::optional<int> last_year;
    // Players to register even if they have no innings (appended after the
    // players seen in the rows).
    std::vector<std::string> extra_players;
};

// Validates every row and derives indices. Throws ParseError.
Dataset build_dataset(const std::vector<RawInnings>& rows, const BuildOptions& opts = {});

// Header: player,date,year,age,home,match_innings,opposition,runs,not_out
// (any column order; date optional).
Dataset load_csv(const std::filesystem::path& path, const BuildOptions& opts = {});
Dataset parse_csv(const std::string& text, const BuildOptions& opts = {});

std::string to_csv(const Dataset& ds);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

// Advisory checks; never throws, never mutates.
std::vector<std::string> validate(const Dataset& ds);

// Stable 64-bit hash of records, labels and dimensions.
std::uint64_t fingerprint(const Dataset& ds);

// Record indices grouped by covariate, built once per dataset.
struct RecordIndex {
    std::vector<std::vector<std::size_t>> by_player;
    std::vector<std::vector<std::size_t>> by_year;
    std::vector<std::size_t> away;
    std::vector<std::vector<std::size_t>> by_innings;        // [0..3] -> match innings 1..4
    std::vector<std::vector<std::size_t>> by_opposition;
    std::vector<std::vector<std::size_t>> by_opp_decade;     // q * D + d

    explicit RecordIndex(const Dataset& ds);
};

}  // namespace batrank
