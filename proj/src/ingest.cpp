#include "batrank/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace batrank {

namespace {

constexpr const char* kColumns[] = {"player", "date", "year", "age", "home",
                                    "match_innings", "opposition", "runs", "not_out"};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Comma-separated fields with optional double-quoted fields ("" escapes a quote).
std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", lineno);
    out.push_back(was_quoted ? cur : trim(cur));
    return out;
}

template <typename T>
T parse_number(const std::string& s, const char* field, std::size_t lineno) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ParseError(std::string("invalid ") + field + " '" + s + "'", lineno);
    }
    return v;
}

double parse_double(const std::string& s, const char* field, std::size_t lineno) {
    // std::from_chars for double is available in libstdc++ 11.
    return parse_number<double>(s, field, lineno);
}

bool valid_iso_date(const std::string& s, int& year) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    year = std::stoi(s.substr(0, 4));
    int month = std::stoi(s.substr(5, 2));
    int day = std::stoi(s.substr(8, 2));
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

int floor_div10(int y) { return y >= 0 ? y / 10 : -((-y + 9) / 10); }

}  // namespace

std::size_t Dataset::year_index(int calendar_year) const {
    if (calendar_year < first_year || calendar_year > last_year()) {
        throw std::out_of_range("year " + std::to_string(calendar_year) + " outside data span");
    }
    return static_cast<std::size_t>(calendar_year - first_year);
}

Dataset build_dataset(const std::vector<RawInnings>& rows, const BuildOptions& opts) {
    Dataset ds;

    std::vector<std::string> labels;
    if (opts.oppositions) {
        labels = *opts.oppositions;
    } else {
        std::set<std::string> seen;
        for (const auto& r : rows) seen.insert(r.opposition);
        labels.assign(seen.begin(), seen.end());
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    std::map<std::string, std::size_t> opp_index;
    for (std::size_t q = 0; q < labels.size(); ++q) opp_index[labels[q]] = q;

    int lo = opts.first_year.value_or(std::numeric_limits<int>::max());
    int hi = opts.last_year.value_or(std::numeric_limits<int>::min());
    for (const auto& r : rows) {
        lo = std::min(lo, r.year);
        hi = std::max(hi, r.year);
    }
    if (rows.empty() && !(opts.first_year && opts.last_year)) {
        if (opts.extra_players.empty()) throw ParseError("dataset has no innings");
        throw ParseError("a dataset without innings needs an explicit year span");
    }
    if (lo > hi) throw ParseError("empty year span");

    ds.first_year = lo;
    ds.dims.years = static_cast<std::size_t>(hi - lo + 1);
    const int first_decade = floor_div10(lo);
    ds.decade_of_year.resize(ds.dims.years);
    for (std::size_t y = 0; y < ds.dims.years; ++y) {
        ds.decade_of_year[y] = static_cast<std::size_t>(floor_div10(lo + static_cast<int>(y)) - first_decade);
    }
    ds.dims.decades = ds.decade_of_year.back() + 1;
    for (std::size_t d = 0; d < ds.dims.decades; ++d) {
        ds.decade_start.push_back((first_decade + static_cast<int>(d)) * 10);
    }
    ds.opposition_labels = labels;
    ds.dims.oppositions = labels.size();

    auto register_player = [&](const std::string& id) {
        auto [it, inserted] = ds.player_index.try_emplace(id, ds.player_ids.size());
        if (inserted) ds.player_ids.push_back(id);
        return it->second;
    };

    ds.records.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::size_t line = i + 2;
        if (r.player.empty()) throw ParseError("empty player id", line);
        if (r.runs < 0) throw ParseError("negative runs", line);
        if (r.match_innings < 1 || r.match_innings > 4) {
            throw ParseError("match_innings must be 1-4", line);
        }
        if (!(r.age > 10.0 && r.age < 60.0)) {
            throw ParseError("age " + std::to_string(r.age) + " outside (10, 60)", line);
        }
        auto q = opp_index.find(r.opposition);
        if (q == opp_index.end()) throw ParseError("unknown opposition '" + r.opposition + "'", line);
        if (!r.date.empty()) {
            int dy = 0;
            if (!valid_iso_date(r.date, dy)) throw ParseError("invalid date '" + r.date + "'", line);
            if (dy != r.year) throw ParseError("date does not match year", line);
        }

        InningsRecord rec;
        rec.player = register_player(r.player);
        rec.calendar_year = r.year;
        rec.year = static_cast<std::size_t>(r.year - lo);
        rec.decade = ds.decade_of_year[rec.year];
        rec.age = r.age;
        rec.venue = r.venue;
        rec.match_innings = r.match_innings;
        rec.opposition = q->second;
        rec.runs = r.runs;
        rec.not_out = r.not_out;
        rec.duck = r.runs == 0 && !r.not_out;
        rec.date = r.date;
        ds.records.push_back(std::move(rec));
    }
    for (const auto& id : opts.extra_players) register_player(id);

    ds.dims.players = ds.player_ids.size();
    ds.per_player_counts.assign(ds.dims.players, 0);
    for (const auto& rec : ds.records) ++ds.per_player_counts[rec.player];
    return ds;
}

Dataset parse_csv(const std::string& text, const BuildOptions& opts) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;

    std::map<std::string, std::size_t> col;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    if (lineno == 0 || trim(line).empty()) throw ParseError("missing header row");
    {
        auto header = split_csv_line(line, lineno);
        for (std::size_t i = 0; i < header.size(); ++i) {
            std::string h = header[i];
            if (i == 0 && h.rfind("\xEF\xBB\xBF", 0) == 0) h = h.substr(3);  // BOM
            if (!col.emplace(h, i).second) throw ParseError("duplicate column '" + h + "'", lineno);
        }
        for (const char* name : kColumns) {
            if (std::string(name) == "date") continue;
            if (!col.count(name)) throw ParseError(std::string("missing column '") + name + "'", lineno);
        }
    }
    const bool has_date = col.count("date") > 0;
    const std::size_t ncol = col.size();

    std::vector<RawInnings> rows;
    std::vector<std::size_t> line_of_row;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_csv_line(line, lineno);
        if (f.size() != ncol) {
            throw ParseError("expected " + std::to_string(ncol) + " fields, got " + std::to_string(f.size()),
                             lineno);
        }
        RawInnings r;
        r.player = f[col["player"]];
        if (has_date) r.date = f[col["date"]];
        r.year = parse_number<int>(f[col["year"]], "year", lineno);
        r.age = parse_double(f[col["age"]], "age", lineno);
        const auto& home = f[col["home"]];
        if (home == "H" || home == "1") {
            r.venue = Venue::home;
        } else if (home == "A" || home == "2") {
            r.venue = Venue::away;
        } else {
            throw ParseError("home must be H or A, got '" + home + "'", lineno);
        }
        r.match_innings = parse_number<int>(f[col["match_innings"]], "match_innings", lineno);
        r.opposition = f[col["opposition"]];
        r.runs = parse_number<int>(f[col["runs"]], "runs", lineno);
        const auto& no = f[col["not_out"]];
        if (no == "0") {
            r.not_out = false;
        } else if (no == "1") {
            r.not_out = true;
        } else {
            throw ParseError("not_out must be 0 or 1, got '" + no + "'", lineno);
        }
        rows.push_back(std::move(r));
        line_of_row.push_back(lineno);
    }
    if (rows.empty() && opts.extra_players.empty()) throw ParseError("dataset has no innings");

    try {
        return build_dataset(rows, opts);
    } catch (const ParseError& e) {
        // Re-map row position to the physical line number.
        if (e.line() >= 2 && e.line() - 2 < line_of_row.size()) {
            std::string msg = e.what();
            msg = msg.substr(msg.find(": ") + 2);
            throw ParseError(msg, line_of_row[e.line() - 2]);
        }
        throw;
    }
}

Dataset load_csv(const std::filesystem::path& path, const BuildOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), opts);
}

std::string to_csv(const Dataset& ds) {
    std::ostringstream out;
    out.precision(17);
    out << "player,date,year,age,home,match_innings,opposition,runs,not_out\n";
    for (const auto& r : ds.records) {
        out << quote_if_needed(ds.player_ids[r.player]) << ',' << r.date << ',' << r.calendar_year << ','
            << r.age << ',' << (r.venue == Venue::home ? 'H' : 'A') << ',' << r.match_innings << ','
            << quote_if_needed(ds.opposition_labels[r.opposition]) << ',' << r.runs << ','
            << (r.not_out ? 1 : 0) << '\n';
    }
    return out.str();
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_csv(ds);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::string> validate(const Dataset& ds) {
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < ds.dims.players; ++i) {
        if (ds.per_player_counts[i] == 1) {
            warnings.push_back("player '" + ds.player_ids[i] + "' has a single innings");
        }
    }
    using Key = std::tuple<std::size_t, int, double, int, int, std::size_t, int, bool, std::string>;
    std::set<Key> seen;
    for (std::size_t k = 0; k < ds.records.size(); ++k) {
        const auto& r = ds.records[k];
        if (r.age < 15.0 || r.age > 55.0) {
            warnings.push_back("record " + std::to_string(k + 1) + ": age " + std::to_string(r.age) +
                               " outside [15, 55]");
        }
        Key key{r.player, r.calendar_year, r.age, static_cast<int>(r.venue), r.match_innings,
                r.opposition, r.runs, r.not_out, r.date};
        if (!seen.insert(key).second) {
            warnings.push_back("record " + std::to_string(k + 1) + " duplicates an earlier row");
        }
    }
    return warnings;
}

std::uint64_t fingerprint(const Dataset& ds) {
    // FNV-1a over a canonical text rendering.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    mix(std::to_string(ds.dims.players) + "/" + std::to_string(ds.dims.years) + "/" +
        std::to_string(ds.dims.decades) + "/" + std::to_string(ds.dims.oppositions) + "/" +
        std::to_string(ds.first_year));
    for (const auto& id : ds.player_ids) mix(id);
    for (const auto& l : ds.opposition_labels) mix(l);
    char buf[64];
    for (const auto& r : ds.records) {
        std::snprintf(buf, sizeof buf, "%zu|%zu|%.17g|%d|%d|%zu|%d|%d", r.player, r.year, r.age,
                      static_cast<int>(r.venue), r.match_innings, r.opposition, r.runs, r.not_out ? 1 : 0);
        mix(buf);
    }
    return h;
}

RecordIndex::RecordIndex(const Dataset& ds)
    : by_player(ds.dims.players),
      by_year(ds.dims.years),
      by_innings(4),
      by_opposition(ds.dims.oppositions),
      by_opp_decade(ds.dims.oppositions * ds.dims.decades) {
    for (std::size_t k = 0; k < ds.records.size(); ++k) {
        const auto& r = ds.records[k];
        by_player[r.player].push_back(k);
        by_year[r.year].push_back(k);
        if (r.venue == Venue::away) away.push_back(k);
        by_innings[static_cast<std::size_t>(r.match_innings - 1)].push_back(k);
        by_opposition[r.opposition].push_back(k);
        by_opp_decade[r.opposition * ds.dims.decades + r.decade].push_back(k);
    }
}

}  // namespace batrank
