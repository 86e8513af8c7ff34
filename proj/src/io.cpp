#include "panelkit/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "panelkit/errors.hpp"

namespace panelkit {

std::string format_value(double x) {
    if (x == 0.0) x = 0.0; // normalize negative zero
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

double parse_double(const std::string& text, const std::string& where) {
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    const double value = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE) {
        throw IoError("cannot parse '" + text + "' as a number (" + where + ")");
    }
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') {
        throw IoError("trailing characters after number '" + text + "' (" + where + ")");
    }
    return value;
}

int parse_int(const std::string& text, const std::string& where) {
    int value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || begin == end) {
        throw IoError("cannot parse '" + text + "' as an integer (" + where + ")");
    }
    return value;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == delimiter) {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    for (auto& f : fields) {
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t')) {
            f.pop_back();
        }
        std::size_t start = 0;
        while (start < f.size() && (f[start] == ' ' || f[start] == '\t')) ++start;
        if (start > 0) f.erase(0, start);
    }
    return fields;
}

} // namespace

CsvFile read_csv(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    CsvFile file;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + " is empty (header row required)");
    file.columns = split_line(line, delimiter);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_line(line, delimiter);
        if (fields.size() != file.columns.size()) {
            std::ostringstream msg;
            msg << path << ":" << line_no << " has " << fields.size() << " fields, expected "
                << file.columns.size();
            throw IoError(msg.str());
        }
        file.rows.push_back(std::move(fields));
    }
    return file;
}

namespace {

std::size_t column_index(const CsvFile& file, const std::string& name, const std::string& path) {
    for (std::size_t i = 0; i < file.columns.size(); ++i) {
        if (file.columns[i] == name) return i;
    }
    throw IoError(path + " has no column named '" + name + "'");
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

} // namespace

PanelLoadResult load_panel(const std::string& path, const PanelColumns& columns, char delimiter) {
    const CsvFile file = read_csv(path, delimiter);
    const std::size_t unit_col = column_index(file, columns.unit, path);
    const std::size_t time_col = column_index(file, columns.time, path);
    const std::size_t outcome_col = column_index(file, columns.outcome, path);

    std::vector<std::string> units;                 // first-appearance order
    std::map<std::string, int> unit_pos;
    std::map<std::pair<int, int>, std::size_t> first_row; // (unit pos, time) -> row number
    struct Cell {
        int unit;
        int time;
        double value;
        bool observed;
    };
    std::vector<Cell> cells;
    int min_time = 0, max_time = 0;
    bool any_time = false;
    int masked_values = 0;

    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        const auto& row = file.rows[r];
        const std::size_t line_no = r + 2; // header is line 1
        const std::string& unit = row[unit_col];
        if (unit.empty()) throw IoError(path + ":" + std::to_string(line_no) + " has an empty unit");

        std::ostringstream where;
        where << path << ":" << line_no;
        const int time = parse_int(row[time_col], where.str() + " column " + columns.time);

        auto [it, inserted] = unit_pos.try_emplace(unit, static_cast<int>(units.size()));
        if (inserted) units.push_back(unit);
        const int u = it->second;

        auto [dup_it, fresh] = first_row.try_emplace({u, time}, line_no);
        if (!fresh) {
            std::ostringstream msg;
            msg << path << " has duplicate rows for (" << unit << ", " << time << "): lines "
                << dup_it->second << " and " << line_no;
            throw IoError(msg.str());
        }

        Cell cell{u, time, 0.0, true};
        const std::string& raw = row[outcome_col];
        if (is_missing_token(raw)) {
            cell.observed = false;
            ++masked_values;
        } else {
            cell.value = parse_double(raw, where.str() + " column " + columns.outcome);
        }
        cells.push_back(cell);

        if (!any_time) {
            min_time = max_time = time;
            any_time = true;
        } else {
            min_time = std::min(min_time, time);
            max_time = std::max(max_time, time);
        }
    }
    if (!any_time) throw IoError(path + " contains no data rows");

    const std::size_t n_units = units.size();
    const std::size_t n_times = static_cast<std::size_t>(max_time - min_time + 1);
    std::vector<double> outcomes(n_units * n_times, 0.0);
    std::vector<std::uint8_t> observed(n_units * n_times, 0);
    std::vector<int> per_time_counts(n_times, 0);

    for (const Cell& cell : cells) {
        const std::size_t idx = static_cast<std::size_t>(cell.unit) * n_times +
                                static_cast<std::size_t>(cell.time - min_time);
        outcomes[idx] = cell.value;
        observed[idx] = cell.observed ? 1 : 0;
        if (cell.observed) ++per_time_counts[static_cast<std::size_t>(cell.time - min_time)];
    }

    std::vector<int> times(n_times);
    for (std::size_t i = 0; i < n_times; ++i) times[i] = min_time + static_cast<int>(i);

    PanelLoadResult result{Panel(std::move(units), std::move(times), std::move(outcomes),
                                 std::move(observed)),
                           {}};
    if (masked_values > 0) {
        result.warnings.push_back(std::to_string(masked_values) +
                                  " outcome value(s) were missing and masked");
    }
    for (std::size_t i = 0; i < n_times; ++i) {
        if (per_time_counts[i] == 0) {
            result.warnings.push_back("period " + std::to_string(min_time + static_cast<int>(i)) +
                                      " has no observations; filled as missing");
        }
    }
    {
        // (unit, time) pairs absent from the file are masked silently; that is
        // the documented pivot behaviour, but a fully-missing unit deserves a
        // warning.
        const Panel& p = result.panel;
        for (int u = 0; u < p.n_units(); ++u) {
            bool any = false;
            for (int t = 0; t < p.n_times(); ++t) {
                if (p.observed(u, t)) {
                    any = true;
                    break;
                }
            }
            if (!any) {
                result.warnings.push_back("unit " + p.unit_name(u) + " has no observed outcomes");
            }
        }
    }
    return result;
}

TreatmentSchedule load_schedule(const std::string& path, char delimiter) {
    const CsvFile file = read_csv(path, delimiter);
    const std::size_t unit_col = column_index(file, "unit", path);
    const std::size_t year_col = column_index(file, "adoption_year", path);

    TreatmentSchedule schedule;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        const std::size_t line_no = r + 2;
        const std::string& unit = file.rows[r][unit_col];
        const std::string& token = file.rows[r][year_col];
        if (!seen.insert(unit).second) {
            throw IoError(path + ":" + std::to_string(line_no) + " duplicates unit " + unit);
        }
        if (token == "never") {
            schedule.set(unit, std::nullopt);
        } else {
            std::ostringstream where;
            where << path << ":" << line_no << " column adoption_year";
            schedule.set(unit, parse_int(token, where.str()));
        }
    }
    if (schedule.entries().empty()) throw IoError(path + " contains no schedule rows");
    return schedule;
}

void write_text_atomic(const std::string& text, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out << text;
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

void write_table_atomic(const Table& table, const std::string& path, char delimiter) {
    std::ostringstream out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out << delimiter;
        out << table.columns[c];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw IoError("table row width mismatch while writing " + path);
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (row[c].find(delimiter) != std::string::npos ||
                row[c].find('\n') != std::string::npos) {
                throw IoError("table cell contains the delimiter while writing " + path);
            }
            if (c) out << delimiter;
            out << row[c];
        }
        out << '\n';
    }
    write_text_atomic(out.str(), path);
}

Table read_table(const std::string& path, char delimiter) {
    CsvFile file = read_csv(path, delimiter);
    return Table{std::move(file.columns), std::move(file.rows)};
}

Table panel_to_long_table(const Panel& panel, const PanelColumns& columns) {
    Table t;
    t.columns = {columns.unit, columns.time, columns.outcome};
    for (int u = 0; u < panel.n_units(); ++u) {
        for (int ti = 0; ti < panel.n_times(); ++ti) {
            if (!panel.observed(u, ti)) continue;
            t.rows.push_back({panel.unit_name(u),
                              std::to_string(panel.times()[static_cast<std::size_t>(ti)]),
                              format_value(panel.at(u, ti))});
        }
    }
    return t;
}

Table schedule_to_table(const TreatmentSchedule& schedule) {
    Table t;
    t.columns = {"unit", "adoption_year"};
    for (const auto& [unit, time] : schedule.entries()) {
        t.rows.push_back({unit, time ? std::to_string(*time) : std::string("never")});
    }
    return t;
}

} // namespace panelkit
