#ifndef PANELKIT_IO_HPP
#define PANELKIT_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "panelkit/panel.hpp"
#include "panelkit/table.hpp"

namespace panelkit {

struct CsvFile {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows; // each padded/checked to columns size
};

/// Minimal delimiter-separated reader: header row required, no quoting, CRLF
/// tolerated. Field counts must match the header.
CsvFile read_csv(const std::string& path, char delimiter = ',');

struct PanelColumns {
    std::string unit = "unit";
    std::string time = "time";
    std::string outcome = "outcome";
};

struct PanelLoadResult {
    Panel panel;
    std::vector<std::string> warnings;
};

/// Pivots a long-format (unit, time, outcome) file into a Panel. Missing
/// (unit, time) pairs become masked cells; empty or "NA" outcome fields are
/// masked with a warning; duplicate pairs are rejected with both row numbers.
/// Gaps in the global time range are filled as fully masked periods and
/// warned about.
PanelLoadResult load_panel(const std::string& path, const PanelColumns& columns,
                           char delimiter = ',');

/// Reads (unit, adoption_year) rows; adoption_year is an integer year or the
/// literal token "never". Duplicate units and unknown tokens are errors.
TreatmentSchedule load_schedule(const std::string& path, char delimiter = ',');

/// Serializes and atomically replaces path (write to a temporary file in the
/// same directory, then rename).
void write_table_atomic(const Table& table, const std::string& path, char delimiter = ',');
void write_text_atomic(const std::string& text, const std::string& path);

/// Parses a Table back from disk (used by round-trip checks).
Table read_table(const std::string& path, char delimiter = ',');

/// Long-format view of a panel (one row per observed cell; masked cells are
/// omitted, which the loader restores as masked).
Table panel_to_long_table(const Panel& panel, const PanelColumns& columns);

/// (unit, adoption_year) rows with "never" for never-treated units.
Table schedule_to_table(const TreatmentSchedule& schedule);

} // namespace panelkit

#endif
