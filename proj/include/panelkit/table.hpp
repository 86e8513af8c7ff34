#ifndef PANELKIT_TABLE_HPP
#define PANELKIT_TABLE_HPP

#include <string>
#include <vector>

namespace panelkit {

/// Plain table: header plus string rows, serialized as delimiter-separated
/// text by the IO layer.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// Locale-independent numeric formatting used for every exported value.
/// Ten significant digits keep read-back round trips within 1e-9 relative
/// error while the output stays byte-stable across runs and machines.
std::string format_value(double x);

/// Strict locale-independent parsers (throw IoError with context on failure).
double parse_double(const std::string& text, const std::string& where);
int parse_int(const std::string& text, const std::string& where);

} // namespace panelkit

#endif
