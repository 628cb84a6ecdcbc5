#pragma once

#include <string>
#include <vector>

// Deterministic CSV emission: '#'-prefixed header/footer comment lines, one
// plain column-name line, rows at 17 significant digits.  Identical content
// in, identical bytes out.

namespace nvcool::table {

// Shortest-exact-enough rendering of a double (17 significant digits).
std::string format_real(double v);

struct Table {
    std::vector<std::string> header;         // emitted as "# <line>"
    std::vector<std::string> columns;        // value column names
    std::vector<std::string> labels;         // optional: one label per row (adds a leading column)
    std::string label_column = "param";      // name of the label column when labels are used
    std::vector<std::vector<double>> rows;   // rows[i].size() == columns.size()
    std::vector<std::string> footer;         // emitted as "# <line>" after the rows

    std::string to_csv() const;
    void write_csv(const std::string& path) const;  // throws ConfigError on I/O failure
};

}  // namespace nvcool::table
