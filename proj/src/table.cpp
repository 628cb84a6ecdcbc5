#include "nvcool/table.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "nvcool/errors.hpp"

namespace nvcool::table {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string Table::to_csv() const {
    if (!labels.empty() && labels.size() != rows.size())
        throw std::invalid_argument("Table: labels/rows size mismatch");
    std::string out;
    for (const auto& line : header) out += "# " + line + "\n";
    std::string head;
    if (!labels.empty()) head = label_column;
    for (const auto& c : columns) {
        if (!head.empty()) head += ',';
        head += c;
    }
    out += head + "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != columns.size())
            throw std::invalid_argument("Table: row width mismatch at row " + std::to_string(i));
        std::string line;
        if (!labels.empty()) line = labels[i];
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            if (!labels.empty() || k > 0) line += ',';
            line += format_real(rows[i][k]);
        }
        out += line + "\n";
    }
    for (const auto& line : footer) out += "# " + line + "\n";
    return out;
}

void Table::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("write_csv: cannot open '" + path + "' for writing");
    f << to_csv();
    if (!f) throw ConfigError("write_csv: write failed for '" + path + "'");
}

}  // namespace nvcool::table
