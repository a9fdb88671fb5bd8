#pragma once

#include <string>
#include <vector>

namespace melpc {

// Minimal CSV: comma-separated, no quoting (fields here are paths, ids and
// numbers; commas inside fields are rejected at write time).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
    int require_column(const std::string& name) const;
};

CsvTable csv_parse(const std::string& text);
CsvTable csv_read_file(const std::string& path);

std::string csv_format(const CsvTable& table);
void csv_write_file(const std::string& path, const CsvTable& table);

std::string format_double(double v);

}  // namespace melpc
