#include "melpc/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "melpc/common.hpp"
#include "melpc/io_util.hpp"

namespace melpc {

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::require_column(const std::string& name) const {
    int idx = column(name);
    if (idx < 0) throw DataError("missing CSV column: " + name);
    return idx;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

CsvTable csv_parse(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size())
                throw DataError("CSV row has " + std::to_string(fields.size()) +
                                " fields, header has " + std::to_string(table.header.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw DataError("empty CSV");
    return table;
}

CsvTable csv_read_file(const std::string& path) {
    try {
        return csv_parse(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string csv_format(const CsvTable& table) {
    std::string out;
    auto emit_row = [&out](const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (row[i].find(',') != std::string::npos || row[i].find('\n') != std::string::npos)
                throw DataError("CSV field contains a separator: " + row[i]);
            if (i) out.push_back(',');
            out += row[i];
        }
        out.push_back('\n');
    };
    emit_row(table.header);
    for (const auto& row : table.rows) emit_row(row);
    return out;
}

void csv_write_file(const std::string& path, const CsvTable& table) {
    atomic_write_file(path, csv_format(table));
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace melpc
