#include "brw/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace brw {

std::string fmt17(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

CsvWriter::CsvWriter(std::initializer_list<std::string_view> header)
{
    for (auto h : header) {
        field(h);
    }
    end_row();
}

void CsvWriter::separator()
{
    if (row_open_) {
        text_ += ',';
    }
    row_open_ = true;
}

CsvWriter& CsvWriter::field(double v)
{
    separator();
    text_ += fmt17(v);
    return *this;
}

CsvWriter& CsvWriter::field(std::int64_t v)
{
    separator();
    text_ += std::to_string(v);
    return *this;
}

CsvWriter& CsvWriter::field(std::uint64_t v)
{
    separator();
    text_ += std::to_string(v);
    return *this;
}

CsvWriter& CsvWriter::field(std::string_view v)
{
    separator();
    text_ += v;
    return *this;
}

void CsvWriter::end_row()
{
    text_ += '\n';
    row_open_ = false;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            fields.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace brw
