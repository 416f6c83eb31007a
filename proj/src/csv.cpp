#include "nhtrack/cli/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace nhtrack::cli {

std::string format_double(double x)
{
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(len));
}

void write_csv(const CsvTable& table, const std::string& path)
{
    const Index rows = table.times.size();
    const bool aligned = table.state.rows() == rows && table.controls.rows() == rows &&
                         table.costates.rows() == rows && table.reference.rows() == rows &&
                         table.state.cols() == 5 && table.controls.cols() == 2 && table.costates.cols() == 5 &&
                         table.reference.cols() == 5;
    if (!aligned)
        throw contract_error("write_csv: columns are not aligned with the time grid");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error("cannot open '" + path + "' for writing");
    std::string line;
    out << csv_header << '\n';
    for (Index i = 0; i < rows; ++i) {
        line = format_double(table.times(i));
        auto append = [&](const Mat<double>& block) {
            for (Index j = 0; j < block.cols(); ++j) {
                line += ',';
                line += format_double(block(i, j));
            }
        };
        append(table.state);
        append(table.controls);
        append(table.costates);
        append(table.reference);
        line += '\n';
        out << line;
    }
    out.flush();
    if (!out)
        throw io_error("write to '" + path + "' failed");
}

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& path, std::size_t line_no)
{
    std::vector<double> values;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(p, end, value);
        if (ec != std::errc())
            throw io_error(path + ":" + std::to_string(line_no) + ": malformed number");
        values.push_back(value);
        p = ptr;
        if (p == end)
            break;
        if (*p != ',')
            throw io_error(path + ":" + std::to_string(line_no) + ": expected ','");
        ++p;
    }
    return values;
}

std::vector<std::string> read_lines(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

Mat<double> parse_body(const std::vector<std::string>& lines, std::size_t first, Index columns, const std::string& path)
{
    std::vector<std::vector<double>> rows;
    for (std::size_t i = first; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        rows.push_back(parse_row(lines[i], path, i + 1));
        if (static_cast<Index>(rows.back().size()) != columns)
            throw io_error(path + ":" + std::to_string(i + 1) + ": expected " + std::to_string(columns) + " columns");
    }
    Mat<double> m(static_cast<Index>(rows.size()), columns);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Index c = 0; c < columns; ++c)
            m(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    return m;
}

} // namespace

CsvTable read_csv(const std::string& path)
{
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || lines.front() != csv_header)
        throw io_error(path + ": missing or unexpected header");
    const Mat<double> m = parse_body(lines, 1, 18, path);
    CsvTable t;
    t.times = m.col(0);
    t.state = m.middleCols(1, 5);
    t.controls = m.middleCols(6, 2);
    t.costates = m.middleCols(8, 5);
    t.reference = m.middleCols(13, 5);
    return t;
}

Mat<double> read_numeric_csv(const std::string& path, Index expected_columns)
{
    const std::vector<std::string> lines = read_lines(path);
    std::size_t first = 0;
    if (!lines.empty() && !lines.front().empty()) {
        const char c = lines.front().front();
        const bool numeric = (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '+';
        if (!numeric)
            first = 1;
    }
    return parse_body(lines, first, expected_columns, path);
}

} // namespace nhtrack::cli
