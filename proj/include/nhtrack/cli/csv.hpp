#pragma once

#include <string>

#include "nhtrack/types.hpp"

namespace nhtrack::cli {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* csv_header = "t,x,y,z,v1,v2,u1,u2,l1,l2,l3,m1,m2,x_r,y_r,z_r,v1_r,v2_r";

/// One row per grid point. Column blocks: state (5), control (2), costate (5), reference (5).
struct CsvTable {
    Vec<double> times;
    Mat<double> state;
    Mat<double> controls;
    Mat<double> costates;
    Mat<double> reference;
};

/// `%.17g` fields, LF line endings, trailing newline. Throws io_error with the path.
void write_csv(const CsvTable& table, const std::string& path);

/// Parses a file written by write_csv (header required).
CsvTable read_csv(const std::string& path);

/// Generic numeric CSV reader: optional header line, every other line numeric.
Mat<double> read_numeric_csv(const std::string& path, Index expected_columns);

std::string format_double(double x);

} // namespace nhtrack::cli
