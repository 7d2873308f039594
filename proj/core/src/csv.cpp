#include "rpeq/csv.hpp"

#include <cstdio>
#include <ostream>

namespace rpeq {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void CsvWriter::header(const std::vector<std::string>& columns) {
    for (const auto& c : columns) field(std::string_view(c));
    end_row();
}

CsvWriter& CsvWriter::field(double x) { return field(std::string_view(format_double(x))); }

CsvWriter& CsvWriter::field(long long x) { return field(std::string_view(std::to_string(x))); }

CsvWriter& CsvWriter::field(unsigned long long x) { return field(std::string_view(std::to_string(x))); }

CsvWriter& CsvWriter::field(std::string_view x) {
    if (!first_) out_ << ',';
    out_ << x;
    first_ = false;
    return *this;
}

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

}  // namespace rpeq
