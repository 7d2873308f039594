#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rpeq {

// 17 significant digits, so every double round-trips.
std::string format_double(double x);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string>& columns);
    CsvWriter& field(double x);
    CsvWriter& field(long long x);
    CsvWriter& field(unsigned long long x);
    CsvWriter& field(std::size_t x) { return field(static_cast<unsigned long long>(x)); }
    CsvWriter& field(std::string_view x);
    void end_row();

private:
    std::ostream& out_;
    bool first_ = true;
};

}  // namespace rpeq
