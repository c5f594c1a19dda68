#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace brw {

/// Fixed 17-significant-digit rendering used for every CSV number.
std::string fmt17(double v);

/// Accumulates CSV text with a pinned number format.
class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<std::string_view> header);

    CsvWriter& field(double v);
    CsvWriter& field(std::int64_t v);
    CsvWriter& field(std::uint64_t v);
    CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
    CsvWriter& field(std::string_view v);
    void end_row();

    const std::string& str() const noexcept { return text_; }

private:
    void separator();

    std::string text_;
    bool row_open_ = false;
};

/// Splits CSV text into rows of fields (no quoting support; numbers only).
std::vector<std::vector<std::string>> read_csv_rows(const std::string& text);

} // namespace brw
