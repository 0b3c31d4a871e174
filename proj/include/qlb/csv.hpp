#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "qlb/error.hpp"

namespace qlb {

/// Minimal deterministic CSV writer: comma-separated, LF line endings,
/// doubles rendered with enough digits to round-trip (%.17g), no
/// locale dependence, no timestamps.  Rerunning a command produces a
/// bytewise-identical file.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary | std::ios::trunc), n_columns_(columns.size()) {
        if (!out_) throw IoError("cannot open for writing: " + path);
        QLB_REQUIRE(!columns.empty(), "csv needs at least one column");
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        QLB_REQUIRE(values.size() == n_columns_, "csv row width mismatch");
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
            out_ << buf;
        }
        out_ << '\n';
        if (!out_) throw IoError("csv write failed");
    }

private:
    std::ofstream out_;
    std::size_t n_columns_;
};

} // namespace qlb
