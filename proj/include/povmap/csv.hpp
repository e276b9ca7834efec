#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "povmap/util.hpp"

namespace povmap::csv {

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws input_error naming the file if absent.
    size_t col(const std::string& name) const;
};

/// Strict reader: UTF-8, comma-separated, no quoting, constant column count.
/// Errors carry file name and 1-based row numbers.
Table read_csv(const std::filesystem::path& path);

double parse_double(const Table& t, size_t row, size_t col);
long parse_long(const Table& t, size_t row, size_t col);

class Writer {
  public:
    explicit Writer(const std::filesystem::path& path);
    ~Writer();
    void row(const std::vector<std::string>& fields);
    void close();

  private:
    std::string path_;
    std::string buf_;
    bool closed_ = false;
};

}  // namespace povmap::csv
