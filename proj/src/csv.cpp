#include "povmap/csv.hpp"

#include <charconv>
#include <fstream>

namespace povmap::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

size_t Table::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw input_error(path + ": missing column '" + name + "'");
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path.string());
    Table t;
    t.path = path.string();
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (lineno == 1) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw input_error(t.path + ": row " + std::to_string(lineno) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw input_error(t.path + ": empty file (no header)");
    return t;
}

double parse_double(const Table& t, size_t row, size_t col) {
    const std::string& s = t.rows[row][col];
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw input_error(t.path + ": row " + std::to_string(row + 2) + " column '" + t.header[col] +
                          "': not a number: '" + s + "'");
    }
    return v;
}

long parse_long(const Table& t, size_t row, size_t col) {
    const std::string& s = t.rows[row][col];
    long v = 0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw input_error(t.path + ": row " + std::to_string(row + 2) + " column '" + t.header[col] +
                          "': not an integer: '" + s + "'");
    }
    return v;
}

Writer::Writer(const std::filesystem::path& path) : path_(path.string()) {
    buf_.reserve(1 << 16);
}

Writer::~Writer() {
    try {
        close();
    } catch (...) {
    }
}

void Writer::row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += fields[i];
    }
    buf_ += '\n';
}

void Writer::close() {
    if (closed_) return;
    closed_ = true;
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write " + path_);
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw input_error("short write to " + path_);
}

}  // namespace povmap::csv
