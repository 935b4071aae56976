#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idfalign {

/// A flat CSV table. Numbers are written in shortest round-trip form so
/// that parsing a report recovers the exact doubles.
class CsvTable
{
public:
    CsvTable() = default;
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    static std::string number(double v)
    {
        char buf[64];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ptr);
    }
    static std::string number(std::size_t v) { return std::to_string(v); }

    void add_row(std::vector<std::string> cells)
    {
        if (cells.size() != columns_.size())
            throw std::invalid_argument("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(columns_.size()));
        rows_.push_back(std::move(cells));
    }

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    std::size_t column(std::string_view name) const
    {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i] == name)
                return i;
        throw std::out_of_range("no CSV column '" + std::string(name) + "'");
    }

    double number_at(std::size_t row, std::string_view col) const
    {
        const std::string& cell = rows_.at(row).at(column(col));
        double v = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size())
            throw std::runtime_error("CSV cell '" + cell + "' is not a number");
        return v;
    }

    std::string str() const
    {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i)
                    out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(columns_);
        for (const auto& r : rows_)
            line(r);
        return out;
    }

    void save(const std::string& path) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        out << str();
        if (!out)
            throw std::runtime_error("failed writing '" + path + "'");
    }

    static CsvTable parse(std::string_view text)
    {
        CsvTable t;
        std::istringstream in{std::string(text)};
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            std::vector<std::string> cells;
            std::size_t start = 0;
            for (;;) {
                const std::size_t comma = line.find(',', start);
                cells.push_back(line.substr(start, comma - start));
                if (comma == std::string::npos)
                    break;
                start = comma + 1;
            }
            if (header) {
                t.columns_ = std::move(cells);
                header = false;
            } else {
                t.add_row(std::move(cells));
            }
        }
        return t;
    }

    static CsvTable load(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw std::runtime_error("cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace idfalign
