#include <blocksel/io.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <blocksel/errors.hpp>

namespace blocksel {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

Matrix parse_csv_matrix(const std::string& text, const std::string& source)
{
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos)
            end = text.size();
        std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
        ++line_no;
        pos = end + 1;
        if (line.empty())
            continue;

        std::vector<double> row;
        std::size_t col = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view cell = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
            ++col;
            double v = 0.0;
            const char* b = cell.data();
            const char* e = cell.data() + cell.size();
            if (!cell.empty() && *b == '+')
                ++b;
            const auto [ptr, ec] = std::from_chars(b, e, v);
            if (cell.empty() || ec != std::errc{} || ptr != e)
                throw ConfigError(source + ": line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                                  ": not a number '" + std::string(cell) + "'");
            if (!std::isfinite(v))
                throw ConfigError(source + ": line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                                  ": non-finite value");
            row.push_back(v);
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                              " columns, expected " + std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw ConfigError(source + ": no data rows");

    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[i].size(); ++c)
            m(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
    return m;
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Matrix read_csv_matrix(const fs::path& path)
{
    return parse_csv_matrix(read_text_file(path), path.string());
}

std::string format_csv_matrix(const Matrix& m)
{
    std::string out;
    char buf[32];
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0)
                out += ',';
            const auto res = std::to_chars(buf, buf + sizeof buf, m(i, j));
            out.append(buf, res.ptr);
        }
        out += '\n';
    }
    return out;
}

std::string format_csv_matrix(const Eigen::MatrixXi& m)
{
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0)
                out += ',';
            out += std::to_string(m(i, j));
        }
        out += '\n';
    }
    return out;
}

namespace {

fs::path temp_sibling(const fs::path& path)
{
    return path.parent_path() / ("." + path.filename().string() + ".tmp");
}

void write_plain(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out)
        throw ConfigError("write failed for '" + path.string() + "'");
}

} // namespace

void write_file_atomic(const fs::path& path, const std::string& content)
{
    write_files_atomic({{path, content}});
}

void write_files_atomic(const std::vector<std::pair<fs::path, std::string>>& files)
{
    std::vector<fs::path> temps;
    try {
        for (const auto& [path, content] : files) {
            temps.push_back(temp_sibling(path));
            write_plain(temps.back(), content);
        }
        for (std::size_t i = 0; i < files.size(); ++i)
            fs::rename(temps[i], files[i].first);
    } catch (const fs::filesystem_error& e) {
        std::error_code ec;
        for (const auto& t : temps)
            fs::remove(t, ec);
        throw ConfigError(std::string("cannot write output: ") + e.what());
    } catch (...) {
        std::error_code ec;
        for (const auto& t : temps)
            fs::remove(t, ec);
        throw;
    }
}

} // namespace blocksel
