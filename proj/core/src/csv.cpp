#include "phvae/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "phvae/error.hpp"

namespace phvae::csv {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t')) {
        ++first;
    }
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) {
        --last;
    }
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw FormatError("not a number: '" + s + "'");
    }
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

void write_matrix(const std::filesystem::path& path, const ad::Tensor& m) {
    std::ofstream os(path);
    if (!os) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                os << ',';
            }
            os << format_double(m(r, c));
        }
        os << '\n';
    }
}

ad::Tensor read_matrix(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw FormatError("cannot open " + path.string());
    }
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto fields = split(line);
        if (rows == 0) {
            cols = fields.size();
        } else if (fields.size() != cols) {
            throw FormatError(path.string() + ": ragged row " + std::to_string(rows + 1));
        }
        for (const auto& f : fields) {
            values.push_back(parse_double(f));
        }
        ++rows;
    }
    return ad::Tensor(rows, cols, std::move(values));
}

} // namespace phvae::csv
