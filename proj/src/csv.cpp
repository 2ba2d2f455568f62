#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bn2mf {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

[[noreturn]] void cell_error(const std::string& path, const std::string& row_id,
                             const std::string& col_id, const std::string& what) {
    std::ostringstream msg;
    msg << path << ": cell (" << row_id << ", " << col_id << ") " << what;
    throw std::invalid_argument(msg.str());
}

}  // namespace

ExposureMatrix load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    const std::vector<std::string> header = split_line(strip_cr(line));
    if (header.size() < 2)
        throw std::invalid_argument(path + ": header must list at least one column id");
    const std::vector<std::string> col_ids(header.begin() + 1, header.end());
    const std::size_t p = col_ids.size();

    std::vector<std::string> row_ids;
    std::vector<double> data;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != p + 1) {
            std::ostringstream msg;
            msg << path << ": row '" << cells.front() << "' has " << cells.size() - 1
                << " cells, expected " << p;
            throw std::invalid_argument(msg.str());
        }
        row_ids.push_back(cells[0]);
        for (std::size_t j = 0; j < p; ++j) {
            const std::string& cell = cells[j + 1];
            double value = 0.0;
            const auto* begin = cell.data();
            const auto* end = begin + cell.size();
            const auto [ptr, ec] = std::from_chars(begin, end, value);
            if (ec != std::errc{} || ptr != end)
                cell_error(path, cells[0], col_ids[j], "is not a number: '" + cell + "'");
            if (std::isnan(value)) cell_error(path, cells[0], col_ids[j], "is NaN");
            if (value < 0.0) cell_error(path, cells[0], col_ids[j], "is negative");
            data.push_back(value);
        }
    }
    if (row_ids.empty()) throw std::invalid_argument(path + ": no data rows");

    Matrix values(static_cast<Index>(row_ids.size()), static_cast<Index>(p));
    for (Index i = 0; i < values.rows(); ++i)
        for (Index j = 0; j < values.cols(); ++j)
            values(i, j) = data[static_cast<std::size_t>(i) * p + static_cast<std::size_t>(j)];
    return ExposureMatrix(std::move(values), std::move(row_ids), col_ids);
}

void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& row_ids,
               const std::vector<std::string>& col_ids) {
    if (static_cast<Index>(row_ids.size()) != values.rows() ||
        static_cast<Index>(col_ids.size()) != values.cols())
        throw std::invalid_argument("write_csv: label counts do not match dimensions");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "id";
    for (const auto& c : col_ids) out << ',' << c;
    out << '\n';
    char buf[40];
    for (Index i = 0; i < values.rows(); ++i) {
        out << row_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < values.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", values(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

void write_csv(const std::string& path, const ExposureMatrix& x) {
    write_csv(path, x.values(), x.row_ids(), x.col_ids());
}

ExposureMatrix preprocess(const ExposureMatrix& x, const std::optional<Vector>& lod,
                          bool scale_sd) {
    Matrix values = x.values();
    const Index n = values.rows();
    const Index p = values.cols();

    if (lod) {
        if (lod->size() != p)
            throw std::invalid_argument("preprocess: LOD vector length must equal column count");
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (Index j = 0; j < p; ++j) {
            const double limit = (*lod)(j);
            if (std::isnan(limit) || limit <= 0.0) continue;  // no limit for this column
            for (Index i = 0; i < n; ++i)
                if (values(i, j) < limit) values(i, j) = limit * inv_sqrt2;
        }
    }

    if (scale_sd) {
        for (Index j = 0; j < p; ++j) {
            const double mean = values.col(j).mean();
            const double var =
                (values.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
            if (!(var > 0.0))
                throw std::invalid_argument("preprocess: column '" +
                                            x.col_ids()[static_cast<std::size_t>(j)] +
                                            "' has zero variance");
            values.col(j) /= std::sqrt(var);
        }
    }

    return ExposureMatrix(std::move(values), x.row_ids(), x.col_ids());
}

}  // namespace bn2mf
