#include "watermap/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "watermap/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "rawbin I/O assumes a little-endian host");

namespace watermap::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

double parse_field(const std::string& field, const std::string& path,
                   std::size_t line_no) {
    const char* b = field.data();
    const char* e = b + field.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw ParseError(path + ": line " + std::to_string(line_no) +
                         ": bad numeric field '" + field + "'");
    if (!std::isfinite(v))
        throw ParseError(path + ": line " + std::to_string(line_no) +
                         ": non-finite value");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool blank_line(const std::string& line) {
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') return false;
    return true;
}

} // namespace

Matrix read_csv_matrix(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (header && line_no == 1) continue;
        if (blank_line(line)) continue;
        auto fields = split_csv_line(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_field(f, path, line_no));
        if (width == 0) {
            width = row.size();
        } else if (row.size() != width) {
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": expected " + std::to_string(width) + " fields, got " +
                             std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": no data rows");
    Matrix m(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::memcpy(m.row(i), rows[i].data(), width * sizeof(double));
    return m;
}

Matrix read_rawbin_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    std::uint64_t header[2];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header)))
        throw ParseError(path + ": truncated header");
    std::uint64_t n = header[0];
    std::uint64_t m = header[1];
    if (n == 0 || m == 0) throw ParseError(path + ": zero dimension in header");
    Matrix mat(n, m);
    std::size_t bytes = static_cast<std::size_t>(n) * m * sizeof(double);
    if (!in.read(reinterpret_cast<char*>(mat.data()), bytes))
        throw ParseError(path + ": truncated payload");
    char extra;
    if (in.read(&extra, 1)) throw ParseError(path + ": trailing bytes");
    for (std::size_t i = 0; i < n * m; ++i)
        if (!std::isfinite(mat.data()[i]))
            throw ParseError(path + ": non-finite value at flat index " +
                             std::to_string(i));
    return mat;
}

std::vector<int> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open");
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_line(line)) continue;
        const char* b = line.data();
        const char* e = b + line.size();
        while (e > b && (e[-1] == '\r' || e[-1] == ' ')) --e;
        int v = 0;
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc{} || p != e)
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": bad label '" + line + "'");
        labels.push_back(v);
    }
    if (labels.empty()) throw ParseError(path + ": no labels");
    return labels;
}

void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::string& header) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    if (!header.empty()) out << header << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError(path + ": write failed");
}

void write_embedding_csv(const std::string& path, const Embedding& emb) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "index,x,y\n";
    for (std::size_t i = 0; i < emb.size(); ++i)
        out << i << ',' << format_double(emb.x[i]) << ','
            << format_double(emb.y[i]) << '\n';
    if (!out) throw IoError(path + ": write failed");
}

Embedding read_embedding_csv(const std::string& path) {
    Matrix m = read_csv_matrix(path, true);
    if (m.cols() != 3)
        throw ParseError(path + ": expected index,x,y columns");
    Embedding emb(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        emb.x[i] = m(i, 1);
        emb.y[i] = m(i, 2);
    }
    return emb;
}

} // namespace watermap::io
