#include "tsfactor/io.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <vector>

#include "tsfactor/errors.hpp"

namespace tsf {
namespace {

constexpr char kMagic[4] = {'T', 'S', 'M', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeReal64 = 0;
constexpr std::size_t kHeaderBytes = 25;

static_assert(std::endian::native == std::endian::little,
              "value encoding below assumes a little-endian host");

std::uint64_t file_size_or_throw(std::ifstream& in, const std::string& path) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(0, std::ios::beg);
    if (end < 0) throw IoError(path + ": cannot determine file size");
    return static_cast<std::uint64_t>(end);
}

struct Header {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
};

Header read_header(std::ifstream& in, const std::string& path, std::uint64_t file_bytes) {
    if (file_bytes < kHeaderBytes) {
        throw LengthError(path + ": header truncated, expected at least " +
                          std::to_string(kHeaderBytes) + " bytes, got " +
                          std::to_string(file_bytes));
    }
    unsigned char raw[kHeaderBytes];
    in.read(reinterpret_cast<char*>(raw), kHeaderBytes);
    if (!in) throw IoError(path + ": header read failed");
    if (std::memcmp(raw, kMagic, 4) != 0) {
        throw FormatError(path + ": bad magic at offset 0");
    }
    std::uint32_t version;
    std::memcpy(&version, raw + 4, 4);
    if (version != kVersion) {
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    }
    Header h;
    std::memcpy(&h.rows, raw + 8, 8);
    std::memcpy(&h.cols, raw + 16, 8);
    if (raw[24] != kDtypeReal64) {
        throw FormatError(path + ": unsupported dtype " + std::to_string(raw[24]));
    }
    const std::uint64_t expected = kHeaderBytes + 8 * h.rows * h.cols;
    if (file_bytes != expected) {
        throw LengthError(path + ": expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(file_bytes));
    }
    return h;
}

void read_values(std::ifstream& in, const std::string& path, double* dst, std::size_t count) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * 8));
    if (!in) throw IoError(path + ": payload read failed");
}

}  // namespace

void write_matrix(const std::string& path, const DenseMatrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    unsigned char raw[kHeaderBytes];
    std::memcpy(raw, kMagic, 4);
    const std::uint32_t version = kVersion;
    std::memcpy(raw + 4, &version, 4);
    const std::uint64_t rows = m.rows();
    const std::uint64_t cols = m.cols();
    std::memcpy(raw + 8, &rows, 8);
    std::memcpy(raw + 16, &cols, 8);
    raw[24] = kDtypeReal64;
    out.write(reinterpret_cast<const char*>(raw), kHeaderBytes);
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * 8));
    if (!out) throw IoError(path + ": write failed");
}

DenseMatrix read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    const std::uint64_t bytes = file_size_or_throw(in, path);
    const Header h = read_header(in, path, bytes);
    DenseMatrix m(h.rows, h.cols);
    read_values(in, path, m.data(), m.size());
    validate_finite(m, path);
    return m;
}

DistMatrix read_matrix_partitioned(const std::string& path, std::size_t partitions) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    const std::uint64_t bytes = file_size_or_throw(in, path);
    const Header h = read_header(in, path, bytes);
    if (partitions == 0) throw ConfigError("read_matrix_partitioned: partitions must be >= 1");
    if (partitions > h.rows) {
        throw DimensionError(path + ": " + std::to_string(partitions) +
                             " partitions exceed " + std::to_string(h.rows) + " rows");
    }
    const std::size_t base = h.rows / partitions;
    const std::size_t extra = h.rows % partitions;
    std::vector<RowBlock> blocks;
    blocks.reserve(partitions);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < partitions; ++p) {
        const std::size_t rows = base + (p < extra ? 1 : 0);
        DenseMatrix block(rows, h.cols);
        read_values(in, path, block.data(), block.size());
        validate_finite(block, path + " (block " + std::to_string(p) + ")");
        blocks.push_back({offset, std::move(block)});
        offset += rows;
    }
    return DistMatrix(h.rows, h.cols, std::move(blocks));
}

DenseMatrix read_csv(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open");
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::size_t fields = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t end = line.find(delimiter, start);
            const std::string tok =
                line.substr(start, end == std::string::npos ? end : end - start);
            const char* cstr = tok.c_str();
            char* parse_end = nullptr;
            errno = 0;
            const double v = std::strtod(cstr, &parse_end);
            while (parse_end && *parse_end == ' ') ++parse_end;
            if (parse_end == cstr || (parse_end && *parse_end != '\0')) {
                throw ParseError(lineno, "invalid number '" + tok + "'");
            }
            if (!std::isfinite(v)) {
                throw ParseError(lineno, "non-finite value '" + tok + "'");
            }
            values.push_back(v);
            ++fields;
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (rows == 0) {
            cols = fields;
        } else if (fields != cols) {
            throw ParseError(lineno, "expected " + std::to_string(cols) + " fields, got " +
                                         std::to_string(fields));
        }
        ++rows;
    }
    return DenseMatrix(rows, cols, std::move(values));
}

void write_csv(const std::string& path, const DenseMatrix& m, char delimiter) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    char buf[40];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << buf;
            if (j + 1 < m.cols()) out << delimiter;
        }
        out << '\n';
    }
    if (!out) throw IoError(path + ": write failed");
}

}  // namespace tsf
