#pragma once

// 8-bit binary PGM (P5) images as matrices with entries in [0, 1].

#include "ttmera/errors.hpp"
#include "ttmera/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace ttmera::pgm {

namespace detail {

inline void skip_space_and_comments(std::istream& is) {
    while (is) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
}

inline std::size_t read_header_number(std::istream& is) {
    skip_space_and_comments(is);
    std::size_t v = 0;
    bool any = false;
    while (std::isdigit(is.peek())) {
        v = v * 10 + static_cast<std::size_t>(is.get() - '0');
        any = true;
        if (v > 1'000'000) throw FormatError("PGM: header value too large");
    }
    if (!any) throw FormatError("PGM: malformed header");
    return v;
}

} // namespace detail

// Rows x cols matrix, row 0 at the top of the image.
inline Matrix read(std::istream& is) {
    char magic[2] = {0, 0};
    is.read(magic, 2);
    if (is.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') throw FormatError("PGM: expected binary P5 image");
    const std::size_t width = detail::read_header_number(is);
    const std::size_t height = detail::read_header_number(is);
    const std::size_t maxval = detail::read_header_number(is);
    if (width == 0 || height == 0) throw FormatError("PGM: empty image");
    if (maxval == 0 || maxval > 255) throw FormatError("PGM: only 8-bit images are supported");
    if (!std::isspace(is.get())) throw FormatError("PGM: malformed header");
    std::string pixels(width * height, '\0');
    is.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (static_cast<std::size_t>(is.gcount()) != pixels.size()) throw FormatError("PGM: truncated pixel data");
    Matrix m(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                static_cast<unsigned char>(pixels[r * width + c]) / static_cast<double>(maxval);
    return m;
}

inline Matrix load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return read(is);
}

// Writes m linearly rescaled from [lo, hi] to 0..255 (clamped).
inline void write(std::ostream& os, const Matrix& m, double lo = 0.0, double hi = 1.0) {
    os << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double x = std::clamp((m(r, c) - lo) / span, 0.0, 1.0);
            os.put(static_cast<char>(static_cast<unsigned char>(std::lround(x * 255.0))));
        }
    }
}

inline void save(const std::string& path, const Matrix& m, double lo = 0.0, double hi = 1.0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write(os, m, lo, hi);
    if (!os) throw FormatError("write failed: " + path);
}

// Writes m rescaled to its own value range.
inline void save_autoscaled(const std::string& path, const Matrix& m) {
    save(path, m, m.minCoeff(), m.maxCoeff());
}

// Bilinear resampling to rows x cols.
inline Matrix resize(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    if (rows <= 0 || cols <= 0) throw ArgumentError("resize: empty target");
    Matrix out(rows, cols);
    auto coord = [](Eigen::Index i, Eigen::Index n_out, Eigen::Index n_in) {
        if (n_out == 1) return 0.5 * static_cast<double>(n_in - 1);
        return static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
    };
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double y = coord(r, rows, m.rows());
        const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(y));
        const Eigen::Index y1 = std::min(y0 + 1, m.rows() - 1);
        const double fy = y - static_cast<double>(y0);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double x = coord(c, cols, m.cols());
            const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(x));
            const Eigen::Index x1 = std::min(x0 + 1, m.cols() - 1);
            const double fx = x - static_cast<double>(x0);
            out(r, c) = (1 - fy) * ((1 - fx) * m(y0, x0) + fx * m(y0, x1)) + fy * ((1 - fx) * m(y1, x0) + fx * m(y1, x1));
        }
    }
    return out;
}

} // namespace ttmera::pgm
