#include "onn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace onn {

namespace {

std::runtime_error bad_file(const std::filesystem::path& path, const std::string& why) {
    return std::runtime_error(path.string() + ": " + why);
}

// Next header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok += static_cast<char>(c);
    }
    return tok;
}

Raster read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw bad_file(path, "cannot open");
    const std::string magic = pnm_token(in);
    if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") throw bad_file(path, "unsupported PNM type");
    Raster r;
    r.channels = (magic == "P3" || magic == "P6") ? 3 : 1;
    try {
        r.width = std::stoul(pnm_token(in));
        r.height = std::stoul(pnm_token(in));
    } catch (const std::exception&) {
        throw bad_file(path, "malformed header");
    }
    const unsigned long maxval = std::stoul(pnm_token(in));
    if (r.width == 0 || r.height == 0 || maxval == 0 || maxval > 65535) throw bad_file(path, "malformed header");
    const std::size_t count = r.width * r.height * r.channels;
    r.pixels.resize(count);
    auto scale = [&](unsigned long v) {
        return static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(std::min(v, maxval)) / maxval));
    };
    if (magic == "P2" || magic == "P3") {
        for (auto& p : r.pixels) {
            const auto tok = pnm_token(in);
            if (tok.empty()) throw bad_file(path, "truncated pixel data");
            p = scale(std::stoul(tok));
        }
    } else {
        const std::size_t bytes_per = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> buf(count * bytes_per);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw bad_file(path, "truncated pixel data");
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned long v = bytes_per == 1 ? buf[i] : (static_cast<unsigned long>(buf[2 * i]) << 8) | buf[2 * i + 1];
            r.pixels[i] = maxval == 255 ? static_cast<std::uint8_t>(v) : scale(v);
        }
    }
    return r;
}

Raster read_png(const std::filesystem::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw bad_file(path, "cannot open");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw bad_file(path, "libpng initialisation failed");
    }
    Raster r;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw bad_file(path, "corrupt PNG");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    r.width = png_get_image_width(png, info);
    r.height = png_get_image_height(png, info);
    r.channels = png_get_channels(png, info);
    r.pixels.resize(r.width * r.height * r.channels);
    rows.resize(r.height);
    for (std::size_t y = 0; y < r.height; ++y) rows[y] = r.pixels.data() + y * r.width * r.channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    if (r.channels == 2) {  // gray + alpha survived strip on some versions
        Raster g{r.width, r.height, 1, std::vector<std::uint8_t>(r.width * r.height)};
        for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = r.pixels[2 * i];
        return g;
    }
    return r;
}

}  // namespace

Raster read_raster(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw bad_file(path, "cannot open");
    char magic[8] = {};
    in.read(magic, 8);
    in.close();
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (std::equal(std::begin(png_sig), std::end(png_sig), reinterpret_cast<unsigned char*>(magic))) return read_png(path);
    if (magic[0] == 'P' && (magic[1] == '2' || magic[1] == '3' || magic[1] == '5' || magic[1] == '6'))
        return read_pnm(path);
    throw bad_file(path, "unrecognised raster format (expected PGM, PPM or PNG)");
}

void write_pgm(const std::filesystem::path& path, const Raster& raster) {
    if (raster.channels != 1) throw std::invalid_argument("write_pgm expects a single-channel raster");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw bad_file(path, "cannot write");
    out << "P5\n" << raster.width << ' ' << raster.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.pixels.data()), static_cast<std::streamsize>(raster.pixels.size()));
}

Tensor to_grayscale(const Raster& raster) {
    if (raster.width == 0 || raster.height == 0) throw std::invalid_argument("empty raster");
    Tensor out = Tensor::matrix(raster.height, raster.width);
    const std::size_t c = raster.channels;
    for (std::size_t i = 0; i < raster.width * raster.height; ++i) {
        const auto* p = raster.pixels.data() + i * c;
        if (c == 1) {
            out[i] = p[0] / 255.0;
        } else {
            out[i] = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
        }
    }
    return out;
}

Raster to_raster(const Tensor& image) {
    Raster r{image.cols(), image.rows(), 1, std::vector<std::uint8_t>(image.size())};
    for (std::size_t i = 0; i < image.size(); ++i)
        r.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
    return r;
}

Tensor resize_bilinear(const Tensor& image, std::size_t rows, std::size_t cols) {
    if (image.rank() != 2 || rows == 0 || cols == 0) throw std::invalid_argument("resize_bilinear: bad shape");
    if (image.rows() == rows && image.cols() == cols) return image;
    Tensor out = Tensor::matrix(rows, cols);
    const double sy = static_cast<double>(image.rows()) / static_cast<double>(rows);
    const double sx = static_cast<double>(image.cols()) / static_cast<double>(cols);
    const double max_y = static_cast<double>(image.rows() - 1);
    const double max_x = static_cast<double>(image.cols() - 1);
    for (std::size_t i = 0; i < rows; ++i) {
        const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, image.rows() - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t j = 0; j < cols; ++j) {
            const double fx = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, image.cols() - 1);
            const double tx = fx - static_cast<double>(x0);
            const double top = image(y0, x0) * (1.0 - tx) + image(y0, x1) * tx;
            const double bottom = image(y1, x0) * (1.0 - tx) + image(y1, x1) * tx;
            out(i, j) = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

}  // namespace onn
