#include "avphon/image.hpp"

#include <cmath>
#include <fstream>

namespace avphon {

uint8_t to_grayscale(double r, double g, double b) {
    double y = 0.2989 * r + 0.587 * g + 0.114 * b;
    long v = std::lround(y);
    return static_cast<uint8_t>(std::clamp(v, 0L, 255L));
}

Vec vectorize(const Image8& image) {
    Vec v(image.size());
    for (int i = 0; i < image.size(); ++i) v[i] = image.pixels[static_cast<std::size_t>(i)];
    return v;
}

namespace io {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in, const std::filesystem::path& path) {
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = in.get();
        c = in.get();
    }
    if (c == EOF) throw DataError("truncated image header: " + path.string());
    in.unget();
    int value = 0;
    if (!(in >> value)) throw DataError("malformed image header: " + path.string());
    return value;
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path.string());

    char p = 0, kind = 0;
    in.get(p).get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        throw DataError("unsupported image format (need binary PGM/PPM): " + path.string());

    Image8 img;
    img.width = next_header_int(in, path);
    img.height = next_header_int(in, path);
    int maxval = next_header_int(in, path);
    if (maxval != 255) throw DataError("expected 8-bit image (maxval 255): " + path.string());
    in.get();  // single whitespace after maxval

    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (kind == '5') {
        img.pixels.resize(n);
        in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    } else {
        std::vector<uint8_t> rgb(n * 3);
        in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(n * 3));
        img.pixels.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] = to_grayscale(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
    }
    if (!in) throw DataError("truncated image payload: " + path.string());
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image8& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path.string());
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw DataError("short write to image: " + path.string());
}

}  // namespace io
}  // namespace avphon
