#include "radisynth/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "radisynth/errors.hpp"

namespace radisynth {

namespace {

std::uint16_t window16(double v, double lo, double hi) {
    double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(t * 65535.0));
}

void write_file(const std::string& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("short write: " + path);
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32be(out, crc);
}

// minimal grayscale PNG encoder (8 or 16 bit) over zlib
void write_png_gray(const std::string& path, int width, int height, int bit_depth,
                    const std::vector<std::uint8_t>& raster) {
    std::vector<std::uint8_t> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(width));
    put_u32be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0); // deflate
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace

    // filter byte 0 per scanline
    std::size_t stride = static_cast<std::size_t>(width) * bit_depth / 8;
    std::vector<std::uint8_t> scan;
    scan.reserve((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        scan.push_back(0);
        scan.insert(scan.end(), raster.begin() + y * stride, raster.begin() + (y + 1) * stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(scan.size()));
    std::vector<std::uint8_t> comp(bound);
    if (compress2(comp.data(), &bound, scan.data(), static_cast<uLong>(scan.size()), 6) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    comp.resize(bound);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", comp);
    png_chunk(out, "IEND", {});
    write_file(path, out.data(), out.size());
}

} // namespace

void write_pgm16(const ImageF& img, const std::string& path, double lo, double hi) {
    std::ostringstream os;
    os << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::string head = os.str();
    std::vector<std::uint8_t> body(head.begin(), head.end());
    body.reserve(body.size() + img.size() * 2);
    for (double v : img.v) {
        std::uint16_t q = window16(v, lo, hi);
        body.push_back(static_cast<std::uint8_t>(q >> 8)); // PGM is big-endian
        body.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
    write_file(path, body.data(), body.size());
}

void write_png16(const ImageF& img, const std::string& path, double lo, double hi) {
    std::vector<std::uint8_t> raster;
    raster.reserve(img.size() * 2);
    for (double v : img.v) {
        std::uint16_t q = window16(v, lo, hi);
        raster.push_back(static_cast<std::uint8_t>(q >> 8));
        raster.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
    write_png_gray(path, img.width, img.height, 16, raster);
}

void write_png8_mask(const MaskImage& mask, const std::string& path) {
    std::vector<std::uint8_t> raster(mask.v.size());
    for (std::size_t i = 0; i < mask.v.size(); ++i) raster[i] = mask.v[i] ? 255 : 0;
    write_png_gray(path, mask.width, mask.height, 8, raster);
}

void write_raw_f32(const ImageF& img, const std::string& path,
                   const std::string& sidecar_json) {
    std::vector<float> buf(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<float>(img.v[i]);
    write_file(path, buf.data(), buf.size() * 4);
    write_file(path + ".json", sidecar_json.data(), sidecar_json.size());
}

std::string read_sidecar(const std::string& path) {
    std::ifstream in(path + ".json", std::ios::binary);
    if (!in) throw NotFoundError("missing sidecar: " + path + ".json");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ImageF read_raw_f32(const std::string& path) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_sidecar(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sidecar JSON: ") + e.what());
    }
    ImageF img(meta.at("width"), meta.at("height"), meta.value("pitch_mm", 0.0));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing raw image: " + path);
    std::vector<float> buf(img.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (static_cast<std::size_t>(in.gcount()) != buf.size() * 4)
        throw ParseError("raw image truncated: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) img.v[i] = buf[i];
    return img;
}

void write_volume_f32(const Volume& vol, const std::string& path,
                      const std::string& sidecar_json) {
    std::vector<float> buf(vol.v.size());
    for (std::size_t i = 0; i < vol.v.size(); ++i) buf[i] = static_cast<float>(vol.v[i]);
    write_file(path, buf.data(), buf.size() * 4);
    write_file(path + ".json", sidecar_json.data(), sidecar_json.size());
}

Volume read_volume_f32(const std::string& path) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_sidecar(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sidecar JSON: ") + e.what());
    }
    Volume vol(meta.at("nx"), meta.at("ny"), meta.at("nz"), meta.value("voxel_mm", 0.0));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing raw volume: " + path);
    std::vector<float> buf(vol.v.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (static_cast<std::size_t>(in.gcount()) != buf.size() * 4)
        throw ParseError("raw volume truncated: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) vol.v[i] = buf[i];
    return vol;
}

} // namespace radisynth
