#include "pdeseg/io.hpp"

#include "pdeseg/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace pdeseg {

namespace {

void write_bytes(const std::string& path, const std::string& header,
                 const std::vector<std::uint8_t>& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open for writing: " + path);
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!os)
        throw IoError("write failed: " + path);
}

struct PgmParser {
    std::vector<char> bytes;
    std::size_t pos = 0;
    std::string path;

    [[noreturn]] void fail(const std::string& what) const {
        throw IoError(path + ": " + what + " at byte " + std::to_string(pos));
    }

    int peek() const { return pos < bytes.size() ? static_cast<unsigned char>(bytes[pos]) : -1; }

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    long parse_int(const char* name) {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
            fail(std::string("expected ") + name);
        long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000'000) fail(std::string(name) + " out of range");
            ++pos;
        }
        return v;
    }
};

PgmParser load_pgm(const std::string& path, long& height, long& width) {
    PgmParser p;
    p.path = path;
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open: " + path);
    p.bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());

    if (p.bytes.size() < 2 || p.bytes[0] != 'P' || p.bytes[1] != '5')
        p.fail("expected magic 'P5'");
    p.pos = 2;

    width = p.parse_int("width");
    height = p.parse_int("height");
    const long maxval = p.parse_int("maxval");
    if (width < 1 || height < 1) p.fail("dims must be >= 1");
    if (maxval != 255) p.fail("expected maxval 255");

    // exactly one whitespace byte before the raster
    if (p.pos >= p.bytes.size() || !std::isspace(static_cast<unsigned char>(p.bytes[p.pos])))
        p.fail("expected whitespace before raster");
    ++p.pos;

    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (p.bytes.size() - p.pos < need) {
        p.pos = p.bytes.size();
        p.fail("raster truncated");
    }
    return p;
}

} // namespace

void write_pgm(const std::string& path, const Field2D& img) {
    std::vector<std::uint8_t> data(img.size());
    for (std::size_t k = 0; k < img.size(); ++k) {
        const double v = std::clamp(img[k], 0.0, 1.0);
        data[k] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    const std::string header =
        "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    write_bytes(path, header, data);
}

void write_pgm(const std::string& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> data(mask.size());
    for (std::size_t k = 0; k < mask.size(); ++k)
        data[k] = mask[k] ? 255 : 0;
    const std::string header =
        "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
    write_bytes(path, header, data);
}

Field2D read_pgm(const std::string& path) {
    long height = 0, width = 0;
    PgmParser p = load_pgm(path, height, width);
    Field2D f(static_cast<int>(height), static_cast<int>(width));
    for (std::size_t k = 0; k < f.size(); ++k)
        f[k] = static_cast<unsigned char>(p.bytes[p.pos + k]) / 255.0;
    return f;
}

BinaryMask read_pgm_mask(const std::string& path) {
    long height = 0, width = 0;
    PgmParser p = load_pgm(path, height, width);
    BinaryMask m(static_cast<int>(height), static_cast<int>(width));
    for (std::size_t k = 0; k < m.size(); ++k)
        m[k] = static_cast<unsigned char>(p.bytes[p.pos + k]) >= 128 ? 1 : 0;
    return m;
}

namespace {
constexpr char kFieldMagic[8] = {'F', 'L', 'D', '2', 'D', '6', '4', '\n'};

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
} // namespace

void write_field_raw(const std::string& path, const Field2D& f) {
    static_assert(std::endian::native == std::endian::little,
                  "raw field writer assumes a little-endian host");
    std::vector<std::uint8_t> data;
    data.reserve(8 + f.size() * sizeof(double));
    put_u32_le(data, static_cast<std::uint32_t>(f.height()));
    put_u32_le(data, static_cast<std::uint32_t>(f.width()));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(f.values().data());
    data.insert(data.end(), raw, raw + f.size() * sizeof(double));
    write_bytes(path, std::string(kFieldMagic, 8), data);
}

Field2D read_field_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(is), {});

    if (bytes.size() < 16 || std::memcmp(bytes.data(), kFieldMagic, 8) != 0)
        throw IoError(path + ": bad field magic at byte 0");
    const std::uint32_t h = get_u32_le(bytes.data() + 8);
    const std::uint32_t w = get_u32_le(bytes.data() + 12);
    const std::size_t need = 16 + static_cast<std::size_t>(h) * w * sizeof(double);
    if (h < 1 || w < 1 || bytes.size() != need)
        throw IoError(path + ": field payload size mismatch at byte 16");

    std::vector<double> values(static_cast<std::size_t>(h) * w);
    std::memcpy(values.data(), bytes.data() + 16, values.size() * sizeof(double));
    return Field2D::from_values(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

} // namespace pdeseg
