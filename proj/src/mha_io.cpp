#include "inrstrain/mha_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "inrstrain/errors.hpp"

namespace inrstrain {

static_assert(std::endian::native == std::endian::little, "MetaImage payloads are written little-endian");

namespace {

struct Header {
    Geometry geom;
    ElementType type = ElementType::Float;
    std::streamoff payload_offset = 0;
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& key, const std::string& value, std::size_t count)
{
    std::istringstream in(value);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
            throw ParseError(key, "not a number: '" + tok + "'");
        }
        out.push_back(v);
    }
    if (out.size() != count) {
        throw ParseError(key, "expected " + std::to_string(count) + " values");
    }
    return out;
}

Header read_header(std::ifstream& in)
{
    std::map<std::string, std::string> fields;
    std::string line;
    bool found_data_file = false;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(trim(line), "header line without '='");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        fields[key] = value;
        if (key == "ElementDataFile") {
            found_data_file = true;
            break;
        }
    }
    if (!found_data_file) {
        throw ParseError("ElementDataFile", "missing");
    }

    const auto require = [&](const std::string& key) -> const std::string& {
        const auto it = fields.find(key);
        if (it == fields.end()) {
            throw ParseError(key, "missing");
        }
        return it->second;
    };

    if (parse_numbers("NDims", require("NDims"), 1)[0] != 3.0) {
        throw ParseError("NDims", "only 3-dimensional images are supported");
    }
    if (require("ElementDataFile") != "LOCAL") {
        throw ParseError("ElementDataFile", "only LOCAL payloads are supported");
    }
    if (const auto it = fields.find("CompressedData"); it != fields.end() && it->second != "False") {
        throw ParseError("CompressedData", "compressed payloads are not supported");
    }
    if (const auto it = fields.find("BinaryDataByteOrderMSB"); it != fields.end() && it->second != "False") {
        throw ParseError("BinaryDataByteOrderMSB", "big-endian payloads are not supported");
    }

    Header h;
    const auto dims = parse_numbers("DimSize", require("DimSize"), 3);
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1 || dims[a] != std::floor(dims[a])) {
            throw ParseError("DimSize", "dimensions must be positive integers");
        }
        h.geom.dims[a] = static_cast<int>(dims[a]);
    }
    const auto spacing = parse_numbers("ElementSpacing", require("ElementSpacing"), 3);
    const auto offset = parse_numbers("Offset", require("Offset"), 3);
    const auto matrix = parse_numbers("TransformMatrix", require("TransformMatrix"), 9);
    for (int a = 0; a < 3; ++a) {
        h.geom.spacing[a] = spacing[a];
        h.geom.origin[a] = offset[a];
    }
    // Each consecutive triple is one direction column.
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r)
            h.geom.direction(r, c) = matrix[3 * c + r];

    const std::string& type = require("ElementType");
    if (type == "MET_FLOAT") {
        h.type = ElementType::Float;
    } else if (type == "MET_SHORT") {
        h.type = ElementType::Short;
    } else if (type == "MET_UCHAR") {
        h.type = ElementType::UChar;
    } else {
        throw ParseError("ElementType", "unsupported element type '" + type + "'");
    }
    try {
        h.geom.validate();
    } catch (const DataError& e) {
        throw ParseError("TransformMatrix", e.what());
    }
    h.payload_offset = in.tellg();
    return h;
}

std::size_t element_size(ElementType t)
{
    switch (t) {
    case ElementType::Float: return 4;
    case ElementType::Short: return 2;
    case ElementType::UChar: return 1;
    }
    return 0;
}

std::vector<char> read_payload(std::ifstream& in, const Header& h)
{
    const std::size_t expected = h.geom.voxel_count() * element_size(h.type);
    std::vector<char> bytes(expected);
    in.read(bytes.data(), static_cast<std::streamsize>(expected));
    if (static_cast<std::size_t>(in.gcount()) != expected) {
        throw PayloadError("payload error: expected " + std::to_string(expected) + " bytes, found "
                           + std::to_string(in.gcount()));
    }
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw PayloadError("payload error: trailing bytes after " + std::to_string(expected) + " byte payload");
    }
    return bytes;
}

std::ifstream open_for_read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    return in;
}

std::string fmt9(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_file(const Geometry& g, const char* type_name, const void* data, std::size_t bytes,
                const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << "ObjectType = Image\n";
    out << "NDims = 3\n";
    out << "BinaryData = True\n";
    out << "BinaryDataByteOrderMSB = False\n";
    out << "CompressedData = False\n";
    out << "TransformMatrix =";
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r)
            out << ' ' << fmt9(g.direction(r, c));
    out << "\nOffset = " << fmt9(g.origin[0]) << ' ' << fmt9(g.origin[1]) << ' ' << fmt9(g.origin[2]) << '\n';
    out << "CenterOfRotation = 0 0 0\n";
    out << "ElementSpacing = " << fmt9(g.spacing[0]) << ' ' << fmt9(g.spacing[1]) << ' ' << fmt9(g.spacing[2])
        << '\n';
    out << "DimSize = " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
    out << "ElementType = " << type_name << '\n';
    out << "ElementDataFile = LOCAL\n";
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

} // namespace

Volume3D read_mha_volume(const std::filesystem::path& path)
{
    auto in = open_for_read(path);
    const Header h = read_header(in);
    const auto bytes = read_payload(in, h);
    Volume3D vol(h.geom);
    const std::size_t n = vol.size();
    switch (h.type) {
    case ElementType::Float:
        std::memcpy(vol.data.data(), bytes.data(), n * sizeof(float));
        break;
    case ElementType::Short:
        for (std::size_t i = 0; i < n; ++i) {
            std::int16_t v;
            std::memcpy(&v, bytes.data() + 2 * i, 2);
            vol.data[i] = static_cast<float>(v);
        }
        break;
    case ElementType::UChar:
        for (std::size_t i = 0; i < n; ++i) {
            vol.data[i] = static_cast<float>(static_cast<std::uint8_t>(bytes[i]));
        }
        break;
    }
    validate(vol);
    return vol;
}

LabelMask read_mha_mask(const std::filesystem::path& path)
{
    auto in = open_for_read(path);
    const Header h = read_header(in);
    if (h.type == ElementType::Float) {
        throw ParseError("ElementType", "label masks must be MET_UCHAR or MET_SHORT");
    }
    const auto bytes = read_payload(in, h);
    LabelMask mask(h.geom);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        int v = 0;
        if (h.type == ElementType::UChar) {
            v = static_cast<std::uint8_t>(bytes[i]);
        } else {
            std::int16_t s;
            std::memcpy(&s, bytes.data() + 2 * i, 2);
            v = s;
        }
        if (v < 0 || v > label::max_code) {
            throw PayloadError("payload error: label value " + std::to_string(v) + " outside {0,1,2,3}");
        }
        mask.data[i] = static_cast<std::uint8_t>(v);
    }
    return mask;
}

void write_mha(const Volume3D& vol, const std::filesystem::path& path)
{
    validate(vol);
    write_file(vol.geom, "MET_FLOAT", vol.data.data(), vol.size() * sizeof(float), path);
}

void write_mha(const LabelMask& mask, const std::filesystem::path& path)
{
    validate(mask);
    write_file(mask.geom, "MET_UCHAR", mask.data.data(), mask.size(), path);
}

} // namespace inrstrain
