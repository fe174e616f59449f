// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/io/container.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cessm/errors.hpp"

namespace cessm::io {
namespace {

constexpr std::string_view kMagic = "CESSM-ARRAYS 1";

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(shape[i]);
    }
    return out;
}

std::vector<std::int64_t> parse_shape(std::string_view text, int line) {
    std::vector<std::int64_t> shape;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto next = text.find('x', pos);
        if (next == std::string_view::npos) next = text.size();
        std::int64_t dim = 0;
        auto piece = text.substr(pos, next - pos);
        auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), dim);
        if (ec != std::errc{} || ptr != piece.data() + piece.size() || dim < 0) {
            throw FormatError("array container: bad shape '" + std::string(text) + "' on line " +
                              std::to_string(line));
        }
        shape.push_back(dim);
        pos = next + 1;
    }
    return shape;
}

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

} // namespace

std::int64_t NamedArray::element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

const NamedArray& ArrayFile::array(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw FormatError("array container: no array named '" + name + "'");
}

const std::string& ArrayFile::attribute(const std::string& key) const {
    auto it = attributes.find(key);
    if (it == attributes.end()) throw FormatError("array container: missing attribute '" + key + "'");
    return it->second;
}

std::string encode(const ArrayFile& file) {
    std::string out(kMagic);
    out += '\n';
    for (const auto& [key, value] : file.attributes) {
        if (key.empty() || key.find_first_of(" \n") != std::string::npos || key == "array" || key == "end") {
            throw FormatError("array container: invalid attribute key '" + key + "'");
        }
        if (value.find('\n') != std::string::npos) {
            throw FormatError("array container: attribute '" + key + "' contains a newline");
        }
        out += key + ' ' + value + '\n';
    }
    std::size_t payload = 0;
    for (const auto& a : file.arrays) {
        if (a.element_count() != static_cast<std::int64_t>(a.data.size())) {
            throw FormatError("array container: array '" + a.name + "' shape does not match data size");
        }
        out += "array " + a.name + " f32le " + shape_to_string(a.shape) + '\n';
        payload += a.data.size();
    }
    out += "end\n";
    const auto header = out.size();
    out.resize(header + payload * 4);
    char* dst = out.data() + header;
    for (const auto& a : file.arrays) {
        for (float f : a.data) {
            std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(f));
            std::memcpy(dst, &bits, 4);
            dst += 4;
        }
    }
    return out;
}

ArrayFile decode(const std::string& bytes) {
    ArrayFile file;
    std::size_t pos = 0;
    int line_no = 0;
    auto next_line = [&]() -> std::string_view {
        auto end = bytes.find('\n', pos);
        if (end == std::string::npos) throw FormatError("array container: truncated header");
        std::string_view line(bytes.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        return line;
    };
    if (next_line() != kMagic) throw FormatError("array container: bad magic line");
    std::vector<std::size_t> sizes;
    for (;;) {
        auto line = next_line();
        if (line == "end") break;
        auto space = line.find(' ');
        auto key = line.substr(0, space);
        auto rest = space == std::string_view::npos ? std::string_view{} : line.substr(space + 1);
        if (key == "array") {
            std::istringstream in{std::string(rest)};
            std::string name, dtype, shape;
            if (!(in >> name >> dtype >> shape) || dtype != "f32le") {
                throw FormatError("array container: malformed array line " + std::to_string(line_no));
            }
            NamedArray a;
            a.name = name;
            a.shape = parse_shape(shape, line_no);
            sizes.push_back(static_cast<std::size_t>(a.element_count()));
            file.arrays.push_back(std::move(a));
        } else {
            file.attributes.emplace(std::string(key), std::string(rest));
        }
    }
    std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (bytes.size() - pos != total * 4) {
        throw FormatError("array container: payload has " + std::to_string(bytes.size() - pos) +
                          " bytes, header declares " + std::to_string(total * 4));
    }
    const char* src = bytes.data() + pos;
    for (std::size_t i = 0; i < file.arrays.size(); ++i) {
        auto& data = file.arrays[i].data;
        data.resize(sizes[i]);
        for (auto& f : data) {
            std::uint32_t bits;
            std::memcpy(&bits, src, 4);
            f = std::bit_cast<float>(to_little(bits));
            src += 4;
        }
    }
    return file;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes_new(const std::filesystem::path& path, const std::string& bytes) {
    if (std::filesystem::exists(path)) {
        throw FormatError("refusing to overwrite existing artifact '" + path.string() + "'");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot create '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

void write_new(const std::filesystem::path& path, const ArrayFile& file) { write_bytes_new(path, encode(file)); }

ArrayFile read(const std::filesystem::path& path) {
    try {
        return decode(read_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace cessm::io
