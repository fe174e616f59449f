// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Self-describing array container shared by datasets, forward operators and
// checkpoints. Layout:
//
//   CESSM-ARRAYS 1
//   <key> <value...>                 (zero or more attribute lines)
//   array <name> f32le <d0>x<d1>x... (one line per array, in payload order)
//   end
//   <payload: little-endian IEEE-754 binary32, arrays concatenated row-major>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cessm::io {

struct NamedArray {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    std::int64_t element_count() const;
};

struct ArrayFile {
    std::map<std::string, std::string> attributes;
    std::vector<NamedArray> arrays;

    const NamedArray& array(const std::string& name) const;
    const std::string& attribute(const std::string& key) const;
    bool has_attribute(const std::string& key) const { return attributes.contains(key); }
};

/// Serializes to a byte string (header + payload).
std::string encode(const ArrayFile& file);
ArrayFile decode(const std::string& bytes);

/// Writes atomically-ish: refuses to overwrite an existing file.
void write_new(const std::filesystem::path& path, const ArrayFile& file);
ArrayFile read(const std::filesystem::path& path);

/// Reads a whole file into a string; throws FormatError if it cannot be opened.
std::string read_bytes(const std::filesystem::path& path);
/// Writes bytes to a path that must not yet exist.
void write_bytes_new(const std::filesystem::path& path, const std::string& bytes);

} // namespace cessm::io
