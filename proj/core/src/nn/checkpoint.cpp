// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/checkpoint.hpp"

#include <charconv>
#include <sstream>

#include "cessm/errors.hpp"
#include "cessm/io/container.hpp"

namespace cessm::nn {

std::string encode_checkpoint(const ParamSet& params, const CheckpointHeader& header) {
    io::ArrayFile file;
    file.attributes = header;
    file.attributes["kind"] = "checkpoint";
    std::string frozen;
    for (const auto& a : params.arrays()) {
        if (!a.trainable) frozen += (frozen.empty() ? "" : ",") + a.name;
        io::NamedArray arr;
        arr.name = a.name;
        for (int d : a.shape) arr.shape.push_back(d);
        arr.data.reserve(a.values.size());
        for (double v : a.values) arr.data.push_back(static_cast<float>(v));
        file.arrays.push_back(std::move(arr));
    }
    file.attributes["frozen"] = frozen.empty() ? "-" : frozen;
    return io::encode(file);
}

ParamSet decode_checkpoint(const std::string& bytes, CheckpointHeader* header) {
    const auto file = io::decode(bytes);
    if (!file.has_attribute("kind") || file.attribute("kind") != "checkpoint") {
        throw FormatError("checkpoint: not a checkpoint file");
    }
    std::vector<std::string> frozen;
    {
        std::stringstream ss(file.attribute("frozen"));
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name != "-") frozen.push_back(name);
        }
    }
    ParamSet params;
    for (const auto& arr : file.arrays) {
        Shape shape;
        for (auto d : arr.shape) shape.push_back(static_cast<int>(d));
        auto& a = params.add(arr.name, shape);
        a.values.assign(arr.data.begin(), arr.data.end());
    }
    for (const auto& name : frozen) params.at(name).trainable = false;
    if (header) {
        *header = file.attributes;
        header->erase("kind");
        header->erase("frozen");
    }
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const CheckpointHeader& header) {
    io::write_bytes_new(path, encode_checkpoint(params, header));
}

ParamSet load_checkpoint(const std::filesystem::path& path, CheckpointHeader* header) {
    try {
        return decode_checkpoint(io::read_bytes(path), header);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

int header_int(const CheckpointHeader& header, const std::string& key) {
    const auto it = header.find(key);
    if (it == header.end()) throw FormatError("checkpoint header lacks '" + key + "'");
    int v = 0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("checkpoint header: '" + key + "' is not an integer");
    }
    return v;
}

double header_double(const CheckpointHeader& header, const std::string& key) {
    const auto it = header.find(key);
    if (it == header.end()) throw FormatError("checkpoint header lacks '" + key + "'");
    double v = 0.0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("checkpoint header: '" + key + "' is not a number");
    }
    return v;
}

void round_to_f32(ParamSet& params) {
    for (auto& a : params.arrays()) {
        for (auto& v : a.values) v = static_cast<double>(static_cast<float>(v));
    }
}

} // namespace cessm::nn
