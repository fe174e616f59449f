// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/fhn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "cessm/io/container.hpp"

namespace cessm::fhn {
namespace {

// Raw-voltage level treated as "reached by a front" when placing foci.
constexpr double kTouchedLevel = 0.2;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

StimulusEvent make_stim(int row, int col, int onset, const GeneratorConfig& cfg) {
    StimulusEvent s;
    s.row = row;
    s.col = col;
    s.radius = cfg.stim_radius_px * cfg.scale();
    s.amplitude = cfg.stim_amplitude;
    s.onset_frame = onset;
    s.duration_frames = cfg.stim_duration_frames;
    return s;
}

int margin_for(const GeneratorConfig& cfg) {
    return static_cast<int>(std::ceil(cfg.stim_radius_px * cfg.scale()));
}

std::pair<int, int> random_site(std::mt19937_64& rng, int grid, int margin) {
    std::uniform_int_distribution<int> pick(margin, grid - 1 - margin);
    const int r = pick(rng);
    const int c = pick(rng);
    return {r, c};
}

nlohmann::json stim_json(const StimulusEvent& s) {
    return {{"row", s.row},
            {"col", s.col},
            {"radius", s.radius},
            {"amplitude", s.amplitude},
            {"onset_frame", s.onset_frame},
            {"duration_frames", s.duration_frames}};
}

StimulusEvent stim_from_json(const nlohmann::json& j) {
    StimulusEvent s;
    s.row = j.at("row").get<int>();
    s.col = j.at("col").get<int>();
    s.radius = j.at("radius").get<double>();
    s.amplitude = j.at("amplitude").get<double>();
    s.onset_frame = j.at("onset_frame").get<int>();
    s.duration_frames = j.at("duration_frames").get<int>();
    return s;
}

} // namespace

std::uint64_t episode_seed(std::uint64_t dataset_seed, int index) {
    return splitmix64(dataset_seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

EpisodeMeta sample_episode(EpisodeKind kind, int index, std::uint64_t dataset_seed, const FhnParams& params,
                           const GeneratorConfig& cfg) {
    EpisodeMeta meta;
    meta.index = index;
    meta.seed = episode_seed(dataset_seed, index);
    meta.grid = cfg.grid;
    meta.frames = cfg.frames;
    std::mt19937_64 rng(meta.seed);
    const int margin = margin_for(cfg);
    const int n = cfg.grid;

    if (kind == EpisodeKind::native) {
        auto [r, c] = random_site(rng, n, margin);
        meta.initial_stim = make_stim(r, c, 0, cfg);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(rng) < cfg.double_excitation_prob) {
            std::uniform_int_distribution<int> onset(0, std::max(0, cfg.double_excitation_window - 1));
            const double min_d = cfg.min_second_distance_px * cfg.scale();
            for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
                auto [r2, c2] = random_site(rng, n, margin);
                if (std::hypot(r2 - r, c2 - c) >= min_d) {
                    meta.second_stim = make_stim(r2, c2, onset(rng), cfg);
                    break;
                }
            }
        }
        return meta;
    }

    if (cfg.foci_onset_min < 1 || cfg.foci_onset_max < cfg.foci_onset_min || cfg.foci_onset_max >= cfg.frames) {
        throw PreconditionError("generate_dataset: foci onset window must lie inside [1, frames)");
    }
    std::uniform_int_distribution<int> onset_pick(cfg.foci_onset_min, cfg.foci_onset_max);
    const double radius = cfg.stim_radius_px * cfg.scale();
    const int foci_margin = static_cast<int>(std::ceil(radius)) + 1;
    const double clearance = cfg.foci_clearance_px * cfg.scale();
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        auto [r, c] = random_site(rng, n, margin);
        const int t_f = onset_pick(rng);
        EpisodeMeta prefix = meta;
        prefix.initial_stim = make_stim(r, c, 0, cfg);
        prefix.frames = t_f;
        const VoltageSequence v = simulate_episode(prefix, params);

        // Nodes reached by the front before t_f, and the front at t_f - 1.
        std::vector<char> touched(static_cast<std::size_t>(n) * n, 0);
        for (int f = 0; f < t_f; ++f) {
            auto fr = v.frame(f);
            for (std::size_t i = 0; i < touched.size(); ++i) touched[i] |= fr[i] > kTouchedLevel;
        }
        std::vector<std::pair<int, int>> front;
        auto last = v.frame(t_f - 1);
        for (int i = 0; i < n * n; ++i) {
            if (last[i] > kTouchedLevel) front.emplace_back(i / n, i % n);
        }
        std::vector<std::pair<int, int>> candidates;
        for (int cr = foci_margin; cr < n - foci_margin; ++cr) {
            for (int cc = foci_margin; cc < n - foci_margin; ++cc) {
                bool ok = true;
                const int reach = foci_margin;
                for (int rr = cr - reach; ok && rr <= cr + reach; ++rr) {
                    for (int c2 = cc - reach; ok && c2 <= cc + reach; ++c2) {
                        if (std::hypot(rr - cr, c2 - cc) <= radius + 1.0 && touched[rr * n + c2]) ok = false;
                    }
                }
                for (const auto& [fr_r, fr_c] : front) {
                    if (!ok) break;
                    if (std::hypot(fr_r - cr, fr_c - cc) < clearance) ok = false;
                }
                if (ok) candidates.emplace_back(cr, cc);
            }
        }
        if (candidates.empty()) continue;
        std::uniform_int_distribution<std::size_t> which(0, candidates.size() - 1);
        const auto [fr, fc] = candidates[which(rng)];
        meta.initial_stim = prefix.initial_stim;
        meta.foci_stim = make_stim(fr, fc, t_f, cfg);
        return meta;
    }
    throw PreconditionError("generate_dataset: could not place a focus for episode " + std::to_string(index));
}

Dataset generate_dataset(EpisodeKind kind, int count, const FhnParams& params, std::uint64_t seed,
                         const GeneratorConfig& cfg) {
    if (count < 1) throw PreconditionError("generate_dataset: count must be >= 1");
    params.validate();
    Dataset data;
    data.kind = kind;
    data.seed = seed;
    data.grid = cfg.grid;
    data.frames = cfg.frames;
    data.metas.reserve(count);
    data.episodes.reserve(count);
    for (int i = 0; i < count; ++i) {
        data.metas.push_back(sample_episode(kind, i, seed, params, cfg));
        data.episodes.push_back(simulate_episode(data.metas.back(), params));
    }
    return data;
}

std::string to_string(EpisodeKind kind) { return kind == EpisodeKind::native ? "native" : "intervention"; }

EpisodeKind episode_kind_from_string(const std::string& text) {
    if (text == "native") return EpisodeKind::native;
    if (text == "intervention") return EpisodeKind::intervention;
    throw FormatError("unknown episode kind '" + text + "'");
}

std::string meta_to_json_line(const EpisodeMeta& m) {
    nlohmann::json j{{"index", m.index},
                     {"seed", m.seed},
                     {"grid", m.grid},
                     {"frames", m.frames},
                     {"initial_stim", stim_json(m.initial_stim)},
                     {"second_stim", m.second_stim ? stim_json(*m.second_stim) : nlohmann::json(nullptr)},
                     {"foci_stim", m.foci_stim ? stim_json(*m.foci_stim) : nlohmann::json(nullptr)}};
    return j.dump();
}

EpisodeMeta meta_from_json_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        EpisodeMeta m;
        m.index = j.at("index").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.grid = j.at("grid").get<int>();
        m.frames = j.at("frames").get<int>();
        m.initial_stim = stim_from_json(j.at("initial_stim"));
        if (!j.at("second_stim").is_null()) m.second_stim = stim_from_json(j.at("second_stim"));
        if (!j.at("foci_stim").is_null()) m.foci_stim = stim_from_json(j.at("foci_stim"));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("episode meta: ") + e.what());
    }
}

void save_dataset(const std::filesystem::path& stem, const Dataset& data) {
    io::ArrayFile file;
    file.attributes["kind"] = to_string(data.kind);
    file.attributes["seed"] = std::to_string(data.seed);
    file.attributes["version"] = "1";
    file.attributes["fields"] = "episode frame row col";
    file.attributes["quantity"] = "transmembrane_potential_raw";
    io::NamedArray frames;
    frames.name = "frames";
    frames.shape = {static_cast<std::int64_t>(data.size()), data.frames, data.grid, data.grid};
    frames.data.reserve(data.size() * static_cast<std::size_t>(data.frames) * data.grid * data.grid);
    for (const auto& ep : data.episodes) {
        for (double v : ep.values) frames.data.push_back(static_cast<float>(v));
    }
    file.arrays.push_back(std::move(frames));
    io::write_new(stem.string() + ".bin", file);

    std::string meta;
    for (const auto& m : data.metas) meta += meta_to_json_line(m) + '\n';
    io::write_bytes_new(stem.string() + ".meta.jsonl", meta);
}

Dataset load_dataset(const std::filesystem::path& stem) {
    const auto file = io::read(stem.string() + ".bin");
    const auto& frames = file.array("frames");
    if (frames.shape.size() != 4 || frames.shape[2] != frames.shape[3]) {
        throw FormatError("dataset: frames array must be [episode][frame][row][col] with a square grid");
    }
    Dataset data;
    data.kind = episode_kind_from_string(file.attribute("kind"));
    data.seed = std::stoull(file.attribute("seed"));
    data.frames = static_cast<int>(frames.shape[1]);
    data.grid = static_cast<int>(frames.shape[2]);
    const auto count = static_cast<std::size_t>(frames.shape[0]);
    const std::size_t per = static_cast<std::size_t>(data.frames) * data.grid * data.grid;
    data.episodes.reserve(count);
    for (std::size_t e = 0; e < count; ++e) {
        VoltageSequence seq(data.frames, data.grid);
        std::copy(frames.data.begin() + static_cast<std::ptrdiff_t>(e * per),
                  frames.data.begin() + static_cast<std::ptrdiff_t>((e + 1) * per), seq.values.begin());
        data.episodes.push_back(std::move(seq));
    }
    std::ifstream in(stem.string() + ".meta.jsonl");
    if (!in) throw FormatError("dataset: missing metadata sidecar for '" + stem.string() + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) data.metas.push_back(meta_from_json_line(line));
    }
    if (data.metas.size() != count) {
        throw FormatError("dataset: sidecar has " + std::to_string(data.metas.size()) + " records for " +
                          std::to_string(count) + " episodes");
    }
    return data;
}

} // namespace cessm::fhn
