// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cessm/fhn/simulator.hpp"

namespace cessm::fhn {

/// Randomisation ranges for episode generation. Pixel quantities are given for
/// a 32 x 32 grid and scaled linearly with the grid size.
struct GeneratorConfig {
    int grid = 32;
    int frames = 60;
    double stim_radius_px = 3.0;
    double stim_amplitude = 2.0;
    int stim_duration_frames = 1;
    double double_excitation_prob = 0.5;
    int double_excitation_window = 3;     // second onset drawn from [0, window)
    double min_second_distance_px = 10.0; // between the two initial sites
    int foci_onset_min = 10;
    int foci_onset_max = 30;
    double foci_clearance_px = 8.0; // from the active front at t_f - 1
    int max_attempts = 200;

    double scale() const { return grid / 32.0; }
};

struct Dataset {
    EpisodeKind kind = EpisodeKind::native;
    std::uint64_t seed = 0;
    int grid = 0;
    int frames = 0;
    std::vector<EpisodeMeta> metas;
    std::vector<VoltageSequence> episodes; // raw v, not binarised

    std::size_t size() const { return metas.size(); }
};

/// Per-episode seed derived from the dataset seed and the episode index.
std::uint64_t episode_seed(std::uint64_t dataset_seed, int index);

/// Draws the stimulus layout of one episode. Intervention episodes simulate the
/// native prefix to place the focus in tissue the front has not yet reached.
EpisodeMeta sample_episode(EpisodeKind kind, int index, std::uint64_t dataset_seed, const FhnParams& params,
                           const GeneratorConfig& config);

/// `count` episodes in index order; throws PreconditionError when count < 1.
Dataset generate_dataset(EpisodeKind kind, int count, const FhnParams& params, std::uint64_t seed,
                         const GeneratorConfig& config);

std::string to_string(EpisodeKind kind);
EpisodeKind episode_kind_from_string(const std::string& text);

/// Writes `<stem>.bin` (array container, frames as [episode][frame][row][col])
/// and `<stem>.meta.jsonl` (one EpisodeMeta record per line).
void save_dataset(const std::filesystem::path& stem, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& stem);

std::string meta_to_json_line(const EpisodeMeta& meta);
EpisodeMeta meta_from_json_line(const std::string& line);

} // namespace cessm::fhn
