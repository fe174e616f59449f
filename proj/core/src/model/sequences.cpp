// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/model/sequences.hpp"

#include "cessm/errors.hpp"

namespace cessm::model {

SequenceSet prepare_sequences(std::span<const VoltageSequence> binary, const obs::DenseMatrix& H) {
    if (binary.empty()) throw PreconditionError("prepare_sequences: no episodes");
    SequenceSet set;
    set.grid = binary.front().grid;
    set.frames = binary.front().frames;
    set.electrodes = H.rows;
    if (H.cols != set.pixels()) {
        throw ShapeError("prepare_sequences: H has " + std::to_string(H.cols) + " columns for a " +
                         std::to_string(set.grid) + "x" + std::to_string(set.grid) + " grid");
    }
    for (const auto& seq : binary) {
        if (seq.grid != set.grid || seq.frames != set.frames) throw ShapeError("prepare_sequences: ragged episodes");
        set.x.push_back(seq.values);
        set.y.push_back(obs::observe(H, seq).values);
    }
    return set;
}

SequenceSet prepare_sequences(const fhn::Dataset& data, const obs::DenseMatrix& H) {
    std::vector<VoltageSequence> binary;
    binary.reserve(data.episodes.size());
    for (const auto& ep : data.episodes) binary.push_back(fhn::binarize_sequence(ep));
    return prepare_sequences(binary, H);
}

VoltageSequence threshold(const VoltageSequence& probabilities) {
    VoltageSequence out = probabilities;
    for (auto& v : out.values) v = v >= 0.5 ? 1.0 : 0.0;
    return out;
}

double dice(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dice: frame sizes differ");
    double inter = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a[i] >= 0.5;
        const bool pb = b[i] >= 0.5;
        inter += (pa && pb) ? 1.0 : 0.0;
        total += (pa ? 1.0 : 0.0) + (pb ? 1.0 : 0.0);
    }
    return total == 0.0 ? 1.0 : 2.0 * inter / total;
}

double mean_frame_dice(const VoltageSequence& a, const VoltageSequence& b) {
    if (a.frames != b.frames || a.grid != b.grid) throw ShapeError("mean_frame_dice: sequence shapes differ");
    double s = 0.0;
    for (int f = 0; f < a.frames; ++f) s += dice(a.frame(f), b.frame(f));
    return s / a.frames;
}

VoltageSequence binary_sequence(const SequenceSet& set, int episode) {
    VoltageSequence seq(set.frames, set.grid);
    seq.values = set.x.at(static_cast<std::size_t>(episode));
    return seq;
}

VoltageSequence dihedral(const VoltageSequence& x, int t) {
    if (t < 0 || t >= 8) throw PreconditionError("dihedral: symmetry index must be in [0, 8)");
    const int N = x.grid;
    VoltageSequence out(x.frames, N);
    for (int f = 0; f < x.frames; ++f) {
        for (int r = 0; r < N; ++r) {
            for (int c = 0; c < N; ++c) {
                int rr = (t & 4) ? c : r;
                int cc = (t & 4) ? r : c;
                if (t & 1) rr = N - 1 - rr;
                if (t & 2) cc = N - 1 - cc;
                out.at(f, rr, cc) = x.at(f, r, c);
            }
        }
    }
    return out;
}

SequenceSet select_episodes(const SequenceSet& set, std::span<const int> ids, const obs::DenseMatrix& H,
                            bool dihedral_ids) {
    std::vector<VoltageSequence> picked;
    picked.reserve(ids.size());
    for (int id : ids) {
        const int e = dihedral_ids ? id / 8 : id;
        auto seq = binary_sequence(set, e);
        picked.push_back(dihedral_ids ? dihedral(seq, id % 8) : std::move(seq));
    }
    return prepare_sequences(picked, H);
}

} // namespace cessm::model
