// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cessm/errors.hpp"
#include "cessm/nn/checkpoint.hpp"

namespace cessm::eval {

LocalizationReport localization_metrics(std::span<const Detection> detections,
                                        std::span<const fhn::EpisodeMeta> metas, double dx_mm,
                                        const std::string& model) {
    if (detections.empty()) throw PreconditionError("localization_metrics: no episodes");
    if (detections.size() != metas.size()) throw PreconditionError("localization_metrics: length mismatch");
    LocalizationReport rep;
    rep.model = model;
    int found = 0;
    double t_sum = 0.0, d_sum = 0.0;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const auto& m = metas[i];
        if (!m.foci_stim) {
            throw PreconditionError("localization_metrics: episode " + std::to_string(m.index) + " has no focus");
        }
        const auto& d = detections[i];
        EpisodeScore s;
        s.episode = m.index;
        s.true_onset = m.foci_stim->onset_frame;
        s.found = d.found;
        if (d.found) {
            s.onset_frame = d.onset_frame;
            s.time_error = std::abs(d.onset_frame - s.true_onset);
            s.location_error_mm = std::hypot(d.row - m.foci_stim->row, d.col - m.foci_stim->col) * dx_mm;
            ++found;
            t_sum += s.time_error;
            d_sum += s.location_error_mm;
        }
        rep.rows.push_back(s);
    }
    rep.pct_identified = static_cast<double>(found) / static_cast<double>(detections.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.timestep_mae = found ? t_sum / found : nan;
    rep.location_error_mm = found ? d_sum / found : nan;
    return rep;
}

namespace {

std::string num(double v) { return std::isnan(v) ? std::string("nan") : nn::format_double(v); }

} // namespace

std::string format_report_table(std::span<const LocalizationReport> reports) {
    std::ostringstream os;
    os << "model\tpct_identified\ttimestep_mae\tlocation_error_mm\n";
    for (const auto& r : reports) {
        os << r.model << '\t' << num(r.pct_identified) << '\t' << num(r.timestep_mae) << '\t'
           << num(r.location_error_mm) << '\n';
    }
    return os.str();
}

std::string format_episode_rows(const LocalizationReport& report) {
    std::ostringstream os;
    os << "episode\tfound\tonset_frame\ttrue_onset\ttime_error\tlocation_error_mm\n";
    for (const auto& s : report.rows) {
        os << s.episode << '\t' << (s.found ? 1 : 0) << '\t' << s.onset_frame << '\t' << s.true_onset << '\t'
           << (s.found ? num(s.time_error) : "-") << '\t' << (s.found ? num(s.location_error_mm) : "-") << '\n';
    }
    return os.str();
}

std::vector<double> min_max_normalize(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double mn = *lo, range = *hi - *lo;
    for (auto& v : out) v = range > 0.0 ? (v - mn) / range : 0.0;
    return out;
}

namespace {

std::vector<double> norms(const std::vector<double>& flat, int frames, int dim) {
    std::vector<double> out(static_cast<std::size_t>(frames));
    for (int i = 0; i < frames; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double v = flat[static_cast<std::size_t>(i) * dim + j];
            s += v * v;
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(s);
    }
    return out;
}

} // namespace

std::pair<std::vector<double>, std::vector<double>> latent_norm_curves(const model::LatentTrajectory& t) {
    std::pair<std::vector<double>, std::vector<double>> out;
    out.first = min_max_normalize(norms(t.z, t.frames, t.d_z));
    if (t.has_a()) out.second = min_max_normalize(norms(t.a, t.frames, t.d_a));
    return out;
}

bool onset_signal_rises(std::span<const double> curve, int onset_frame) {
    const int T = static_cast<int>(curve.size());
    auto mean = [&](int lo, int hi) {
        lo = std::max(lo, 0);
        hi = std::min(hi, T - 1);
        if (hi < lo) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (int i = lo; i <= hi; ++i) s += curve[static_cast<std::size_t>(i)];
        return s / (hi - lo + 1);
    };
    const double during = mean(onset_frame, onset_frame + 5);
    const double before = mean(0, onset_frame - 5);
    if (std::isnan(during) || std::isnan(before)) return false;
    return during > before;
}

} // namespace cessm::eval
