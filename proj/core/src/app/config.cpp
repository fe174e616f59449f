// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/app/config.hpp"

#include <charconv>
#include <set>
#include <sstream>
#include <variant>

#include "cessm/errors.hpp"
#include "cessm/nn/checkpoint.hpp"

namespace cessm::app {

namespace {

using Member = std::variant<int RunConfig::*, double RunConfig::*, std::uint64_t RunConfig::*, bool RunConfig::*>;

struct Field {
    const char* key;
    Member member;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"grid", &RunConfig::grid},
        {"frames", &RunConfig::frames},
        {"native_count", &RunConfig::native_count},
        {"native_train", &RunConfig::native_train},
        {"intv_train", &RunConfig::intv_train},
        {"intv_val", &RunConfig::intv_val},
        {"intv_test", &RunConfig::intv_test},
        {"seed_native_data", &RunConfig::seed_native_data},
        {"seed_intv_data", &RunConfig::seed_intv_data},
        {"double_excitation_prob", &RunConfig::double_excitation_prob},
        {"foci_onset_min", &RunConfig::foci_onset_min},
        {"foci_onset_max", &RunConfig::foci_onset_max},
        {"electrode_rows", &RunConfig::electrode_rows},
        {"electrode_cols", &RunConfig::electrode_cols},
        {"electrode_height_mm", &RunConfig::electrode_height_mm},
        {"lambda", &RunConfig::lambda},
        {"lambda_min", &RunConfig::lambda_min},
        {"lambda_max", &RunConfig::lambda_max},
        {"lambda_steps", &RunConfig::lambda_steps},
        {"k", &RunConfig::k},
        {"d_z", &RunConfig::d_z},
        {"d_a", &RunConfig::d_a},
        {"beta", &RunConfig::beta},
        {"ode_hidden", &RunConfig::ode_hidden},
        {"steps_per_frame", &RunConfig::steps_per_frame},
        {"intv_window", &RunConfig::intv_window},
        {"gru_window", &RunConfig::gru_window},
        {"gru_warm_start", &RunConfig::gru_warm_start},
        {"seed_model", &RunConfig::seed_model},
        {"batch", &RunConfig::batch},
        {"micro_batch", &RunConfig::micro_batch},
        {"weight_decay", &RunConfig::weight_decay},
        {"epochs_native", &RunConfig::epochs_native},
        {"epochs_intv", &RunConfig::epochs_intv},
        {"epochs_gru", &RunConfig::epochs_gru},
        {"lr_native", &RunConfig::lr_native},
        {"lr_intv", &RunConfig::lr_intv},
        {"lr_gru", &RunConfig::lr_gru},
        {"lr_min", &RunConfig::lr_min},
        {"lr_max", &RunConfig::lr_max},
        {"lr_trials", &RunConfig::lr_trials},
        {"seed_train", &RunConfig::seed_train},
        {"render_stride", &RunConfig::render_stride},
        {"render_episodes", &RunConfig::render_episodes},
    };
    return table;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::string to_text(const RunConfig& c, const Member& m) {
    return std::visit(
        [&](auto ptr) -> std::string {
            using T = std::remove_cvref_t<decltype(c.*ptr)>;
            if constexpr (std::is_same_v<T, bool>) {
                return c.*ptr ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return nn::format_double(c.*ptr);
            } else {
                return std::to_string(c.*ptr);
            }
        },
        m);
}

bool assign(RunConfig& c, const Member& m, std::string_view value) {
    return std::visit(
        [&](auto ptr) -> bool {
            using T = std::remove_cvref_t<decltype(c.*ptr)>;
            if constexpr (std::is_same_v<T, bool>) {
                if (value == "true") c.*ptr = true;
                else if (value == "false") c.*ptr = false;
                else return false;
                return true;
            } else {
                T v{};
                if (!parse_number(value, v)) return false;
                c.*ptr = v;
                return true;
            }
        },
        m);
}

const Field* find_field(std::string_view key) {
    for (const auto& f : fields()) {
        if (key == f.key) return &f;
    }
    return nullptr;
}

} // namespace

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw PreconditionError("config: " + what);
    };
    require(grid >= 8 && grid % 8 == 0, "grid must be a positive multiple of 8");
    require(frames >= 2, "frames must be >= 2");
    require(native_count >= 1 && native_train >= 1 && native_train <= native_count,
            "need 1 <= native_train <= native_count");
    require(intv_train >= 1 && intv_val >= 1 && intv_test >= 1, "intervention splits must be non-empty");
    require(foci_onset_min >= 1 && foci_onset_min <= foci_onset_max && foci_onset_max < frames,
            "foci onset window must satisfy 1 <= min <= max < frames");
    require(double_excitation_prob >= 0.0 && double_excitation_prob <= 1.0, "double_excitation_prob must be in [0, 1]");
    require(electrode_rows * electrode_cols >= 4, "need at least 4 electrodes");
    require(electrode_height_mm > 0.0, "electrode_height_mm must be > 0");
    require(lambda_min > 0.0 && lambda_max >= lambda_min && lambda_steps >= 1, "bad lambda grid");
    require(k >= 1 && k <= frames, "k must be in [1, frames]");
    require(d_z >= 1 && d_a == d_z, "d_a must equal d_z");
    require(batch >= 1 && micro_batch >= 1, "batch sizes must be >= 1");
    require(weight_decay >= 0.0, "weight_decay must be >= 0");
    require(epochs_native >= 1 && epochs_intv >= 1 && epochs_gru >= 1, "epochs must be >= 1");
    require(lr_min > 0.0 && lr_max > lr_min && lr_trials >= 10, "bad learning-rate range");
    require(render_stride >= 1 && render_episodes >= 1, "render settings must be >= 1");
    native_model().validate();
}

fhn::GeneratorConfig RunConfig::generator() const {
    fhn::GeneratorConfig g;
    g.grid = grid;
    g.frames = frames;
    g.double_excitation_prob = double_excitation_prob;
    g.foci_onset_min = foci_onset_min;
    g.foci_onset_max = foci_onset_max;
    return g;
}

model::NativeConfig RunConfig::native_model() const {
    model::NativeConfig c;
    c.grid = grid;
    c.electrode_rows = electrode_rows;
    c.electrode_cols = electrode_cols;
    c.k = k;
    c.d_z = d_z;
    c.ode_hidden = ode_hidden;
    c.steps_per_frame = steps_per_frame;
    c.beta = beta;
    return c;
}

model::InterventionConfig RunConfig::intervention_model() const {
    model::InterventionConfig c;
    c.d_a = d_a;
    c.window = intv_window;
    c.ode_hidden = ode_hidden;
    return c;
}

model::GruAblationConfig RunConfig::gru_model() const {
    model::GruAblationConfig c;
    c.window = gru_window;
    return c;
}

model::TrainConfig RunConfig::training(int epochs, double lr) const {
    model::TrainConfig t;
    t.epochs = epochs;
    t.batch = batch;
    t.micro_batch = micro_batch;
    t.weight_decay = weight_decay;
    t.lr = lr;
    t.lr_range.lr_min = lr_min;
    t.lr_range.lr_max = lr_max;
    t.lr_range.n_trials = lr_trials;
    t.seed = seed_train;
    return t;
}

std::string serialize(const RunConfig& config) {
    std::ostringstream os;
    os << "# cessm run configuration\n";
    for (const auto& f : fields()) os << f.key << " = " << to_text(config, f.member) << '\n';
    return os.str();
}

RunConfig parse_config(std::string_view text) {
    RunConfig c;
    std::set<std::string, std::less<>> seen;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const Field* f = find_field(key);
        if (!f) throw FormatError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        if (!seen.insert(std::string(key)).second) {
            throw FormatError("config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        }
        if (!assign(c, f->member, value)) {
            throw FormatError("config line " + std::to_string(line_no) + ": bad value '" + std::string(value) +
                              "' for '" + std::string(key) + "'");
        }
    }
    return c;
}

void apply_override(RunConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw PreconditionError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    const auto key = trim(assignment.substr(0, eq));
    const auto value = trim(assignment.substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) throw PreconditionError("unknown config key '" + std::string(key) + "'");
    if (!assign(config, f->member, value)) {
        throw PreconditionError("bad value '" + std::string(value) + "' for '" + std::string(key) + "'");
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
}

} // namespace cessm::app
