/**
 * physio.hpp: PPG beat detection, HRV metrics and GSR features
 *
 * Beats are local maxima of the PPG trace that rise above a rolling
 * threshold (window mean + k * window stddev over a centred window),
 * separated by a refractory period. Inside the refractory period the
 * higher peak wins. Peak times are refined by parabolic interpolation.
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/sensor_hub.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace xroom {

struct BeatConfig {
    std::int64_t window_ms = 2000;
    double threshold_k = 0.5;
    std::int64_t refractory_ms = 250;
    std::int64_t min_span_ms = 2000;

    friend bool operator==(const BeatConfig&, const BeatConfig&) = default;
};

struct GsrConfig {
    double rise_threshold = 0.05;  // units per sample
    std::int64_t refractory_ms = 1000;

    friend bool operator==(const GsrConfig&, const GsrConfig&) = default;
};

struct TimeWindow {
    std::int64_t start_ms = 0;
    std::int64_t len_ms = 0;

    bool contains(double t) const { return t >= static_cast<double>(start_ms) && t < static_cast<double>(start_ms + len_ms); }
};

struct HrvMetrics {
    std::int64_t window_start_ms = 0;
    std::int64_t window_len_ms = 0;
    double mean_hr_bpm = 0.0;
    double rmssd_ms = 0.0;
    double sdnn_ms = 0.0;
    int n_beats = 0;

    friend bool operator==(const HrvMetrics&, const HrvMetrics&) = default;
};

struct GsrFeatures {
    double tonic_mean = 0.0;
    int phasic_peak_count = 0;

    friend bool operator==(const GsrFeatures&, const GsrFeatures&) = default;
};

/// Beat times (ms, fractional after refinement) from a time-ordered trace.
inline std::vector<double> detect_beats(std::span<const std::int64_t> ts, std::span<const double> values,
                                        const BeatConfig& cfg = {}) {
    if (ts.size() != values.size()) fail(ErrorCode::InvalidArgument, "timestamp and value counts differ");
    if (ts.size() < 3 || ts.back() - ts.front() < cfg.min_span_ms) {
        fail(ErrorCode::InsufficientData, "beat detection needs at least 2 s of PPG");
    }
    const std::size_t n = ts.size();
    // Prefix sums of the offset-removed signal keep the variance well conditioned.
    const double base = values[0];
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values[i] - base;
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    const std::int64_t half = cfg.window_ms / 2;
    std::size_t lo = 0, hi = 0;

    std::vector<double> beats;
    double last_peak_value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        while (ts[lo] < ts[i] - half) ++lo;
        while (hi < n && ts[hi] <= ts[i] + half) ++hi;
        if (i == 0 || i + 1 == n) continue;
        if (!(values[i] > values[i - 1] && values[i] >= values[i + 1])) continue;
        const double count = static_cast<double>(hi - lo);
        const double mean = (s1[hi] - s1[lo]) / count;
        const double var = std::max(0.0, (s2[hi] - s2[lo]) / count - mean * mean);
        const double threshold = base + mean + cfg.threshold_k * std::sqrt(var);
        if (!(values[i] > threshold)) continue;

        double t = static_cast<double>(ts[i]);
        const double y0 = values[i - 1], y1 = values[i], y2 = values[i + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        if (denom < 0.0) {
            const double delta = 0.5 * (y0 - y2) / denom;
            const double spacing = static_cast<double>(ts[i + 1] - ts[i - 1]) / 2.0;
            t += std::clamp(delta, -0.5, 0.5) * spacing;
        }
        if (!beats.empty() && t - beats.back() < static_cast<double>(cfg.refractory_ms)) {
            if (values[i] > last_peak_value) {
                beats.back() = t;
                last_peak_value = values[i];
            }
            continue;
        }
        beats.push_back(t);
        last_peak_value = values[i];
    }
    return beats;
}

inline std::vector<double> detect_beats(std::span<const SyncedSample> series, std::size_t channel = 0,
                                        const BeatConfig& cfg = {}) {
    std::vector<const SyncedSample*> sorted;
    sorted.reserve(series.size());
    for (const auto& s : series) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const SyncedSample* a, const SyncedSample* b) { return a->session_ts_ms < b->session_ts_ms; });
    std::vector<std::int64_t> ts;
    std::vector<double> values;
    ts.reserve(sorted.size());
    values.reserve(sorted.size());
    for (const auto* s : sorted) {
        if (channel >= s->values.size()) fail(ErrorCode::InvalidArgument, "channel index out of range");
        ts.push_back(s->session_ts_ms);
        values.push_back(s->values[channel]);
    }
    return detect_beats(ts, values, cfg);
}

/// Time- and variability-domain HRV over the beats inside the window.
inline HrvMetrics hrv_metrics(std::span<const double> beats, TimeWindow window) {
    std::vector<double> inside;
    for (double b : beats) {
        if (window.contains(b)) inside.push_back(b);
    }
    if (inside.size() < 2) fail(ErrorCode::InsufficientBeats, "HRV needs at least two beats in the window");
    std::vector<double> ibi(inside.size() - 1);
    for (std::size_t i = 0; i + 1 < inside.size(); ++i) ibi[i] = inside[i + 1] - inside[i];

    double sum = 0.0;
    for (double x : ibi) sum += x;
    const double mean = sum / static_cast<double>(ibi.size());
    double ss = 0.0;
    for (double x : ibi) ss += (x - mean) * (x - mean);
    double sd = 0.0;
    for (std::size_t i = 1; i < ibi.size(); ++i) sd += (ibi[i] - ibi[i - 1]) * (ibi[i] - ibi[i - 1]);

    HrvMetrics m;
    m.window_start_ms = window.start_ms;
    m.window_len_ms = window.len_ms;
    m.n_beats = static_cast<int>(inside.size());
    m.mean_hr_bpm = 60000.0 / mean;
    m.sdnn_ms = std::sqrt(ss / static_cast<double>(ibi.size()));
    m.rmssd_ms = ibi.size() < 2 ? 0.0 : std::sqrt(sd / static_cast<double>(ibi.size() - 1));
    return m;
}

/// HRV over every supplied beat.
inline HrvMetrics hrv_metrics(std::span<const double> beats) {
    if (beats.size() < 2) fail(ErrorCode::InsufficientBeats, "HRV needs at least two beats");
    const auto lo = static_cast<std::int64_t>(std::floor(*std::min_element(beats.begin(), beats.end())));
    const auto hi = static_cast<std::int64_t>(std::floor(*std::max_element(beats.begin(), beats.end()))) + 1;
    return hrv_metrics(beats, TimeWindow{lo, hi - lo});
}

inline GsrFeatures gsr_features(std::span<const SyncedSample> series, TimeWindow window, std::size_t channel = 0,
                                const GsrConfig& cfg = {}) {
    std::vector<const SyncedSample*> inside;
    for (const auto& s : series) {
        if (window.contains(static_cast<double>(s.session_ts_ms))) inside.push_back(&s);
    }
    if (inside.empty()) fail(ErrorCode::EmptyWindow, "no GSR samples in the window");
    std::stable_sort(inside.begin(), inside.end(),
                     [](const SyncedSample* a, const SyncedSample* b) { return a->session_ts_ms < b->session_ts_ms; });
    GsrFeatures f;
    double sum = 0.0;
    for (const auto* s : inside) {
        if (channel >= s->values.size()) fail(ErrorCode::InvalidArgument, "channel index out of range");
        sum += s->values[channel];
    }
    f.tonic_mean = sum / static_cast<double>(inside.size());

    bool above = false;
    std::optional<std::int64_t> last_peak;
    for (std::size_t i = 1; i < inside.size(); ++i) {
        const double diff = inside[i]->values[channel] - inside[i - 1]->values[channel];
        const bool now_above = diff > cfg.rise_threshold;
        if (now_above && !above) {
            const auto t = inside[i]->session_ts_ms;
            if (!last_peak || t - *last_peak >= cfg.refractory_ms) {
                ++f.phasic_peak_count;
                last_peak = t;
            }
        }
        above = now_above;
    }
    return f;
}

} // namespace xroom
