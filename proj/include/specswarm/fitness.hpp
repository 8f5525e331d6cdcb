#pragma once

/**
 * @file fitness.hpp
 * @brief Equivalence classes for bad-speculation events, counter observations,
 *        baseline calibration and scalar fitness, over an abstract measurement
 *        backend.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specswarm/catalog.hpp"

namespace specswarm {

/// The nine tracked event classes, in canonical table order. The order is the
/// classification tie-break and the serialization order of per-class data.
enum class equivalence_class : std::uint8_t {
    fp_assist = 0,
    hw_assist,
    page_fault_assist,
    sse_avx_mix,
    mc_disambiguation,
    mc_memory_ordering,
    mc_smc,
    br_mispredict,
    topdown_br_mispredict,
};

inline constexpr std::size_t k_class_count = 9;

inline constexpr std::array<equivalence_class, k_class_count> all_classes() {
    return {equivalence_class::fp_assist,          equivalence_class::hw_assist,
            equivalence_class::page_fault_assist,  equivalence_class::sse_avx_mix,
            equivalence_class::mc_disambiguation,  equivalence_class::mc_memory_ordering,
            equivalence_class::mc_smc,             equivalence_class::br_mispredict,
            equivalence_class::topdown_br_mispredict};
}

enum class hazard_category : std::uint8_t {
    microcode_assist,
    machine_clear,
    branch_misprediction,
};

inline hazard_category category_of(equivalence_class c) {
    switch (c) {
        case equivalence_class::fp_assist:
        case equivalence_class::hw_assist:
        case equivalence_class::page_fault_assist:
        case equivalence_class::sse_avx_mix:
            return hazard_category::microcode_assist;
        case equivalence_class::mc_disambiguation:
        case equivalence_class::mc_memory_ordering:
        case equivalence_class::mc_smc:
            return hazard_category::machine_clear;
        case equivalence_class::br_mispredict:
        case equivalence_class::topdown_br_mispredict:
            return hazard_category::branch_misprediction;
    }
    throw std::logic_error("category_of: unknown class");
}

/// Performance-event name a class is measured by.
inline const char* label_of(equivalence_class c) {
    switch (c) {
        case equivalence_class::fp_assist: return "ASSISTS.FP";
        case equivalence_class::hw_assist: return "ASSISTS.HARDWARE";
        case equivalence_class::page_fault_assist: return "ASSISTS.PAGE_FAULT";
        case equivalence_class::sse_avx_mix: return "ASSISTS.SSE_AVX_MIX";
        case equivalence_class::mc_disambiguation: return "MACHINE_CLEARS.DISAMBIGUATION";
        case equivalence_class::mc_memory_ordering: return "MACHINE_CLEARS.MEMORY_ORDERING";
        case equivalence_class::mc_smc: return "MACHINE_CLEARS.SMC";
        case equivalence_class::br_mispredict: return "BR_MISP_RETIRED.ALL_BRANCHES";
        case equivalence_class::topdown_br_mispredict: return "TOPDOWN.BR_MISPREDICT_SLOTS";
    }
    throw std::logic_error("label_of: unknown class");
}

inline std::optional<equivalence_class> class_from_label(const std::string& label) {
    for (auto c : all_classes()) {
        if (label == label_of(c)) return c;
    }
    return std::nullopt;
}

template <typename T>
using class_array = std::array<T, k_class_count>;

inline std::size_t index_of(equivalence_class c) { return static_cast<std::size_t>(c); }

///// Data-grooming state a sequence executes under: which vector registers are
/// pre-seeded with denormal patterns, and the scratch-region fill byte.
struct data_environment {
    std::uint16_t denormal_mask = 0;  ///< bit i set: register index i is groomed
    std::uint8_t scratch_init = 0;

    bool denormal(std::uint8_t reg) const { return (denormal_mask >> (reg & 15)) & 1; }

    static data_environment groom_all() { return data_environment{0xffff, 0}; }
    static data_environment clean() { return data_environment{0, 0}; }

    friend bool operator==(const data_environment&, const data_environment&) = default;
};

/// Raw per-class counter readings from one measurement.
struct raw_observation {
    class_array<std::uint64_t> counts{};
    bool valid = true;
};

/// Counter readings normalized against a baseline.
struct fitness_observation {
    class_array<std::uint64_t> raw{};
    class_array<double> excess{};  ///< max(0, raw - baseline mean) / reps
    class_array<bool> fired{};     ///< excess beyond the per-class threshold
    bool valid = true;

    bool any_fired() const {
        return std::any_of(fired.begin(), fired.end(), [](bool b) { return b; });
    }
};

/// Neutral-kernel counter statistics and firing thresholds.
struct baseline_profile {
    class_array<double> mean{};
    class_array<double> stddev{};
    class_array<double> threshold{};  ///< mean + k_sigma * stddev
    double k_sigma = 3.0;
    std::uint32_t samples = 0;
};

struct backend_capabilities {
    bool simulated = true;
    bool reentrant = true;
    class_array<bool> supported{true, true, true, true, true, true, true, true, true};
};

/// Measurement backend: executes a sequence reps times under a data
/// environment and reports per-class counter totals. `stream` identifies the
/// evaluation for reproducible synthetic-noise draws and may be ignored.
class fitness_backend {
  public:
    virtual ~fitness_backend() = default;
    virtual backend_capabilities capabilities() const = 0;
    virtual raw_observation measure(const std::vector<instruction_instance>& seq,
                                    std::uint32_t reps, const data_environment& env,
                                    std::uint64_t stream) = 0;
};

/// Measures neutral (empty) kernels and derives per-class thresholds at
/// mean + k_sigma * stddev. Hardware-style backends require at least 30
/// samples; simulated backends accept any count, where zero samples yield the
/// all-zero profile of a noiseless oracle.
inline baseline_profile calibrate_baseline(fitness_backend& backend, std::uint32_t samples,
                                           std::uint32_t reps, const data_environment& env,
                                           double k_sigma = 3.0) {
    const auto caps = backend.capabilities();
    if (!caps.simulated && samples < 30) {
        throw std::invalid_argument(
            "calibrate: hardware baselines require at least 30 samples");
    }
    baseline_profile prof;
    prof.k_sigma = k_sigma;
    prof.samples = samples;
    if (samples == 0) return prof;

    class_array<double> sum{};
    class_array<double> sumsq{};
    const std::vector<instruction_instance> neutral;
    for (std::uint32_t s = 0; s < samples; ++s) {
        const std::uint64_t stream = (std::uint64_t{1} << 63) | s;
        const auto obs = backend.measure(neutral, reps, env, stream);
        for (std::size_t c = 0; c < k_class_count; ++c) {
            const auto v = static_cast<double>(obs.counts[c]);
            sum[c] += v;
            sumsq[c] += v * v;
        }
    }
    for (std::size_t c = 0; c < k_class_count; ++c) {
        prof.mean[c] = sum[c] / samples;
        const double var = std::max(0.0, sumsq[c] / samples - prof.mean[c] * prof.mean[c]);
        prof.stddev[c] = std::sqrt(var);
        prof.threshold[c] = prof.mean[c] + k_sigma * prof.stddev[c];
    }
    return prof;
}

/// One backend measurement of `seq`, normalized: excess is the baseline-mean
/// subtracted count floored at zero and divided by reps; a class fires when
/// its raw count exceeds the baseline threshold (both in raw counter units).
/// Backend faults yield a zero observation marked invalid.
inline fitness_observation evaluate(fitness_backend& backend, const baseline_profile& baseline,
                                    const std::vector<instruction_instance>& seq,
                                    std::uint32_t reps, const data_environment& env,
                                    std::uint64_t stream = 0) {
    if (reps == 0) throw std::invalid_argument("evaluate: reps must be positive");
    fitness_observation obs;
    raw_observation raw;
    try {
        raw = backend.measure(seq, reps, env, stream);
    } catch (const std::exception&) {
        raw.valid = false;
    }
    if (!raw.valid) {
        obs.valid = false;
        return obs;
    }
    obs.raw = raw.counts;
    for (std::size_t c = 0; c < k_class_count; ++c) {
        obs.excess[c] =
            std::max(0.0, static_cast<double>(obs.raw[c]) - baseline.mean[c]) / reps;
        obs.fired[c] = static_cast<double>(obs.raw[c]) > baseline.threshold[c];
    }
    return obs;
}

/// Classification outcome: the dominant fired class and the scalar fitness.
struct classification {
    std::optional<equivalence_class> cls;
    double fitness = 0.0;
};

/// Dominant class is the fired class of maximal excess, ties resolved toward
/// the lowest table row. Fitness is the summed excess over all fired classes.
inline classification classify(const fitness_observation& obs) {
    classification out;
    double best = -1.0;
    for (std::size_t c = 0; c < k_class_count; ++c) {
        if (!obs.fired[c]) continue;
        out.fitness += obs.excess[c];
        if (obs.excess[c] > best) {
            best = obs.excess[c];
            out.cls = static_cast<equivalence_class>(c);
        }
    }
    return out;
}

} // namespace specswarm
