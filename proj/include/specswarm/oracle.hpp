#pragma once

/**
 * @file oracle.hpp
 * @brief Deterministic simulated microarchitectural oracle.
 *
 * The oracle scans an instruction sequence once and fires four event rules:
 *
 *   1. SIMD flavor intermix: each flavor transition in the subsequence of
 *      legacy-SSE and VEX/EVEX instances counts MACHINE_CLEARS.SMC and
 *      ASSISTS.SSE_AVX_MIX.
 *   2. Precision intermix: a single-precision instance reading a vector
 *      register last written by a double-precision instance (or vice versa),
 *      with no precision-converting instance between writer and reader,
 *      counts ASSISTS.HARDWARE, MACHINE_CLEARS.SMC and
 *      MACHINE_CLEARS.MEMORY_ORDERING. Read-after-write only.
 *   3. FMA on groomed data: an FMA-family instance with a denormal-groomed
 *      source register counts ASSISTS.FP.
 *   4. AES output into SSE float math: an AES-family instance fed from a
 *      groomed register whose written register is then read by a legacy-SSE
 *      floating-point instance counts ASSISTS.FP and MACHINE_CLEARS.SMC.
 *
 * Rules 1 and 2 are enabled on alder_lake and sapphire_rapids only; rules 3
 * and 4 everywhere. Register dataflow is last-writer-wins with xmm/ymm/zmm
 * of equal index aliased. Counts scale linearly with reps. Optional synthetic
 * Poisson noise is derived from the per-evaluation stream id, so results are
 * independent of scheduling.
 */

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "specswarm/catalog.hpp"
#include "specswarm/fitness.hpp"
#include "specswarm/rng.hpp"

namespace specswarm {

enum class microarch : std::uint8_t {
    alder_lake,
    comet_lake,
    sapphire_rapids,
    ice_lake,
    unsupported,
};

inline const char* microarch_name(microarch m) {
    switch (m) {
        case microarch::alder_lake: return "alder_lake";
        case microarch::comet_lake: return "comet_lake";
        case microarch::sapphire_rapids: return "sapphire_rapids";
        case microarch::ice_lake: return "ice_lake";
        case microarch::unsupported: return "unsupported";
    }
    return "unsupported";
}

inline microarch microarch_from_name(const std::string& name) {
    if (name == "alder_lake") return microarch::alder_lake;
    if (name == "comet_lake") return microarch::comet_lake;
    if (name == "sapphire_rapids") return microarch::sapphire_rapids;
    if (name == "ice_lake") return microarch::ice_lake;
    throw std::invalid_argument("oracle: unknown microarchitecture \"" + name + "\"");
}

inline constexpr std::size_t k_rule_count = 4;

/// Per-microarchitecture rule enablement.
struct microarch_profile {
    microarch id = microarch::alder_lake;
    std::array<bool, k_rule_count> rule_enabled{true, true, true, true};
};

inline microarch_profile default_profile(microarch m) {
    microarch_profile p;
    p.id = m;
    const bool intermix = m == microarch::alder_lake || m == microarch::sapphire_rapids;
    p.rule_enabled = {intermix, intermix, true, true};
    return p;
}

/// Reported observation-window and repetition metadata per rule. These are
/// descriptive constants recorded alongside discoveries; they do not gate the
/// simulation.
struct rule_metadata {
    unsigned window;
    unsigned min_reps;
};

inline rule_metadata metadata_of_rule(unsigned rule) {
    static constexpr std::array<rule_metadata, k_rule_count> meta{
        rule_metadata{17, 1},
        rule_metadata{20, 100},
        rule_metadata{12, 32},
        rule_metadata{12, 32},
    };
    if (rule < 1 || rule > k_rule_count) {
        throw std::invalid_argument("oracle: rule id out of range");
    }
    return meta[rule - 1];
}

/// One rule firing: the rule id (1-based), the contributing sequence indices
/// and the per-class counter contribution of a single repetition.
struct rule_firing {
    unsigned rule = 0;
    std::vector<std::uint32_t> indices;
    class_array<std::uint64_t> contribution{};

    friend bool operator==(const rule_firing&, const rule_firing&) = default;
};

struct rule_trace {
    std::vector<rule_firing> firings;
    class_array<std::uint64_t> totals{};  ///< summed contributions, one repetition

    friend bool operator==(const rule_trace&, const rule_trace&) = default;
};

class sim_oracle final : public fitness_backend {
  public:
    sim_oracle(const catalog& cat, microarch_profile profile, double noise_lambda = 0.0,
               std::uint64_t noise_seed = 0)
        : cat_{&cat},
          profile_{profile},
          noise_lambda_{noise_lambda},
          noise_seed_{noise_seed} {
        if (noise_lambda_ < 0.0) {
            throw std::invalid_argument("oracle: noise lambda must be nonnegative");
        }
    }

    backend_capabilities capabilities() const override {
        backend_capabilities caps;
        caps.simulated = true;
        caps.reentrant = true;
        return caps;
    }

    const microarch_profile& profile() const { return profile_; }
    double noise_lambda() const { return noise_lambda_; }

    raw_observation measure(const std::vector<instruction_instance>& seq, std::uint32_t reps,
                            const data_environment& env, std::uint64_t stream) override {
        raw_observation obs;
        const auto trace = scan(seq, env);
        for (std::size_t c = 0; c < k_class_count; ++c) {
            obs.counts[c] = trace.totals[c] * reps;
        }
        if (noise_lambda_ > 0.0) {
            auto rng = make_engine(splitmix64(noise_seed_ ^ splitmix64(stream)));
            std::poisson_distribution<std::uint64_t> noise{noise_lambda_};
            for (std::size_t c = 0; c < k_class_count; ++c) {
                obs.counts[c] += noise(rng);
            }
        }
        return obs;
    }

    /// Noise-free single-repetition firing detail for a sequence.
    rule_trace trace(const std::vector<instruction_instance>& seq,
                     const data_environment& env) const {
        return scan(seq, env);
    }

  private:
    struct writer_state {
        int index = -1;
        bool single = false;
        bool dual = false;      // double precision
        bool aes = false;
        bool aes_groomed = false;
    };

    static void add(rule_trace& tr, unsigned rule, std::vector<std::uint32_t> indices,
                    std::initializer_list<equivalence_class> classes) {
        rule_firing f;
        f.rule = rule;
        f.indices = std::move(indices);
        for (auto c : classes) f.contribution[index_of(c)] += 1;
        for (std::size_t c = 0; c < k_class_count; ++c) tr.totals[c] += f.contribution[c];
        tr.firings.push_back(std::move(f));
    }

    rule_trace scan(const std::vector<instruction_instance>& seq,
                    const data_environment& env) const {
        rule_trace tr;
        const auto& rules = profile_.rule_enabled;

        if (rules[0]) {
            int prev_idx = -1;
            bool prev_vex = false;
            for (std::uint32_t i = 0; i < seq.size(); ++i) {
                const auto& attr = cat_->spec(seq[i].spec_id).attr;
                if (!attr.is_legacy_sse && !attr.is_vex_or_evex) continue;
                const bool vex = attr.is_vex_or_evex;
                if (prev_idx >= 0 && vex != prev_vex) {
                    add(tr, 1, {static_cast<std::uint32_t>(prev_idx), i},
                        {equivalence_class::mc_smc, equivalence_class::sse_avx_mix});
                }
                prev_idx = static_cast<int>(i);
                prev_vex = vex;
            }
        }

        std::array<writer_state, 16> writers{};
        int last_convert = -1;
        for (std::uint32_t i = 0; i < seq.size(); ++i) {
            const auto& spec = cat_->spec(seq[i].spec_id);
            const auto& attr = spec.attr;

            std::array<bool, 16> reads{};
            std::array<bool, 16> writes{};
            bool groomed_source = false;
            for (std::size_t s = 0; s < spec.slots.size(); ++s) {
                const auto& slot = spec.slots[s];
                if (!is_vector_kind(slot.kind)) continue;
                const std::uint8_t reg = seq[i].operands[s] & 15;
                if (slot.reads()) {
                    reads[reg] = true;
                    if (env.denormal(reg)) groomed_source = true;
                }
                if (slot.writes()) writes[reg] = true;
            }

            const bool sp = attr.is_single_precision_fp;
            const bool dp = attr.is_double_precision_fp;

            if (rules[1] && (sp || dp) && !attr.is_precision_convert) {
                for (std::uint8_t r = 0; r < 16; ++r) {
                    if (!reads[r]) continue;
                    const auto& w = writers[r];
                    if (w.index < 0) continue;
                    const bool opposite = (sp && w.dual) || (dp && w.single);
                    if (opposite && last_convert < w.index) {
                        add(tr, 2, {static_cast<std::uint32_t>(w.index), i},
                            {equivalence_class::hw_assist, equivalence_class::mc_smc,
                             equivalence_class::mc_memory_ordering});
                    }
                }
            }

            if (rules[3] && attr.is_legacy_sse && (sp || dp)) {
                for (std::uint8_t r = 0; r < 16; ++r) {
                    if (!reads[r]) continue;
                    const auto& w = writers[r];
                    if (w.index >= 0 && w.aes && w.aes_groomed) {
                        add(tr, 4, {static_cast<std::uint32_t>(w.index), i},
                            {equivalence_class::fp_assist, equivalence_class::mc_smc});
                    }
                }
            }

            if (rules[2] && attr.is_fma_family && groomed_source) {
                add(tr, 3, {i}, {equivalence_class::fp_assist});
            }

            for (std::uint8_t r = 0; r < 16; ++r) {
                if (!writes[r]) continue;
                writers[r].index = static_cast<int>(i);
                writers[r].single = sp;
                writers[r].dual = dp;
                writers[r].aes = attr.is_aes_family;
                writers[r].aes_groomed = attr.is_aes_family && groomed_source;
            }
            if (attr.is_precision_convert) last_convert = static_cast<int>(i);
        }
        return tr;
    }

    const catalog* cat_;
    microarch_profile profile_;
    double noise_lambda_;
    std::uint64_t noise_seed_;
};

} // namespace specswarm
