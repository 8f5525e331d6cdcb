#pragma once

// Independent reference implementation of the hazard rules, used to check
// the production scan. Deliberately structured differently: instead of one
// forward pass with incremental writer state, every rule is computed from
// scratch with quadratic pairwise queries over the sequence.

#include <cstdint>
#include <set>
#include <vector>

#include "specswarm/catalog.hpp"
#include "specswarm/fitness.hpp"
#include "specswarm/oracle.hpp"

namespace testref {

using specswarm::catalog;
using specswarm::class_array;
using specswarm::data_environment;
using specswarm::equivalence_class;
using specswarm::index_of;
using specswarm::instruction_instance;
using specswarm::microarch_profile;

inline const specswarm::instruction_spec& spec_of(const catalog& cat,
                                                  const instruction_instance& inst) {
    return cat.spec(inst.spec_id);
}

/// Vector-register indices read (or read-written) by an instance.
inline std::set<unsigned> vector_reads(const catalog& cat, const instruction_instance& inst) {
    std::set<unsigned> out;
    const auto& spec = spec_of(cat, inst);
    for (std::size_t s = 0; s < spec.slots.size(); ++s) {
        if (!specswarm::is_vector_kind(spec.slots[s].kind)) continue;
        if (!spec.slots[s].reads()) continue;
        out.insert(inst.operands[s] & 15u);
    }
    return out;
}

/// Vector-register indices written (or read-written) by an instance.
inline std::set<unsigned> vector_writes(const catalog& cat, const instruction_instance& inst) {
    std::set<unsigned> out;
    const auto& spec = spec_of(cat, inst);
    for (std::size_t s = 0; s < spec.slots.size(); ++s) {
        if (!specswarm::is_vector_kind(spec.slots[s].kind)) continue;
        if (!spec.slots[s].writes()) continue;
        out.insert(inst.operands[s] & 15u);
    }
    return out;
}

/// True when i is the live writer of register r for a read at j: i writes r,
/// i < j, and no instruction strictly between them writes r.
inline bool is_live_writer(const catalog& cat, const std::vector<instruction_instance>& seq,
                           std::size_t i, std::size_t j, unsigned r) {
    if (i >= j) return false;
    if (vector_writes(cat, seq[i]).count(r) == 0) return false;
    for (std::size_t k = i + 1; k < j; ++k) {
        if (vector_writes(cat, seq[k]).count(r) > 0) return false;
    }
    return true;
}

inline bool any_groomed_read(const catalog& cat, const instruction_instance& inst,
                             const data_environment& env) {
    for (auto r : vector_reads(cat, inst)) {
        if (env.denormal(static_cast<std::uint8_t>(r))) return true;
    }
    return false;
}

/// Expected one-repetition per-class counts for a sequence under a profile
/// and environment, computed rule by rule.
inline class_array<std::uint64_t> expected_counts(const catalog& cat,
                                                  const std::vector<instruction_instance>& seq,
                                                  const data_environment& env,
                                                  const microarch_profile& profile) {
    class_array<std::uint64_t> counts{};
    auto bump = [&](equivalence_class c, std::uint64_t n) { counts[index_of(c)] += n; };

    // Rule 1: adjacent flavor changes within the subsequence of flavored
    // instructions.
    if (profile.rule_enabled[0]) {
        std::vector<bool> flavors;  // true = legacy SSE, false = VEX/EVEX
        for (const auto& inst : seq) {
            const auto& a = spec_of(cat, inst).attr;
            if (a.is_legacy_sse) {
                flavors.push_back(true);
            } else if (a.is_vex_or_evex) {
                flavors.push_back(false);
            }
        }
        std::uint64_t transitions = 0;
        for (std::size_t k = 1; k < flavors.size(); ++k) {
            if (flavors[k] != flavors[k - 1]) ++transitions;
        }
        bump(equivalence_class::mc_smc, transitions);
        bump(equivalence_class::sse_avx_mix, transitions);
    }

    // Rule 2: an FP instruction reading a register whose live writer has the
    // opposite precision, with no precision convert anywhere in [writer,
    // reader). Converts never fire as readers. One firing per distinct
    // register per reader.
    if (profile.rule_enabled[1]) {
        for (std::size_t j = 0; j < seq.size(); ++j) {
            const auto& ja = spec_of(cat, seq[j]).attr;
            const bool j_sp = ja.is_single_precision_fp;
            const bool j_dp = ja.is_double_precision_fp;
            if ((!j_sp && !j_dp) || ja.is_precision_convert) continue;
            for (auto r : vector_reads(cat, seq[j])) {
                for (std::size_t i = 0; i < j; ++i) {
                    if (!is_live_writer(cat, seq, i, j, r)) continue;
                    const auto& ia = spec_of(cat, seq[i]).attr;
                    const bool opposite = (j_sp && ia.is_double_precision_fp) ||
                                          (j_dp && ia.is_single_precision_fp);
                    if (!opposite) break;
                    bool barrier = false;
                    for (std::size_t t = i; t < j; ++t) {
                        if (spec_of(cat, seq[t]).attr.is_precision_convert) barrier = true;
                    }
                    if (!barrier) {
                        bump(equivalence_class::hw_assist, 1);
                        bump(equivalence_class::mc_smc, 1);
                        bump(equivalence_class::mc_memory_ordering, 1);
                    }
                    break;  // only the live writer matters for this register
                }
            }
        }
    }

    // Rule 3: every FMA-family instance with at least one groomed source.
    if (profile.rule_enabled[2]) {
        for (const auto& inst : seq) {
            if (!spec_of(cat, inst).attr.is_fma_family) continue;
            if (any_groomed_read(cat, inst, env)) bump(equivalence_class::fp_assist, 1);
        }
    }

    // Rule 4: a legacy-SSE FP instruction reading a register whose live
    // writer is an AES instance that itself read groomed data. One firing
    // per distinct register per reader; no convert barrier.
    if (profile.rule_enabled[3]) {
        for (std::size_t j = 0; j < seq.size(); ++j) {
            const auto& ja = spec_of(cat, seq[j]).attr;
            if (!ja.is_legacy_sse) continue;
            if (!ja.is_single_precision_fp && !ja.is_double_precision_fp) continue;
            for (auto r : vector_reads(cat, seq[j])) {
                for (std::size_t i = 0; i < j; ++i) {
                    if (!is_live_writer(cat, seq, i, j, r)) continue;
                    const auto& ia = spec_of(cat, seq[i]).attr;
                    if (ia.is_aes_family && any_groomed_read(cat, seq[i], env)) {
                        bump(equivalence_class::fp_assist, 1);
                        bump(equivalence_class::mc_smc, 1);
                    }
                    break;
                }
            }
        }
    }

    return counts;
}

} // namespace testref
