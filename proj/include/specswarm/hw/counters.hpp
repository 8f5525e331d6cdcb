#pragma once

/**
 * @file counters.hpp
 * @brief Raw performance-counter event descriptors per equivalence class:
 *        built-in tables for the supported microarchitectures and a JSON
 *        loader for user-supplied maps.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "specswarm/fitness.hpp"
#include "specswarm/oracle.hpp"

namespace specswarm {

struct counter_spec {
    std::uint16_t event = 0;
    std::uint8_t umask = 0;
    bool supported = false;

    /// perf_event_open raw config encoding.
    std::uint64_t raw_config() const {
        return static_cast<std::uint64_t>(event) | (static_cast<std::uint64_t>(umask) << 8);
    }

    friend bool operator==(const counter_spec&, const counter_spec&) = default;
};

struct counter_map {
    class_array<counter_spec> entries{};

    const counter_spec& for_class(equivalence_class c) const { return entries[index_of(c)]; }
    counter_spec& for_class(equivalence_class c) { return entries[index_of(c)]; }

    friend bool operator==(const counter_map&, const counter_map&) = default;
};

/// Built-in event tables. Alder Lake and Sapphire Rapids expose the full
/// assist breakdown plus the mispredict topdown slot event; the older parts
/// cover machine clears and retired branch mispredicts only.
inline counter_map default_counter_map(microarch m) {
    counter_map map;
    auto set = [&](equivalence_class c, std::uint16_t event, std::uint8_t umask) {
        map.for_class(c) = counter_spec{event, umask, true};
    };
    switch (m) {
        case microarch::alder_lake:
        case microarch::sapphire_rapids:
            set(equivalence_class::fp_assist, 0xC1, 0x02);
            set(equivalence_class::hw_assist, 0xC1, 0x04);
            set(equivalence_class::page_fault_assist, 0xC1, 0x08);
            set(equivalence_class::sse_avx_mix, 0xC1, 0x10);
            set(equivalence_class::mc_disambiguation, 0xC3, 0x08);
            set(equivalence_class::mc_memory_ordering, 0xC3, 0x02);
            set(equivalence_class::mc_smc, 0xC3, 0x04);
            set(equivalence_class::br_mispredict, 0xC5, 0x00);
            set(equivalence_class::topdown_br_mispredict, 0xA4, 0x08);
            break;
        case microarch::comet_lake:
        case microarch::ice_lake:
            set(equivalence_class::mc_disambiguation, 0xC3, 0x08);
            set(equivalence_class::mc_memory_ordering, 0xC3, 0x02);
            set(equivalence_class::mc_smc, 0xC3, 0x04);
            set(equivalence_class::br_mispredict, 0xC5, 0x00);
            break;
        case microarch::unsupported: break;
    }
    return map;
}

namespace detail {

inline std::uint64_t counter_number(const nlohmann::json& v, const std::string& label,
                                    const char* field) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        try {
            return std::stoull(s, nullptr, 0);
        } catch (const std::exception&) {
        }
    }
    throw std::runtime_error("counters: class \"" + label + "\" field \"" + field +
                             "\" must be a number or a numeric string");
}

} // namespace detail

/// Parses a flat JSON object mapping event labels to either
/// {"event": N, "umask": N} (numbers or "0x.." strings) or the string
/// "unsupported". Labels absent from the file are unsupported; unknown
/// labels are an error.
inline counter_map parse_counter_map(const nlohmann::json& j) {
    if (!j.is_object()) throw std::runtime_error("counters: top level must be a JSON object");
    counter_map map;
    for (const auto& [label, v] : j.items()) {
        const auto cls = class_from_label(label);
        if (!cls) throw std::runtime_error("counters: unknown event label \"" + label + "\"");
        const equivalence_class c = *cls;
        if (v.is_string() && v.get<std::string>() == "unsupported") continue;
        if (!v.is_object()) {
            throw std::runtime_error("counters: class \"" + label +
                                     "\" must map to an object or \"unsupported\"");
        }
        counter_spec spec;
        spec.event = static_cast<std::uint16_t>(detail::counter_number(v.at("event"), label,
                                                                       "event"));
        spec.umask = static_cast<std::uint8_t>(
            v.contains("umask") ? detail::counter_number(v.at("umask"), label, "umask") : 0);
        spec.supported = true;
        map.for_class(c) = spec;
    }
    return map;
}

inline counter_map load_counter_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("counters: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("counters: " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_counter_map(j);
}

} // namespace specswarm
