#pragma once

/**
 * @file platform.hpp
 * @brief Host CPU identification: cpuid-based detection, /proc/cpuinfo
 *        parsing and the family/model table for supported parts.
 */

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "specswarm/oracle.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#endif

namespace specswarm {

struct platform_info {
    microarch arch = microarch::unsupported;
    std::string vendor;
    unsigned family = 0;
    unsigned model = 0;

    friend bool operator==(const platform_info&, const platform_info&) = default;
};

/// Maps an x86 vendor/family/model triple onto the supported
/// microarchitectures. Anything unrecognized is unsupported.
inline microarch classify_model(const std::string& vendor, unsigned family, unsigned model) {
    if (vendor != "GenuineIntel" || family != 6) return microarch::unsupported;
    switch (model) {
        case 0x97:
        case 0x9A: return microarch::alder_lake;
        case 0x8F: return microarch::sapphire_rapids;
        case 0xA5:
        case 0xA6: return microarch::comet_lake;
        case 0x6A:
        case 0x6C:
        case 0x7E: return microarch::ice_lake;
        default: return microarch::unsupported;
    }
}

/// Queries the running CPU through the cpuid instruction. On non-x86 builds
/// the result is an unsupported platform with an empty vendor.
inline platform_info detect_platform() {
    platform_info info;
#if defined(__x86_64__) || defined(__i386__)
    unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
    if (!__get_cpuid(0, &eax, &ebx, &ecx, &edx)) return info;
    char vendor[13] = {};
    std::memcpy(vendor + 0, &ebx, 4);
    std::memcpy(vendor + 4, &edx, 4);
    std::memcpy(vendor + 8, &ecx, 4);
    info.vendor = vendor;
    if (eax < 1 || !__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return info;
    unsigned family = (eax >> 8) & 0xF;
    unsigned model = (eax >> 4) & 0xF;
    if (family == 0xF) family += (eax >> 20) & 0xFF;
    if (family == 0x6 || family == 0xF) model |= ((eax >> 16) & 0xF) << 4;
    info.family = family;
    info.model = model;
    info.arch = classify_model(info.vendor, family, model);
#endif
    return info;
}

/// Parses the first processor block of a /proc/cpuinfo-style text file.
/// Returns nullopt when the vendor, family or model line is missing.
inline std::optional<platform_info> read_cpuinfo(const std::string& path = "/proc/cpuinfo") {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    platform_info info;
    bool have_vendor = false, have_family = false, have_model = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() && (have_vendor || have_family || have_model)) break;
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        if (key == "vendor_id" && !have_vendor) {
            info.vendor = value;
            have_vendor = true;
        } else if (key == "cpu family" && !have_family) {
            info.family = static_cast<unsigned>(std::stoul(value));
            have_family = true;
        } else if (key == "model" && !have_model) {
            info.model = static_cast<unsigned>(std::stoul(value));
            have_model = true;
        }
    }
    if (!have_vendor || !have_family || !have_model) return std::nullopt;
    info.arch = classify_model(info.vendor, info.family, info.model);
    return info;
}

} // namespace specswarm
