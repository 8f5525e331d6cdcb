#pragma once

// Shared catalog fixtures for the test suite: a small rule-coverage catalog,
// a wide multi-extension catalog for codec stress, neutral filler
// instructions, and XML/JSON fixture writers that serialize the same raw
// entries the library parses.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "specswarm/catalog.hpp"

namespace testcat {

using specswarm::detail::raw_entry;
using specswarm::detail::raw_operand;

inline raw_operand reg128(bool r, bool w) { return raw_operand{"reg", 128, r, w, "XMM"}; }
inline raw_operand reg256(bool r, bool w) { return raw_operand{"reg", 256, r, w, "YMM"}; }
inline raw_operand reg512(bool r, bool w) { return raw_operand{"reg", 512, r, w, "ZMM"}; }
inline raw_operand gpr(bool r, bool w) { return raw_operand{"reg", 64, r, w, "GPR64"}; }
inline raw_operand mask(bool r, bool w) { return raw_operand{"reg", 64, r, w, "K0..7"}; }
inline raw_operand mem(unsigned width, bool r, bool w) {
    return raw_operand{"mem", width, r, w, ""};
}
inline raw_operand imm8() { return raw_operand{"imm", 8, true, false, ""}; }

/// Eight instructions covering every scan rule interaction: scalar and packed
/// legacy SSE of both precisions, VEX of both precisions, a precision
/// convert, an FMA, an AES round and a flavorless integer op.
inline std::vector<raw_entry> mini_entries() {
    return {
        {"MULSS", "SSE", "3", {reg128(true, true), reg128(true, false)}},
        {"MULSD", "SSE2", "3", {reg128(true, true), reg128(true, false)}},
        {"VMULPS", "AVX", "3", {reg128(false, true), reg128(true, false), reg128(true, false)}},
        {"VADDPD", "AVX", "3", {reg128(false, true), reg128(true, false), reg128(true, false)}},
        {"CVTPD2PS", "SSE2", "3", {reg128(false, true), reg128(true, false)}},
        {"VFMADD213PD", "FMA", "3",
         {reg128(true, true), reg128(true, false), reg128(true, false)}},
        {"AESDECLAST", "AES", "3", {reg128(true, true), reg128(true, false)}},
        {"VPADDD", "AVX2", "3", {reg128(false, true), reg128(true, false), reg128(true, false)}},
    };
}

/// Flavorless scalar-integer filler: never legacy SSE, never VEX, no vector
/// slots, so sequences built from it alone trip no rule.
inline std::vector<raw_entry> neutral_entries() {
    return {
        {"ADD", "BASE", "3", {gpr(true, true), gpr(true, false)}},
        {"XOR", "BASE", "3", {gpr(true, true), gpr(true, false)}},
        {"MOV", "BASE", "3", {gpr(false, true), gpr(true, false)}},
        {"INC", "BASE", "3", {gpr(true, true)}},
    };
}

/// Twelve extensions with varied operand layouts (0 to 20 operand bits):
/// no-operand fences, scalar GPR forms, immediates, memory slots of several
/// widths, mask registers, and 128/256/512-bit vectors.
inline std::vector<raw_entry> wide_entries() {
    std::vector<raw_entry> e;
    // SSE / SSE2: packed and scalar FP plus a fence with no operands.
    e.push_back({"MULPS", "SSE", "3", {reg128(true, true), reg128(true, false)}});
    e.push_back({"MOVAPS", "SSE", "3", {reg128(false, true), mem(128, true, false)}});
    e.push_back({"MULSD", "SSE2", "3", {reg128(true, true), reg128(true, false)}});
    e.push_back({"LFENCE", "SSE2", "3", {}});
    e.push_back({"MOVQ", "SSE2", "3", {reg128(false, true), gpr(true, false)}});
    // SSE3 / SSSE3 / SSE41 / SSE42
    e.push_back({"HADDPD", "SSE3", "3", {reg128(true, true), reg128(true, false)}});
    e.push_back({"PSHUFB", "SSSE3", "3", {reg128(true, true), reg128(true, false)}});
    e.push_back({"BLENDPS", "SSE41", "3",
                 {reg128(true, true), reg128(true, false), imm8()}});
    e.push_back({"PCMPGTQ", "SSE42", "3", {reg128(true, true), reg128(true, false)}});
    // AVX / AVX2
    e.push_back({"VMULPS", "AVX", "3",
                 {reg256(false, true), reg256(true, false), reg256(true, false)}});
    e.push_back({"VADDSD", "AVX", "3",
                 {reg128(false, true), reg128(true, false), reg128(true, false)}});
    e.push_back({"VPERM2F128", "AVX", "3",
                 {reg256(false, true), reg256(true, false), reg256(true, false), imm8()}});
    e.push_back({"VPADDB", "AVX2", "3",
                 {reg256(false, true), reg256(true, false), mem(256, true, false)}});
    // AVX512F: zmm and mask operands.
    e.push_back({"VADDPD", "AVX512F", "3",
                 {reg512(false, true), mask(true, false), reg512(true, false),
                  reg512(true, false)}});
    e.push_back({"VPCMPEQD", "AVX512F", "3",
                 {mask(false, true), reg512(true, false), reg512(true, false)}});
    // FMA / AES / F16C
    e.push_back({"VFMADD231PS", "FMA", "3",
                 {reg128(true, true), reg128(true, false), reg128(true, false)}});
    e.push_back({"AESENC", "AES", "3", {reg128(true, true), reg128(true, false)}});
    e.push_back({"VCVTPH2PS", "F16C", "3", {reg256(false, true), reg128(true, false)}});
    // BMI1 / BMI2: three-operand GPR forms.
    e.push_back({"ANDN", "BMI1", "3", {gpr(false, true), gpr(true, false), gpr(true, false)}});
    e.push_back({"PDEP", "BMI2", "3", {gpr(false, true), gpr(true, false), gpr(true, false)}});
    e.push_back({"RORX", "BMI2", "3", {gpr(false, true), gpr(true, false), imm8()}});
    // Memory of other widths.
    e.push_back({"VMOVDQU64", "AVX512F", "3", {mem(512, false, true), reg512(true, false)}});
    e.push_back({"PREFETCHT0", "SSE", "3", {mem(8, true, false)}});
    return e;
}

/// Entries exercising the loader's skip accounting: a privileged form and
/// two with unusable encodings.
inline std::vector<raw_entry> rejected_entries() {
    return {
        {"INVD", "BASE", "0", {}},
        {"PINSRW", "SSE2", "3",
         {reg128(true, true), raw_operand{"reg", 32, true, false, "GPR32"}, imm8()}},
        {"CALLFAR", "BASE", "3", {raw_operand{"imm", 32, true, false, ""}}},
    };
}

inline specswarm::catalog make_catalog(const std::vector<raw_entry>& entries) {
    return specswarm::catalog::from_entries(entries);
}

inline void append(std::vector<raw_entry>& dst, const std::vector<raw_entry>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

/// Serializes entries in the XML dialect the loader parses. Adjacent entries
/// of one extension share an <extension> element, so document order always
/// matches entry order (the flat JSON dialect preserves it trivially).
inline void write_catalog_xml(const std::filesystem::path& path,
                              const std::vector<raw_entry>& entries) {
    std::ofstream out(path);
    out << "<?xml version=\"1.0\"?>\n<root>\n";
    std::string open;
    bool block = false;
    for (const auto& e : entries) {
        if (!block || e.extension != open) {
            if (block) out << "  </extension>\n";
            out << "  <extension name=\"" << e.extension << "\">\n";
            open = e.extension;
            block = true;
        }
        out << "    <instruction asm=\"" << e.mnemonic << "\" extension=\"" << e.extension
            << "\"";
        if (!e.cpl.empty()) out << " cpl=\"" << e.cpl << "\"";
        out << ">\n";
        for (const auto& op : e.operands) {
            out << "      <operand type=\"" << op.type << "\" width=\"" << op.width << "\"";
            if (op.r) out << " r=\"1\"";
            if (op.w) out << " w=\"1\"";
            out << ">" << op.set_name << "</operand>\n";
        }
        out << "    </instruction>\n";
    }
    if (block) out << "  </extension>\n";
    out << "</root>\n";
}

/// Serializes entries in the JSON mirror dialect.
inline void write_catalog_json(const std::filesystem::path& path,
                               const std::vector<raw_entry>& entries) {
    std::ofstream out(path);
    out << "{\n  \"instructions\": [\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        out << "    {\"asm\": \"" << e.mnemonic << "\", \"extension\": \"" << e.extension
            << "\"";
        if (!e.cpl.empty()) out << ", \"cpl\": \"" << e.cpl << "\"";
        out << ", \"operands\": [";
        for (std::size_t k = 0; k < e.operands.size(); ++k) {
            const auto& op = e.operands[k];
            out << (k ? ", " : "") << "{\"type\": \"" << op.type << "\", \"width\": " << op.width
                << ", \"r\": " << (op.r ? 1 : 0) << ", \"w\": " << (op.w ? 1 : 0);
            if (!op.set_name.empty()) out << ", \"set\": \"" << op.set_name << "\"";
            out << "}";
        }
        out << "]}" << (i + 1 < entries.size() ? "," : "") << "\n";
    }
    out << "  ]\n}\n";
}

/// Temp-directory helper rooted under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("specswarm-tests-" + name);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testcat
