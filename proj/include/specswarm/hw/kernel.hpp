#pragma once

/**
 * @file kernel.hpp
 * @brief Renders an instruction sequence into a self-contained measurement
 *        kernel in GNU assembler Intel syntax: callee-saved prologue, scratch
 *        fill, denormal register grooming, fence-bracketed repeated body.
 */

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "specswarm/catalog.hpp"
#include "specswarm/fitness.hpp"

namespace specswarm {

struct kernel_artifact {
    std::string assembly;
    std::string entry_symbol = "specswarm_kernel";
    std::uint32_t reps = 0;
    std::uint32_t scratch_bytes = 0;
};

/// Emits the full kernel for one sequence. The entry point follows the SysV
/// ABI with the scratch-buffer base in rdi; the buffer must hold at least
/// scratch_bytes. The sequence body sits between the body_begin and body_end
/// labels, repeated reps times, bracketed by mfence/lfence so measured work
/// cannot leak past the counters. Vector registers named by the environment's
/// denormal set are seeded with the smallest positive denormal bit pattern.
inline kernel_artifact emit_kernel(const catalog& cat,
                                   const std::vector<instruction_instance>& seq,
                                   std::uint32_t reps, const data_environment& env) {
    kernel_artifact art;
    art.reps = reps;
    art.scratch_bytes = k_scratch_slot_count * k_scratch_slot_stride;

    bool any_vex = false;
    for (const auto& inst : seq) {
        if (cat.spec(inst.spec_id).attr.is_vex_or_evex) any_vex = true;
    }

    std::ostringstream os;
    os << "    .intel_syntax noprefix\n";
    os << "    .text\n";
    os << "    .globl " << art.entry_symbol << "\n";
    os << "    .type " << art.entry_symbol << ", @function\n";
    os << art.entry_symbol << ":\n";
    os << "    push rbx\n";
    os << "    push rbp\n";
    os << "    push r12\n";
    os << "    push r13\n";
    os << "    push r14\n";
    os << "    push r15\n";
    // Fill the scratch area with the configured byte; rep stosb consumes
    // rdi/rcx/al, so the base is parked in r11 and restored into rcx, the
    // base register every rendered memory operand uses.
    os << "    mov r11, rdi\n";
    os << "    mov al, " << static_cast<unsigned>(env.scratch_init) << "\n";
    os << "    mov rcx, " << art.scratch_bytes << "\n";
    os << "    rep stosb\n";
    os << "    mov rcx, r11\n";
    // Groom the requested vector registers with a 64-bit denormal pattern.
    bool any_groom = false;
    for (unsigned r = 0; r < 16; ++r) {
        if (!env.denormal(static_cast<std::uint8_t>(r))) continue;
        if (!any_groom) os << "    mov rax, 1\n";
        any_groom = true;
        os << "    movq xmm" << r << ", rax\n";
    }
    os << "    mfence\n";
    os << "    lfence\n";
    os << "body_begin:\n";
    for (std::uint32_t rep = 0; rep < reps; ++rep) {
        for (const auto& inst : seq) {
            os << "    " << render_instruction(cat, inst) << "\n";
        }
    }
    os << "body_end:\n";
    os << "    lfence\n";
    os << "    mfence\n";
    if (any_vex) os << "    vzeroupper\n";
    os << "    pop r15\n";
    os << "    pop r14\n";
    os << "    pop r13\n";
    os << "    pop r12\n";
    os << "    pop rbp\n";
    os << "    pop rbx\n";
    os << "    ret\n";
    os << "    .size " << art.entry_symbol << ", . - " << art.entry_symbol << "\n";
    os << "    .section .note.GNU-stack,\"\",@progbits\n";
    art.assembly = os.str();
    return art;
}

} // namespace specswarm
