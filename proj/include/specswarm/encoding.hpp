#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "specswarm/catalog.hpp"

namespace specswarm {

/// Exact integer code for one instruction instance:
/// value = (opcode_index << i) | packed operand bits, where i is the spec's
/// operand-field width and slots pack in order, first slot highest.
struct position_code {
    std::uint64_t value = 0;

    friend bool operator==(const position_code&, const position_code&) = default;
    friend auto operator<=>(const position_code&, const position_code&) = default;
};

using position_vector = std::vector<position_code>;

/// Packs an instance into its code. The instance must be valid for the catalog.
inline position_code encode_instance(const catalog& cat, const instruction_instance& inst) {
    if (!valid_instance(cat, inst)) {
        throw std::invalid_argument("encode: instance is not valid for this catalog");
    }
    const auto& spec = cat.spec(inst.spec_id);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < spec.slots.size(); ++i) {
        bits = (bits << spec.slots[i].code_bits()) | inst.operands[i];
    }
    return position_code{(spec.opcode_index << spec.operand_bits()) | bits};
}

/// Inverse of encode_instance. Throws on codes whose opcode field matches no
/// catalog spec and on operand fields outside a slot's legal value set.
inline instruction_instance decode_instance(const catalog& cat, position_code code) {
    for (unsigned i : cat.layout_widths()) {
        if (i >= 64) continue;
        const std::uint64_t opcode = code.value >> i;
        const auto id = cat.by_opcode(opcode);
        if (!id) continue;
        const auto& spec = cat.spec(*id);
        if (spec.operand_bits() != i) continue;

        // Opcode intervals are disjoint, so this is the only possible parse.
        instruction_instance inst;
        inst.spec_id = *id;
        inst.operands.resize(spec.slots.size());
        std::uint64_t bits = code.value & ((i == 0) ? 0 : ((~std::uint64_t{0}) >> (64 - i)));
        for (std::size_t s = spec.slots.size(); s-- > 0;) {
            const unsigned w = spec.slots[s].code_bits();
            const auto v = static_cast<std::uint8_t>(bits & ((std::uint64_t{1} << w) - 1));
            if (!legal_operand_value(spec.slots[s], v)) {
                std::ostringstream msg;
                msg << "decode: operand field " << s << " of " << spec.mnemonic
                    << " holds illegal value " << static_cast<unsigned>(v);
                throw std::invalid_argument(msg.str());
            }
            inst.operands[s] = v;
            bits >>= w;
        }
        return inst;
    }
    std::ostringstream msg;
    msg << "decode: no catalog spec matches opcode field of code " << code.value;
    throw std::invalid_argument(msg.str());
}

inline position_vector encode_sequence(const catalog& cat,
                                       const std::vector<instruction_instance>& seq) {
    position_vector out;
    out.reserve(seq.size());
    for (const auto& inst : seq) out.push_back(encode_instance(cat, inst));
    return out;
}

inline std::vector<instruction_instance> decode_sequence(const catalog& cat,
                                                         const position_vector& codes) {
    std::vector<instruction_instance> out;
    out.reserve(codes.size());
    for (const auto& c : codes) out.push_back(decode_instance(cat, c));
    return out;
}

} // namespace specswarm
