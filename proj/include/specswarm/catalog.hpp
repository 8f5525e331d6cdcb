#pragma once

/**
 * @file catalog.hpp
 * @brief Instruction-set-extension catalog: typed instruction specifications,
 *        extension pools, and concrete operand-assigned instances.
 *
 * A catalog is built from an instruction description file (an XML subset of
 * the public uops.info schema, or an equivalent JSON mirror for `.json`
 * paths). Each accepted entry becomes an immutable instruction_spec carrying
 * its operand slot layout and a set of derived semantic attributes. Entries
 * that are not ring-3 executable or not representable in the slot model are
 * skipped and counted in the load summary.
 *
 * @code
 *   auto cat  = specswarm::load_catalog("instructions.xml");
 *   auto pool = specswarm::build_pool(cat, {"SSE2", "AVX"});
 *   auto inst = specswarm::sample_instance(pool, rng);
 * @endcode
 */

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <expat.h>
#include <json.hpp>

#include "specswarm/rng.hpp"

namespace specswarm {

enum class slot_kind : std::uint8_t {
    xmm,
    ymm,
    zmm,
    gpr64,
    mask,
    immediate8,
    memory,
};

enum class access_mode : std::uint8_t { read, write, read_write };

inline bool is_register_kind(slot_kind k) {
    return k == slot_kind::xmm || k == slot_kind::ymm || k == slot_kind::zmm ||
           k == slot_kind::gpr64 || k == slot_kind::mask;
}

inline bool is_vector_kind(slot_kind k) {
    return k == slot_kind::xmm || k == slot_kind::ymm || k == slot_kind::zmm;
}

/// One operand position of an instruction specification.
struct operand_slot {
    slot_kind kind{};
    std::uint16_t width{};  ///< operand width in bits: 8, 64, 128, 256 or 512
    access_mode access{};

    /// Bits this slot occupies in a position code.
    unsigned code_bits() const { return kind == slot_kind::immediate8 ? 8u : 4u; }

    bool reads() const { return access != access_mode::write; }
    bool writes() const { return access != access_mode::read; }

    friend bool operator==(const operand_slot&, const operand_slot&) = default;
};

/// Semantic attribute flags derived from mnemonic, extension tag and slots.
struct spec_attributes {
    bool is_legacy_sse = false;
    bool is_vex_or_evex = false;
    bool is_single_precision_fp = false;
    bool is_double_precision_fp = false;
    bool is_precision_convert = false;
    bool is_fma_family = false;
    bool is_aes_family = false;
    bool ring3_executable = true;

    friend bool operator==(const spec_attributes&, const spec_attributes&) = default;
};

struct instruction_spec {
    std::string mnemonic;
    std::string extension;
    std::vector<operand_slot> slots;  ///< at most 5
    std::uint64_t opcode_index = 0;   ///< unique, strictly increasing in document order
    spec_attributes attr;

    /// Total operand-field width of a position code for this spec.
    unsigned operand_bits() const {
        unsigned n = 0;
        for (const auto& s : slots) n += s.code_bits();
        return n;
    }

    bool has_vector_slot() const {
        return std::any_of(slots.begin(), slots.end(),
                           [](const operand_slot& s) { return is_vector_kind(s.kind); });
    }

    friend bool operator==(const instruction_spec&, const instruction_spec&) = default;
};

/// Counts of entries seen while loading a description file.
struct load_summary {
    std::size_t accepted = 0;
    std::size_t skipped_non_ring3 = 0;
    std::size_t skipped_unparseable = 0;

    std::size_t total_seen() const {
        return accepted + skipped_non_ring3 + skipped_unparseable;
    }
};

namespace detail {

/// Raw entry as read from a description file, before validation.
struct raw_operand {
    std::string type;       // "reg", "mem" or "imm"
    unsigned width = 0;
    bool r = false;
    bool w = false;
    std::string set_name;   // optional register-set text, e.g. "XMM0..15" or "K0..7"
};

struct raw_entry {
    std::string mnemonic;
    std::string extension;
    std::string cpl;        // empty means ring 3
    std::vector<raw_operand> operands;
};

inline bool starts_with(const std::string& s, const char* p) {
    return s.rfind(p, 0) == 0;
}

inline bool ends_with(const std::string& s, const char* suffix) {
    const std::string suf{suffix};
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline bool contains(const std::string& s, const char* needle) {
    return s.find(needle) != std::string::npos;
}

inline const std::set<std::string>& legacy_sse_extensions() {
    static const std::set<std::string> exts{
        "SSE", "SSE2", "SSE3", "SSSE3", "SSE4", "SSE41", "SSE42", "SSE4a",
    };
    return exts;
}

inline spec_attributes derive_attributes(const std::string& mnemonic,
                                         const std::string& extension,
                                         const std::vector<operand_slot>& slots,
                                         bool ring3) {
    spec_attributes a;
    a.ring3_executable = ring3;

    const bool v_prefixed = !mnemonic.empty() && mnemonic.front() == 'V';
    const bool legacy_ext = legacy_sse_extensions().count(extension) > 0;

    a.is_legacy_sse = legacy_ext && !v_prefixed;
    a.is_vex_or_evex = starts_with(extension, "AVX") || extension == "FMA" ||
                       extension == "F16C" || extension == "VAES" ||
                       (v_prefixed && !legacy_ext && extension != "X87" && extension != "MMX");

    const bool has_vec = std::any_of(slots.begin(), slots.end(), [](const operand_slot& s) {
        return is_vector_kind(s.kind);
    });
    if (has_vec) {
        if (ends_with(mnemonic, "PS") || ends_with(mnemonic, "SS")) {
            a.is_single_precision_fp = true;
        } else if (ends_with(mnemonic, "PD") || ends_with(mnemonic, "SD")) {
            a.is_double_precision_fp = true;
        }
    }

    a.is_precision_convert = contains(mnemonic, "CVTPD2PS") || contains(mnemonic, "CVTPS2PD") ||
                             contains(mnemonic, "CVTSD2SS") || contains(mnemonic, "CVTSS2SD");

    a.is_fma_family = extension == "FMA" || contains(extension, "IFMA") ||
                      starts_with(mnemonic, "VFMADD") || starts_with(mnemonic, "VFMSUB") ||
                      starts_with(mnemonic, "VFNMADD") || starts_with(mnemonic, "VFNMSUB") ||
                      starts_with(mnemonic, "VPMADD52");

    a.is_aes_family = extension == "AES" || extension == "AESNI" || extension == "AVXAES" ||
                      extension == "VAES" || starts_with(mnemonic, "AES") ||
                      starts_with(mnemonic, "VAES");
    return a;
}

/// Maps a raw operand onto a slot, or nullopt when not representable.
inline std::optional<operand_slot> map_operand(const raw_operand& op) {
    operand_slot s;
    if (op.r && op.w) {
        s.access = access_mode::read_write;
    } else if (op.w) {
        s.access = access_mode::write;
    } else {
        s.access = access_mode::read;
    }
    if (op.type == "reg") {
        if (!op.set_name.empty() && (op.set_name.front() == 'K' || op.set_name.front() == 'k')) {
            s.kind = slot_kind::mask;
            s.width = 64;
            return s;
        }
        switch (op.width) {
            case 64: s.kind = slot_kind::gpr64; break;
            case 128: s.kind = slot_kind::xmm; break;
            case 256: s.kind = slot_kind::ymm; break;
            case 512: s.kind = slot_kind::zmm; break;
            default: return std::nullopt;
        }
        s.width = static_cast<std::uint16_t>(op.width);
        return s;
    }
    if (op.type == "mem") {
        switch (op.width) {
            case 8:
            case 64:
            case 128:
            case 256:
            case 512:
                s.kind = slot_kind::memory;
                s.width = static_cast<std::uint16_t>(op.width);
                return s;
            default:
                return std::nullopt;
        }
    }
    if (op.type == "imm") {
        if (op.width != 8) return std::nullopt;
        s.kind = slot_kind::immediate8;
        s.width = 8;
        s.access = access_mode::read;
        return s;
    }
    return std::nullopt;
}

} // namespace detail

/// Immutable, indexed collection of instruction specifications.
class catalog {
  public:
    const std::vector<instruction_spec>& specs() const { return specs_; }
    std::size_t size() const { return specs_.size(); }
    const instruction_spec& spec(std::size_t id) const { return specs_.at(id); }

    /// Spec id for an opcode index, or nullopt when absent.
    std::optional<std::uint32_t> by_opcode(std::uint64_t opcode) const {
        auto it = by_opcode_.find(opcode);
        if (it == by_opcode_.end()) return std::nullopt;
        return it->second;
    }

    /// Spec ids of one extension, in document order. Unknown tag yields nullptr.
    const std::vector<std::uint32_t>* specs_for(const std::string& extension) const {
        auto it = by_extension_.find(extension);
        if (it == by_extension_.end()) return nullptr;
        return &it->second;
    }

    std::vector<std::string> extensions() const {
        std::vector<std::string> out;
        out.reserve(by_extension_.size());
        for (const auto& [ext, ids] : by_extension_) out.push_back(ext);
        return out;
    }

    /// Distinct operand-field widths present, ascending. Drives decode.
    const std::vector<unsigned>& layout_widths() const { return layout_widths_; }

    const load_summary& summary() const { return summary_; }

    /// Validates entries, derives attributes, assigns opcode indices and
    /// builds the lookup maps. Entry order is preserved.
    static catalog from_entries(const std::vector<detail::raw_entry>& entries) {
        catalog cat;
        std::uint64_t next_value = 0;
        for (const auto& e : entries) {
            if (!e.cpl.empty() && e.cpl != "3") {
                cat.summary_.skipped_non_ring3++;
                continue;
            }
            if (e.mnemonic.empty() || e.extension.empty() || e.operands.size() > 5) {
                cat.summary_.skipped_unparseable++;
                continue;
            }
            std::vector<operand_slot> slots;
            bool ok = true;
            for (const auto& op : e.operands) {
                auto slot = detail::map_operand(op);
                if (!slot) {
                    ok = false;
                    break;
                }
                slots.push_back(*slot);
            }
            if (!ok) {
                cat.summary_.skipped_unparseable++;
                continue;
            }

            instruction_spec spec;
            spec.mnemonic = e.mnemonic;
            spec.extension = e.extension;
            spec.slots = std::move(slots);
            spec.attr = detail::derive_attributes(spec.mnemonic, spec.extension, spec.slots, true);

            // Code intervals [opcode << i, (opcode + 1) << i) are carved out
            // of one ascending value cursor, so they never overlap across
            // specs and any code value has at most one valid decode. Opcode
            // indices are globally unique (collisions between different
            // widths push the interval upward, which keeps it above every
            // earlier one) and ascend in document order within each width.
            const unsigned i = spec.operand_bits();
            std::uint64_t k = (next_value + (std::uint64_t{1} << i) - 1) >> i;
            while (cat.by_opcode_.count(k)) ++k;
            if (64 - i <= std::bit_width(k)) {
                throw std::runtime_error("catalog: position-code space exhausted at entry " +
                                         spec.mnemonic);
            }
            spec.opcode_index = k;
            next_value = (k + 1) << i;

            cat.by_opcode_.emplace(spec.opcode_index, static_cast<std::uint32_t>(cat.specs_.size()));
            cat.by_extension_[spec.extension].push_back(static_cast<std::uint32_t>(cat.specs_.size()));
            cat.specs_.push_back(std::move(spec));
            cat.summary_.accepted++;
        }
        if (cat.specs_.empty()) {
            throw std::runtime_error("catalog: empty catalog after filtering");
        }
        std::set<unsigned> widths;
        for (const auto& s : cat.specs_) widths.insert(s.operand_bits());
        cat.layout_widths_.assign(widths.begin(), widths.end());
        return cat;
    }

  private:
    std::vector<instruction_spec> specs_;
    std::map<std::string, std::vector<std::uint32_t>> by_extension_;
    std::map<std::uint64_t, std::uint32_t> by_opcode_;
    std::vector<unsigned> layout_widths_;
    load_summary summary_;
};

namespace detail {

struct xml_parse_state {
    std::vector<raw_entry> entries;
    raw_entry current;
    bool in_instruction = false;
    bool in_operand = false;
    std::string enclosing_extension;
    std::string text;
    std::string error;
};

inline const char* attr_value(const char** atts, const char* name) {
    for (int i = 0; atts[i]; i += 2) {
        if (std::string_view{atts[i]} == name) return atts[i + 1];
    }
    return nullptr;
}

inline void XMLCALL xml_start(void* user, const char* name, const char** atts) {
    auto* st = static_cast<xml_parse_state*>(user);
    const std::string_view el{name};
    if (el == "extension") {
        if (const char* n = attr_value(atts, "name")) st->enclosing_extension = n;
    } else if (el == "instruction") {
        st->current = raw_entry{};
        st->in_instruction = true;
        if (const char* v = attr_value(atts, "asm")) st->current.mnemonic = v;
        if (const char* v = attr_value(atts, "extension")) {
            st->current.extension = v;
        } else {
            st->current.extension = st->enclosing_extension;
        }
        if (const char* v = attr_value(atts, "cpl")) st->current.cpl = v;
    } else if (el == "operand" && st->in_instruction) {
        raw_operand op;
        if (const char* v = attr_value(atts, "type")) op.type = v;
        if (const char* v = attr_value(atts, "width")) op.width = static_cast<unsigned>(std::strtoul(v, nullptr, 10));
        if (const char* v = attr_value(atts, "r")) op.r = std::string_view{v} == "1";
        if (const char* v = attr_value(atts, "w")) op.w = std::string_view{v} == "1";
        st->current.operands.push_back(op);
        st->in_operand = true;
        st->text.clear();
    }
}

inline void XMLCALL xml_end(void* user, const char* name) {
    auto* st = static_cast<xml_parse_state*>(user);
    const std::string_view el{name};
    if (el == "operand" && st->in_operand) {
        if (!st->current.operands.empty()) st->current.operands.back().set_name = st->text;
        st->in_operand = false;
    } else if (el == "instruction" && st->in_instruction) {
        st->entries.push_back(st->current);
        st->in_instruction = false;
    } else if (el == "extension") {
        st->enclosing_extension.clear();
    }
}

inline void XMLCALL xml_chars(void* user, const XML_Char* s, int len) {
    auto* st = static_cast<xml_parse_state*>(user);
    if (st->in_operand) st->text.append(s, static_cast<std::size_t>(len));
}

inline std::vector<raw_entry> parse_xml_entries(const std::string& content,
                                                const std::string& path) {
    XML_Parser parser = XML_ParserCreate(nullptr);
    if (!parser) throw std::runtime_error("catalog: cannot create XML parser");
    xml_parse_state st;
    XML_SetUserData(parser, &st);
    XML_SetElementHandler(parser, xml_start, xml_end);
    XML_SetCharacterDataHandler(parser, xml_chars);
    const auto status = XML_Parse(parser, content.data(), static_cast<int>(content.size()), 1);
    if (status == XML_STATUS_ERROR) {
        std::ostringstream msg;
        msg << "catalog: malformed XML in " << path << " at line "
            << XML_GetCurrentLineNumber(parser) << ": "
            << XML_ErrorString(XML_GetErrorCode(parser));
        XML_ParserFree(parser);
        throw std::runtime_error(msg.str());
    }
    XML_ParserFree(parser);
    return std::move(st.entries);
}

inline std::vector<raw_entry> parse_json_entries(const std::string& content,
                                                 const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("catalog: malformed JSON in " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("instructions") || !doc["instructions"].is_array()) {
        throw std::runtime_error("catalog: JSON mirror in " + path +
                                 " lacks an \"instructions\" array");
    }
    std::vector<raw_entry> entries;
    for (const auto& j : doc["instructions"]) {
        raw_entry e;
        e.mnemonic = j.value("asm", std::string{});
        e.extension = j.value("extension", std::string{});
        if (j.contains("cpl")) {
            if (j["cpl"].is_number_integer()) {
                e.cpl = std::to_string(j["cpl"].get<int>());
            } else {
                e.cpl = j["cpl"].get<std::string>();
            }
        }
        if (j.contains("operands") && j["operands"].is_array()) {
            for (const auto& jo : j["operands"]) {
                raw_operand op;
                op.type = jo.value("type", std::string{});
                op.width = jo.value("width", 0u);
                op.r = jo.value("r", 0) == 1;
                op.w = jo.value("w", 0) == 1;
                op.set_name = jo.value("set", std::string{});
                e.operands.push_back(op);
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace detail

/// Loads a catalog from an XML description file, or from the JSON mirror
/// format when the path ends in ".json". Throws on missing files, malformed
/// documents and on catalogs that are empty after filtering.
inline catalog load_catalog(const std::string& path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) throw std::runtime_error("catalog: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();
    const bool json = detail::ends_with(path, ".json");
    auto entries = json ? detail::parse_json_entries(content, path)
                        : detail::parse_xml_entries(content, path);
    return catalog::from_entries(entries);
}

/// FNV-1a digest of a file's bytes, as fixed-width hex.
inline std::string digest_file(const std::string& path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) throw std::runtime_error("catalog: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

/// A concrete instruction: a spec id plus one value per operand slot.
/// Register and memory slots hold indices 0..15; immediate slots hold one of
/// the representative immediate values.
struct instruction_instance {
    std::uint32_t spec_id = 0;
    std::vector<std::uint8_t> operands;

    friend bool operator==(const instruction_instance&, const instruction_instance&) = default;
};

inline const std::array<std::uint8_t, 4>& immediate_values() {
    static const std::array<std::uint8_t, 4> vals{0x00, 0x01, 0x7f, 0xff};
    return vals;
}

inline bool legal_operand_value(const operand_slot& slot, std::uint8_t value) {
    if (slot.kind == slot_kind::immediate8) {
        const auto& vals = immediate_values();
        return std::find(vals.begin(), vals.end(), value) != vals.end();
    }
    return value <= 15;
}

inline bool valid_instance(const catalog& cat, const instruction_instance& inst) {
    if (inst.spec_id >= cat.size()) return false;
    const auto& spec = cat.spec(inst.spec_id);
    if (inst.operands.size() != spec.slots.size()) return false;
    for (std::size_t i = 0; i < spec.slots.size(); ++i) {
        if (!legal_operand_value(spec.slots[i], inst.operands[i])) return false;
    }
    return true;
}

/// Ordered selection of catalog specs to sample from.
struct instruction_pool {
    const catalog* source = nullptr;
    std::vector<std::uint32_t> spec_ids;

    std::size_t size() const { return spec_ids.size(); }
};

/// Builds the ordered union of the selected extensions' spec lists.
/// Throws when a tag is unknown (naming it) or when the selection is empty.
inline instruction_pool build_pool(const catalog& cat,
                                   const std::vector<std::string>& extensions) {
    if (extensions.empty()) {
        throw std::runtime_error("pool: empty extension selection");
    }
    instruction_pool pool;
    pool.source = &cat;
    std::set<std::uint32_t> seen;
    for (const auto& ext : extensions) {
        const auto* ids = cat.specs_for(ext);
        if (!ids) {
            throw std::runtime_error("pool: unknown extension tag \"" + ext + "\"");
        }
        for (auto id : *ids) {
            if (seen.insert(id).second) pool.spec_ids.push_back(id);
        }
    }
    return pool;
}

/// Fresh uniform legal operand assignment for one spec.
inline std::vector<std::uint8_t> sample_operands(const instruction_spec& spec,
                                                 std::mt19937_64& rng) {
    std::vector<std::uint8_t> out;
    out.reserve(spec.slots.size());
    for (const auto& slot : spec.slots) {
        if (slot.kind == slot_kind::immediate8) {
            out.push_back(immediate_values()[uniform_index(rng, immediate_values().size())]);
        } else {
            out.push_back(static_cast<std::uint8_t>(uniform_index(rng, 16)));
        }
    }
    return out;
}

/// Uniform spec choice from the pool plus a fresh operand assignment.
inline instruction_instance sample_instance(const instruction_pool& pool,
                                            std::mt19937_64& rng) {
    if (pool.spec_ids.empty() || !pool.source) {
        throw std::runtime_error("pool: cannot sample from an empty pool");
    }
    instruction_instance inst;
    inst.spec_id = pool.spec_ids[uniform_index(rng, pool.spec_ids.size())];
    inst.operands = sample_operands(pool.source->spec(inst.spec_id), rng);
    return inst;
}

namespace detail {

inline const std::array<const char*, 16>& gpr64_names() {
    static const std::array<const char*, 16> names{
        "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
        "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15",
    };
    return names;
}

inline const char* memory_ptr_prefix(std::uint16_t width) {
    switch (width) {
        case 8: return "byte ptr";
        case 64: return "qword ptr";
        case 128: return "xmmword ptr";
        case 256: return "ymmword ptr";
        case 512: return "zmmword ptr";
        default: return "ptr";
    }
}

} // namespace detail

/// Scratch-region byte stride between memory slots.
inline constexpr unsigned k_scratch_slot_stride = 64;
inline constexpr unsigned k_scratch_slot_count = 16;

/// Intel-syntax rendering of one operand.
inline std::string render_operand(const operand_slot& slot, std::uint8_t value) {
    switch (slot.kind) {
        case slot_kind::xmm: return "xmm" + std::to_string(value);
        case slot_kind::ymm: return "ymm" + std::to_string(value);
        case slot_kind::zmm: return "zmm" + std::to_string(value);
        case slot_kind::gpr64: return detail::gpr64_names()[value];
        case slot_kind::mask: return "k" + std::to_string(value % 8);  // eight architectural names
        case slot_kind::immediate8: return std::to_string(static_cast<unsigned>(value));
        case slot_kind::memory: {
            std::ostringstream out;
            out << detail::memory_ptr_prefix(slot.width) << " [rcx+"
                << value * k_scratch_slot_stride << "]";
            return out.str();
        }
    }
    return {};
}

/// Intel-syntax rendering, e.g. "VPXOR xmm1, xmm2, xmm3".
inline std::string render_instruction(const catalog& cat, const instruction_instance& inst) {
    const auto& spec = cat.spec(inst.spec_id);
    std::string out = spec.mnemonic;
    for (std::size_t i = 0; i < spec.slots.size(); ++i) {
        out += i == 0 ? " " : ", ";
        out += render_operand(spec.slots[i], inst.operands[i]);
    }
    return out;
}

/// One instruction per line, newline-terminated.
inline std::string render_sequence(const catalog& cat,
                                   const std::vector<instruction_instance>& seq) {
    std::string out;
    for (const auto& inst : seq) {
        out += render_instruction(cat, inst);
        out += '\n';
    }
    return out;
}

} // namespace specswarm
