// Command-line front end: run campaigns, inspect catalogs, list presets and
// report the detected host platform.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specswarm/campaign.hpp"
#include "specswarm/hw/platform.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& backend,
            const std::optional<std::string>& preset, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& extensions,
            const std::optional<std::string>& profile, const std::optional<std::string>& out_dir) {
    auto cfg = specswarm::load_config(config_path);
    if (backend) cfg.backend = *backend;
    if (preset) specswarm::apply_preset(cfg, *preset);
    if (seed) cfg.seed = *seed;
    if (extensions) cfg.extensions = split_csv(*extensions);
    if (profile) cfg.profile = *profile;
    if (out_dir) cfg.output_dir = *out_dir;

    const auto report = specswarm::run_campaign(cfg);
    std::cout << "campaign complete: " << report.total_evaluations << " evaluations, catalog "
              << report.catalog_digest << "\n";
    for (const auto& [label, cr] : report.classes) {
        if (cr.first_hit_index == 0) continue;
        std::cout << "  " << label << ": first hit at evaluation " << cr.first_hit_index
                  << ", best fitness " << cr.best_fitness;
        if (cr.minimal) {
            std::cout << ", minimal reproducer " << cr.minimal->codes.size() << " instruction(s)";
        }
        std::cout << "\n";
    }
    std::cout << "outputs written to " << cfg.output_dir << "\n";
    return 0;
}

int cmd_inspect(const std::string& catalog_path, const std::string& extension_filter) {
    const auto cat = specswarm::load_catalog(catalog_path);
    const auto& sum = cat.summary();
    std::cout << "catalog: " << catalog_path << "\n";
    std::cout << "  digest: " << specswarm::digest_file(catalog_path) << "\n";
    std::cout << "  accepted: " << sum.accepted << "\n";
    std::cout << "  skipped (privileged): " << sum.skipped_non_ring3 << "\n";
    std::cout << "  skipped (unusable encoding): " << sum.skipped_unparseable << "\n";
    std::cout << "  extensions:\n";
    for (const auto& ext : cat.extensions()) {
        const auto* ids = cat.specs_for(ext);
        std::cout << "    " << ext << ": " << (ids ? ids->size() : 0) << " instruction(s)\n";
    }
    if (!extension_filter.empty()) {
        const auto* ids = cat.specs_for(extension_filter);
        if (!ids) {
            std::cerr << "unknown extension: " << extension_filter << "\n";
            return 1;
        }
        for (auto id : *ids) {
            const auto& spec = cat.spec(id);
            std::cout << "  [" << spec.opcode_index << "] " << spec.mnemonic << " ("
                      << spec.slots.size() << " operand(s), " << spec.operand_bits()
                      << " operand bits)\n";
        }
    }
    return 0;
}

int cmd_presets() {
    std::cout << "preset    beta   gamma\n";
    for (const auto& p : specswarm::variant_presets()) {
        std::cout << p.name;
        for (std::size_t i = p.name.size(); i < 10; ++i) std::cout << ' ';
        std::cout << p.beta << "    " << p.gamma << "\n";
    }
    return 0;
}

int cmd_detect() {
    const auto info = specswarm::detect_platform();
    std::cout << "vendor: " << info.vendor << "\n";
    std::cout << "family: 0x" << std::hex << info.family << ", model: 0x" << info.model
              << std::dec << "\n";
    std::cout << "microarchitecture: " << specswarm::microarch_name(info.arch) << "\n";
    const auto cpuinfo = specswarm::read_cpuinfo();
    if (cpuinfo) {
        std::cout << "cpuinfo agrees: " << (*cpuinfo == info ? "yes" : "no") << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"swarm search for speculative-hazard instruction sequences"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a search campaign from a JSON config");
    std::string config_path;
    run->add_option("--config", config_path, "campaign config JSON")->required();
    std::optional<std::string> backend, preset, extensions, profile, out_dir;
    std::optional<std::uint64_t> seed;
    run->add_option("--backend", backend, "override backend (sim or hw)");
    run->add_option("--preset", preset, "override operator-probability preset");
    run->add_option("--seed", seed, "override campaign seed");
    run->add_option("--extensions", extensions, "override extension list (comma separated)");
    run->add_option("--profile", profile, "override microarchitecture profile");
    run->add_option("--out", out_dir, "override output directory");

    auto* inspect = app.add_subcommand("inspect", "summarize a catalog file");
    std::string catalog_path, extension_filter;
    inspect->add_option("--catalog", catalog_path, "catalog XML or JSON")->required();
    inspect->add_option("--extension", extension_filter, "list instructions of one extension");

    auto* presets = app.add_subcommand("presets", "list operator-probability presets");
    auto* detect = app.add_subcommand("detect", "identify the host CPU");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(config_path, backend, preset, seed, extensions, profile, out_dir);
        }
        if (inspect->parsed()) return cmd_inspect(catalog_path, extension_filter);
        if (presets->parsed()) return cmd_presets();
        if (detect->parsed()) return cmd_detect();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
