#pragma once

/**
 * @file campaign.hpp
 * @brief End-to-end search campaigns: configuration loading, preset variants,
 *        phase orchestration, per-evaluation JSONL logging, greedy reproducer
 *        minimization and report emission.
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "specswarm/catalog.hpp"
#include "specswarm/encoding.hpp"
#include "specswarm/fitness.hpp"
#include "specswarm/hw/backend.hpp"
#include "specswarm/oracle.hpp"
#include "specswarm/rng.hpp"
#include "specswarm/swarm.hpp"

namespace specswarm {

struct campaign_config {
    std::string catalog_path;
    std::vector<std::string> extensions;
    std::string backend = "sim";  ///< "sim" or "hw"
    std::string profile = "alder_lake";
    std::uint64_t seed = 0;
    std::uint32_t reps = 100;
    std::optional<std::string> preset;
    std::string output_dir = ".";
    hyperparameters hp;
    double beta_cognitive = 0.4;
    double beta_mixed = 0.1;
    double gamma_mixed = 0.4;
    data_environment env = data_environment::groom_all();
    double noise_lambda = 0.0;
    std::optional<std::array<bool, k_rule_count>> rule_override;
    std::uint32_t baseline_samples = 50;
    std::uint32_t workers = 1;
    std::optional<std::string> counters_file;
    std::optional<std::uint32_t> core_pin;
    std::uint32_t hw_timeout_ms = 2000;
};

struct variant_preset {
    std::string name;
    double beta;
    double gamma;
};

/// Named operator-probability variants. Each sets beta for both phases and
/// gamma for the mixed phase.
inline const std::vector<variant_preset>& variant_presets() {
    static const std::vector<variant_preset> table = {
        {"b1g0", 1.0, 0.0},  {"b04g0", 0.4, 0.0},  {"b01g0", 0.1, 0.0},
        {"b01g01", 0.1, 0.1}, {"b01g04", 0.1, 0.4}, {"b0g1", 0.0, 1.0},
    };
    return table;
}

inline void apply_preset(campaign_config& cfg, const std::string& name) {
    for (const auto& p : variant_presets()) {
        if (p.name != name) continue;
        cfg.beta_cognitive = p.beta;
        cfg.beta_mixed = p.beta;
        cfg.gamma_mixed = p.gamma;
        cfg.preset = name;
        return;
    }
    std::string names;
    for (const auto& p : variant_presets()) {
        if (!names.empty()) names += ", ";
        names += p.name;
    }
    throw std::invalid_argument("preset: unknown preset \"" + name + "\" (available: " + names +
                                ")");
}

namespace detail {

template <typename T>
T config_field(const nlohmann::json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error(std::string("config: field \"") + name +
                                 "\" has the wrong type");
    }
}

} // namespace detail

/// Parses a campaign configuration from JSON. "catalog" and "extensions" are
/// required; everything else falls back to defaults. Errors name the field.
inline campaign_config parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw std::runtime_error("config: top level must be a JSON object");
    campaign_config cfg;
    if (!j.contains("catalog")) throw std::runtime_error("config: missing required field \"catalog\"");
    if (!j.contains("extensions")) {
        throw std::runtime_error("config: missing required field \"extensions\"");
    }
    cfg.catalog_path = detail::config_field<std::string>(j, "catalog", "");
    cfg.extensions = detail::config_field<std::vector<std::string>>(j, "extensions", {});
    cfg.backend = detail::config_field<std::string>(j, "backend", cfg.backend);
    cfg.profile = detail::config_field<std::string>(j, "profile", cfg.profile);
    cfg.seed = detail::config_field<std::uint64_t>(j, "seed", cfg.seed);
    cfg.reps = detail::config_field<std::uint32_t>(j, "reps", cfg.reps);
    cfg.output_dir = detail::config_field<std::string>(j, "output_dir", cfg.output_dir);
    cfg.hp.swarm_size = detail::config_field<std::uint32_t>(j, "swarm_size", cfg.hp.swarm_size);
    cfg.hp.seq_length = detail::config_field<std::uint32_t>(j, "seq_length", cfg.hp.seq_length);
    cfg.hp.min_length = detail::config_field<std::uint32_t>(j, "min_length", cfg.hp.min_length);
    cfg.hp.cognitive_iters =
        detail::config_field<std::uint32_t>(j, "cognitive_iters", cfg.hp.cognitive_iters);
    cfg.hp.mixed_iters = detail::config_field<std::uint32_t>(j, "mixed_iters", cfg.hp.mixed_iters);
    cfg.beta_cognitive = detail::config_field<double>(j, "beta_cognitive", cfg.beta_cognitive);
    cfg.beta_mixed = detail::config_field<double>(j, "beta_mixed", cfg.beta_mixed);
    cfg.gamma_mixed = detail::config_field<double>(j, "gamma_mixed", cfg.gamma_mixed);
    cfg.env.denormal_mask = detail::config_field<std::uint16_t>(j, "denormal_mask",
                                                               cfg.env.denormal_mask);
    cfg.env.scratch_init = detail::config_field<std::uint8_t>(j, "scratch_init",
                                                              cfg.env.scratch_init);
    cfg.noise_lambda = detail::config_field<double>(j, "noise_lambda", cfg.noise_lambda);
    cfg.baseline_samples =
        detail::config_field<std::uint32_t>(j, "baseline_samples", cfg.baseline_samples);
    cfg.workers = detail::config_field<std::uint32_t>(j, "workers", cfg.workers);
    cfg.hw_timeout_ms = detail::config_field<std::uint32_t>(j, "hw_timeout_ms", cfg.hw_timeout_ms);
    if (j.contains("preset") && !j.at("preset").is_null()) {
        apply_preset(cfg, detail::config_field<std::string>(j, "preset", ""));
    }
    if (j.contains("rules") && !j.at("rules").is_null()) {
        const auto rules = detail::config_field<std::vector<bool>>(j, "rules", {});
        if (rules.size() != k_rule_count) {
            throw std::runtime_error("config: field \"rules\" must hold exactly 4 booleans");
        }
        std::array<bool, k_rule_count> arr{};
        std::copy(rules.begin(), rules.end(), arr.begin());
        cfg.rule_override = arr;
    }
    if (j.contains("counters") && !j.at("counters").is_null()) {
        cfg.counters_file = detail::config_field<std::string>(j, "counters", "");
    }
    if (j.contains("core_pin") && !j.at("core_pin").is_null()) {
        cfg.core_pin = detail::config_field<std::uint32_t>(j, "core_pin", 0);
    }
    return cfg;
}

inline campaign_config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

inline nlohmann::json config_to_json(const campaign_config& cfg) {
    nlohmann::json j;
    j["catalog"] = cfg.catalog_path;
    j["extensions"] = cfg.extensions;
    j["backend"] = cfg.backend;
    j["profile"] = cfg.profile;
    j["seed"] = cfg.seed;
    j["reps"] = cfg.reps;
    j["preset"] = cfg.preset ? nlohmann::json(*cfg.preset) : nlohmann::json(nullptr);
    j["output_dir"] = cfg.output_dir;
    j["swarm_size"] = cfg.hp.swarm_size;
    j["seq_length"] = cfg.hp.seq_length;
    j["min_length"] = cfg.hp.min_length;
    j["cognitive_iters"] = cfg.hp.cognitive_iters;
    j["mixed_iters"] = cfg.hp.mixed_iters;
    j["beta_cognitive"] = cfg.beta_cognitive;
    j["beta_mixed"] = cfg.beta_mixed;
    j["gamma_mixed"] = cfg.gamma_mixed;
    j["denormal_mask"] = cfg.env.denormal_mask;
    j["scratch_init"] = cfg.env.scratch_init;
    j["noise_lambda"] = cfg.noise_lambda;
    if (cfg.rule_override) {
        j["rules"] = std::vector<bool>(cfg.rule_override->begin(), cfg.rule_override->end());
    } else {
        j["rules"] = nullptr;
    }
    j["baseline_samples"] = cfg.baseline_samples;
    j["workers"] = cfg.workers;
    j["counters"] = cfg.counters_file ? nlohmann::json(*cfg.counters_file) : nlohmann::json(nullptr);
    j["core_pin"] = cfg.core_pin ? nlohmann::json(*cfg.core_pin) : nlohmann::json(nullptr);
    j["hw_timeout_ms"] = cfg.hw_timeout_ms;
    return j;
}

struct reproducer {
    std::string assembly;
    std::vector<std::uint64_t> codes;

    friend bool operator==(const reproducer&, const reproducer&) = default;
};

struct class_report {
    std::uint64_t first_hit_index = 0;  ///< 1-based log line of the first classified hit; 0 = never
    double first_hit_wall_s = 0.0;
    double best_fitness = 0.0;
    std::optional<reproducer> minimal;
    std::optional<std::vector<std::string>> trace;

    friend bool operator==(const class_report&, const class_report&) = default;
};

struct campaign_report {
    nlohmann::json config_echo;
    std::string catalog_digest;
    std::uint64_t total_evaluations = 0;
    std::map<std::string, class_report> classes;  ///< keyed by event label, all nine present

    friend bool operator==(const campaign_report&, const campaign_report&) = default;
};

/// Streams one JSON object per evaluation and tracks per-class firsts and
/// bests. Log lines carry no wall-clock data, so identical campaigns produce
/// byte-identical logs; wall times live only in the report.
class campaign_recorder final : public eval_recorder {
  public:
    explicit campaign_recorder(std::ostream* log) : log_{log} {}

    void on_evaluation(campaign_phase phase, std::uint32_t iteration, std::uint32_t particle,
                       const position_vector& pos, const fitness_observation& obs,
                       const classification& cls) override {
        ++count_;
        if (cls.cls) {
            auto& slot = per_class_[index_of(*cls.cls)];
            if (slot.first_hit == 0) {
                slot.first_hit = count_;
                slot.first_wall_s = std::chrono::duration<double>(clock::now() - start_).count();
            }
            if (cls.fitness > slot.best_fitness) {
                slot.best_fitness = cls.fitness;
                slot.best_position = pos;
            }
        }
        if (!log_) return;
        nlohmann::json line;
        line["eval"] = count_;
        line["phase"] = phase_name(phase);
        line["iteration"] = iteration;
        line["particle"] = particle;
        std::vector<std::uint64_t> codes;
        codes.reserve(pos.size());
        for (auto c : pos) codes.push_back(c.value);
        line["codes"] = codes;
        std::vector<std::string> fired;
        for (auto c : all_classes()) {
            if (obs.fired[index_of(c)]) fired.emplace_back(label_of(c));
        }
        line["fired"] = fired;
        line["class"] = cls.cls ? nlohmann::json(label_of(*cls.cls)) : nlohmann::json(nullptr);
        line["fitness"] = cls.fitness;
        line["valid"] = obs.valid;
        (*log_) << line.dump() << '\n';
    }

    std::uint64_t evaluation_count() const { return count_; }
    std::uint64_t first_hit(equivalence_class c) const { return per_class_[index_of(c)].first_hit; }
    double first_hit_wall_s(equivalence_class c) const {
        return per_class_[index_of(c)].first_wall_s;
    }
    double best_fitness(equivalence_class c) const {
        return per_class_[index_of(c)].best_fitness;
    }
    const std::optional<position_vector>& best_position(equivalence_class c) const {
        return per_class_[index_of(c)].best_position;
    }

  private:
    using clock = std::chrono::steady_clock;

    struct class_slot {
        std::uint64_t first_hit = 0;
        double first_wall_s = 0.0;
        double best_fitness = 0.0;
        std::optional<position_vector> best_position;
    };

    std::ostream* log_;
    clock::time_point start_ = clock::now();
    std::uint64_t count_ = 0;
    class_array<class_slot> per_class_{};
};

/// Greedy one-pass-at-a-time shrink: repeatedly tries deleting each element
/// in index order, keeping any deletion after which the target class still
/// fires, until a full pass deletes nothing. The result is 1-minimal: no
/// single further deletion preserves the firing.
inline std::vector<instruction_instance> minimize_sequence(std::vector<instruction_instance> seq,
                                                           evaluator& ev,
                                                           equivalence_class target,
                                                           eval_recorder* rec = nullptr) {
    const auto& cat = ev.source_catalog();
    auto fires = [&](const std::vector<instruction_instance>& s) {
        const auto pos = encode_sequence(cat, s);
        const auto obs = ev.evaluate_position(pos);
        if (rec) rec->on_evaluation(campaign_phase::minimize, 0, 0, pos, obs, classify(obs));
        return obs.valid && obs.fired[index_of(target)];
    };
    if (!fires(seq)) {
        throw std::runtime_error(std::string("minimize: sequence does not fire ") +
                                 label_of(target));
    }
    bool changed = true;
    while (changed) {
        changed = false;
        std::size_t i = 0;
        while (i < seq.size()) {
            auto cand = seq;
            cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(i));
            if (fires(cand)) {
                seq = std::move(cand);
                changed = true;
            } else {
                ++i;
            }
        }
    }
    return seq;
}

namespace detail {

inline std::string trace_line(const catalog& cat, const std::vector<instruction_instance>& seq,
                              const rule_firing& f) {
    std::ostringstream os;
    os << "rule " << f.rule << " over [";
    for (std::size_t i = 0; i < f.indices.size(); ++i) {
        if (i) os << ", ";
        os << f.indices[i] << ":" << cat.spec(seq[f.indices[i]].spec_id).mnemonic;
    }
    os << "] ->";
    for (auto c : all_classes()) {
        if (f.contribution[index_of(c)] > 0) {
            os << " " << label_of(c) << "+" << f.contribution[index_of(c)];
        }
    }
    return os.str();
}

} // namespace detail

inline nlohmann::json report_to_json(const campaign_report& rep) {
    nlohmann::json j;
    j["config"] = rep.config_echo;
    j["catalog_digest"] = rep.catalog_digest;
    j["total_evaluations"] = rep.total_evaluations;
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [label, cr] : rep.classes) {
        nlohmann::json c;
        c["first_hit_index"] = cr.first_hit_index;
        c["first_hit_wall_s"] = cr.first_hit_wall_s;
        c["best_fitness"] = cr.best_fitness;
        if (cr.minimal) {
            c["minimal"] = {{"assembly", cr.minimal->assembly}, {"codes", cr.minimal->codes}};
        } else {
            c["minimal"] = nullptr;
        }
        c["trace"] = cr.trace ? nlohmann::json(*cr.trace) : nlohmann::json(nullptr);
        classes[label] = std::move(c);
    }
    j["classes"] = std::move(classes);
    return j;
}

inline campaign_report report_from_json(const nlohmann::json& j) {
    campaign_report rep;
    rep.config_echo = j.at("config");
    rep.catalog_digest = j.at("catalog_digest").get<std::string>();
    rep.total_evaluations = j.at("total_evaluations").get<std::uint64_t>();
    for (const auto& [label, c] : j.at("classes").items()) {
        class_report cr;
        cr.first_hit_index = c.at("first_hit_index").get<std::uint64_t>();
        cr.first_hit_wall_s = c.at("first_hit_wall_s").get<double>();
        cr.best_fitness = c.at("best_fitness").get<double>();
        if (!c.at("minimal").is_null()) {
            reproducer r;
            r.assembly = c.at("minimal").at("assembly").get<std::string>();
            r.codes = c.at("minimal").at("codes").get<std::vector<std::uint64_t>>();
            cr.minimal = std::move(r);
        }
        if (!c.at("trace").is_null()) {
            cr.trace = c.at("trace").get<std::vector<std::string>>();
        }
        rep.classes.emplace(label, std::move(cr));
    }
    return rep;
}

inline void emit_report(const campaign_report& rep, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot open " + path.string() + " for writing");
    out << report_to_json(rep).dump(2) << '\n';
}

inline campaign_report load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

/// Runs a full campaign: catalog load, pool construction, baseline
/// calibration, cognitive phase, sub-swarm formation, mixed phase, then
/// per-class minimization. Writes evaluations.jsonl, report.json and one
/// repro_<LABEL>.s per minimized class into output_dir, and returns the
/// report.
inline campaign_report run_campaign(const campaign_config& cfg_in) {
    campaign_config cfg = cfg_in;
    if (cfg.preset) apply_preset(cfg, *cfg.preset);
    cfg.hp.validate();

    const catalog cat = load_catalog(cfg.catalog_path);
    const auto pool = build_pool(cat, cfg.extensions);

    microarch_profile prof = default_profile(microarch_from_name(cfg.profile));
    if (cfg.rule_override) prof.rule_enabled = *cfg.rule_override;

    std::unique_ptr<fitness_backend> backend;
    if (cfg.backend == "sim") {
        backend = std::make_unique<sim_oracle>(cat, prof, cfg.noise_lambda,
                                               derive_stream(cfg.seed, 0x4e4f4953));
    } else if (cfg.backend == "hw") {
        const auto plat = detect_platform();
        if (plat.arch == microarch::unsupported) {
            throw std::runtime_error("campaign: hardware backend requires a supported platform");
        }
        hw_options opt;
        opt.arch = plat.arch;
        opt.counters = cfg.counters_file ? load_counter_map(*cfg.counters_file)
                                         : default_counter_map(plat.arch);
        opt.core_pin = cfg.core_pin;
        opt.timeout_ms = cfg.hw_timeout_ms;
        backend = std::make_unique<hw_backend>(cat, opt);
    } else {
        throw std::invalid_argument("campaign: unknown backend \"" + cfg.backend +
                                    "\" (use \"sim\" or \"hw\")");
    }

    const auto baseline =
        calibrate_baseline(*backend, cfg.baseline_samples, cfg.reps, cfg.env);

    std::filesystem::create_directories(cfg.output_dir);
    const auto log_path = std::filesystem::path(cfg.output_dir) / "evaluations.jsonl";
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("campaign: cannot open " + log_path.string());
    campaign_recorder rec(&log);

    hyperparameters hp_cog = cfg.hp;
    hp_cog.beta = cfg.beta_cognitive;
    hp_cog.gamma = 0.0;
    hyperparameters hp_mixed = cfg.hp;
    hp_mixed.beta = cfg.beta_mixed;
    hp_mixed.gamma = cfg.gamma_mixed;

    auto sw = initialize_swarm(pool, hp_cog, cfg.seed);
    evaluator ev(*backend, baseline, cfg.env, cfg.reps, cat, cfg.workers);
    cognitive_phase(sw, ev, hp_cog, &rec);
    auto subs = form_subswarms(sw);
    mixed_phase(sw, subs, ev, hp_mixed, &rec);

    // Minimization runs against a noise-free oracle on the simulated backend
    // so that shrink decisions depend only on the rule scan; hardware
    // campaigns keep the live backend.
    std::unique_ptr<sim_oracle> min_backend;
    std::unique_ptr<evaluator> min_ev;
    if (cfg.backend == "sim") {
        min_backend = std::make_unique<sim_oracle>(cat, prof, 0.0, 0);
        const auto min_baseline =
            calibrate_baseline(*min_backend, cfg.baseline_samples, cfg.reps, cfg.env);
        min_ev = std::make_unique<evaluator>(*min_backend, min_baseline, cfg.env, cfg.reps, cat,
                                             cfg.workers);
    }
    evaluator& shrink_ev = min_ev ? *min_ev : ev;

    campaign_report rep;
    rep.config_echo = config_to_json(cfg);
    rep.catalog_digest = digest_file(cfg.catalog_path);

    for (auto c : all_classes()) {
        class_report cr;
        cr.first_hit_index = rec.first_hit(c);
        cr.first_hit_wall_s = rec.first_hit_wall_s(c);
        cr.best_fitness = rec.best_fitness(c);
        const auto& best = rec.best_position(c);
        if (best) {
            try {
                auto seq = decode_sequence(cat, *best);
                auto minimal = minimize_sequence(std::move(seq), shrink_ev, c, &rec);
                reproducer r;
                r.assembly = render_sequence(cat, minimal);
                for (auto code : encode_sequence(cat, minimal)) r.codes.push_back(code.value);
                if (min_backend) {
                    std::vector<std::string> lines;
                    const auto trace = min_backend->trace(minimal, cfg.env);
                    for (const auto& f : trace.firings) {
                        lines.push_back(detail::trace_line(cat, minimal, f));
                    }
                    cr.trace = std::move(lines);
                }
                cr.minimal = std::move(r);
            } catch (const std::exception&) {
                // The recorded best no longer fires under the minimization
                // backend (e.g. it only classified through counter noise);
                // report the hit without a reproducer.
            }
        }
        rep.classes.emplace(label_of(c), std::move(cr));
    }

    rep.total_evaluations = rec.evaluation_count();
    log.close();

    for (const auto& [label, cr] : rep.classes) {
        if (!cr.minimal) continue;
        const auto repro_path = std::filesystem::path(cfg.output_dir) / ("repro_" + label + ".s");
        std::ofstream repro(repro_path);
        if (!repro) throw std::runtime_error("campaign: cannot open " + repro_path.string());
        repro << "# minimal reproducer: " << label << "\n" << cr.minimal->assembly;
    }
    emit_report(rep, std::filesystem::path(cfg.output_dir) / "report.json");
    return rep;
}

} // namespace specswarm
