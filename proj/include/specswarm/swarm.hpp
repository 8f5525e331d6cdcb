#pragma once

/**
 * @file swarm.hpp
 * @brief Discrete particle-swarm search over position-coded instruction
 *        sequences: probabilistic mutation operators, a cognitive phase, and
 *        a mixed phase with per-class sub-swarms.
 *
 * Positions are vectors of exact integer codes. There is no continuous
 * velocity: movement is realized by discrete operators applied with fixed
 * probabilities, and the inertia coefficient is fixed at 1.
 */

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "specswarm/catalog.hpp"
#include "specswarm/encoding.hpp"
#include "specswarm/fitness.hpp"
#include "specswarm/rng.hpp"

namespace specswarm {

struct hyperparameters {
    double alpha = 1.0;  ///< inertia stand-in, fixed at 1
    double beta = 0.4;   ///< per-iteration mutation probability
    double gamma = 0.0;  ///< per-iteration leader-crossover probability
    std::uint32_t swarm_size = 50;
    std::uint32_t seq_length = 10;
    std::uint32_t cognitive_iters = 200;
    std::uint32_t mixed_iters = 800;
    std::uint32_t min_length = 2;

    void validate() const {
        if (alpha != 1.0) throw std::invalid_argument("hyperparameters: alpha is fixed at 1");
        if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("hyperparameters: beta outside [0, 1]");
        if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("hyperparameters: gamma outside [0, 1]");
        if (swarm_size == 0) throw std::invalid_argument("hyperparameters: swarm size must be positive");
        if (min_length == 0 || min_length > seq_length) {
            throw std::invalid_argument("hyperparameters: need 1 <= min_length <= seq_length");
        }
    }
};

struct particle {
    position_vector position;
    position_vector best_position;
    double best_fitness = 0.0;
    fitness_observation last_observation;
    std::optional<equivalence_class> assigned_class;
};

struct swarm {
    std::vector<particle> particles;
    std::mt19937_64 rng;
    const instruction_pool* pool = nullptr;
};

struct sub_swarm {
    equivalence_class cls{};
    std::vector<std::uint32_t> members;  ///< ascending particle indices
    std::uint32_t leader = 0;
};

/// N particles of n freshly sampled codes each; personal bests start at the
/// initial position with fitness 0 and no class.
inline swarm initialize_swarm(const instruction_pool& pool, const hyperparameters& hp,
                              std::uint64_t seed) {
    hp.validate();
    swarm sw;
    sw.pool = &pool;
    sw.rng = make_engine(derive_stream(seed, 0x5741524d));
    sw.particles.resize(hp.swarm_size);
    for (auto& p : sw.particles) {
        p.position.reserve(hp.seq_length);
        for (std::uint32_t d = 0; d < hp.seq_length; ++d) {
            p.position.push_back(encode_instance(*pool.source, sample_instance(pool, sw.rng)));
        }
        p.best_position = p.position;
        p.best_fitness = 0.0;
    }
    return sw;
}

/// With probability prob, resamples the operand fields of one uniformly
/// chosen dimension. The opcode field never changes.
inline particle mutate_operands(particle p, double prob, const instruction_pool& pool,
                                std::mt19937_64& rng) {
    if (p.position.empty()) return p;
    if (uniform_real(rng) >= prob) return p;
    const std::size_t d = uniform_index(rng, p.position.size());
    auto inst = decode_instance(*pool.source, p.position[d]);
    inst.operands = sample_operands(pool.source->spec(inst.spec_id), rng);
    p.position[d] = encode_instance(*pool.source, inst);
    return p;
}

/// With probability prob, replaces one uniformly chosen dimension with a
/// fresh sample from the pool. When the old and new spec share an identical
/// slot layout the operand fields carry over; otherwise they are resampled
/// as part of the fresh sample.
inline particle mutate_instruction(particle p, double prob, const instruction_pool& pool,
                                   std::mt19937_64& rng) {
    if (p.position.empty()) return p;
    if (uniform_real(rng) >= prob) return p;
    const std::size_t d = uniform_index(rng, p.position.size());
    const auto old_inst = decode_instance(*pool.source, p.position[d]);
    auto fresh = sample_instance(pool, rng);
    const auto& old_spec = pool.source->spec(old_inst.spec_id);
    const auto& new_spec = pool.source->spec(fresh.spec_id);
    if (old_spec.slots == new_spec.slots) {
        fresh.operands = old_inst.operands;
    }
    p.position[d] = encode_instance(*pool.source, fresh);
    return p;
}

/// With probability prob, overwrites one uniformly chosen dimension d2 of p
/// with dimension min(d2, |leader| - 1) of the leader's position.
inline particle crossover_with_leader(particle p, const particle& leader, double prob,
                                      std::mt19937_64& rng) {
    if (p.position.empty() || leader.position.empty()) return p;
    if (uniform_real(rng) >= prob) return p;
    const std::size_t d2 = uniform_index(rng, p.position.size());
    const std::size_t src = std::min(d2, leader.position.size() - 1);
    p.position[d2] = leader.position[src];
    return p;
}

/// With probability prob, deletes one uniformly chosen dimension, unless the
/// position is already at min_length.
inline particle reduce_dimension(particle p, double prob, std::uint32_t min_length,
                                 std::mt19937_64& rng) {
    if (p.position.size() <= min_length) return p;
    if (uniform_real(rng) >= prob) return p;
    const std::size_t d = uniform_index(rng, p.position.size());
    p.position.erase(p.position.begin() + static_cast<std::ptrdiff_t>(d));
    return p;
}

/// Partitions classed particles by assigned class, classes in table order,
/// members ascending. Unclassed particles belong to no sub-swarm.
inline std::vector<sub_swarm> form_subswarms(const swarm& sw);

/// Member with maximal personal-best fitness; ties go to the lowest index.
inline std::uint32_t select_leader(const sub_swarm& sub, const swarm& sw) {
    if (sub.members.empty()) throw std::invalid_argument("select_leader: empty sub-swarm");
    std::uint32_t best = sub.members.front();
    for (auto m : sub.members) {
        if (sw.particles[m].best_fitness > sw.particles[best].best_fitness) best = m;
    }
    return best;
}

inline std::vector<sub_swarm> form_subswarms(const swarm& sw) {
    std::map<equivalence_class, sub_swarm> by_class;
    for (std::uint32_t i = 0; i < sw.particles.size(); ++i) {
        const auto& cls = sw.particles[i].assigned_class;
        if (!cls) continue;
        auto& sub = by_class[*cls];
        sub.cls = *cls;
        sub.members.push_back(i);
    }
    std::vector<sub_swarm> out;
    out.reserve(by_class.size());
    for (auto& [cls, sub] : by_class) {
        sub.leader = select_leader(sub, sw);
        out.push_back(std::move(sub));
    }
    return out;
}

/// True when classed particles and sub-swarm membership agree exactly:
/// every classed particle appears in exactly one sub-swarm, the one for its
/// class, and no sub-swarm holds anything else.
inline bool partition_consistent(const swarm& sw, const std::vector<sub_swarm>& subs) {
    std::vector<int> seen(sw.particles.size(), 0);
    for (const auto& sub : subs) {
        for (auto m : sub.members) {
            if (m >= sw.particles.size()) return false;
            seen[m]++;
            const auto& cls = sw.particles[m].assigned_class;
            if (!cls || *cls != sub.cls) return false;
        }
    }
    for (std::uint32_t i = 0; i < sw.particles.size(); ++i) {
        const int expect = sw.particles[i].assigned_class ? 1 : 0;
        if (seen[i] != expect) return false;
    }
    return true;
}

enum class campaign_phase : std::uint8_t { cognitive, mixed, minimize };

inline const char* phase_name(campaign_phase p) {
    switch (p) {
        case campaign_phase::cognitive: return "cognitive";
        case campaign_phase::mixed: return "mixed";
        case campaign_phase::minimize: return "minimize";
    }
    return "";
}

/// Observer for evaluations and iteration boundaries. Default callbacks do
/// nothing; implementations log, collect metrics or check invariants.
class eval_recorder {
  public:
    virtual ~eval_recorder() = default;
    virtual void on_evaluation(campaign_phase, std::uint32_t /*iteration*/,
                               std::uint32_t /*particle*/, const position_vector&,
                               const fitness_observation&, const classification&) {}
    virtual void on_iteration_end(campaign_phase, std::uint32_t /*iteration*/, const swarm&,
                                  const std::vector<sub_swarm>&) {}
};

/// Counted, optionally parallel evaluation of decoded positions against a
/// backend. Parallel dispatch is used only for reentrant backends and merges
/// results in particle-index order, so worker count never changes outcomes.
class evaluator {
  public:
    evaluator(fitness_backend& backend, const baseline_profile& baseline,
              const data_environment& env, std::uint32_t reps, const catalog& cat,
              std::uint32_t workers = 1)
        : backend_{&backend},
          baseline_{baseline},
          env_{env},
          reps_{reps},
          cat_{&cat},
          workers_{std::max<std::uint32_t>(1, workers)} {}

    const catalog& source_catalog() const { return *cat_; }
    const baseline_profile& baseline() const { return baseline_; }
    const data_environment& environment() const { return env_; }
    std::uint32_t reps() const { return reps_; }
    std::uint64_t evaluations() const { return count_; }

    fitness_observation evaluate_position(const position_vector& pos) {
        const auto stream = count_++;
        return evaluate_decoded(pos, stream);
    }

    std::vector<fitness_observation> evaluate_batch(const std::vector<position_vector>& batch) {
        std::vector<fitness_observation> out(batch.size());
        const std::uint64_t base = count_;
        count_ += batch.size();
        const bool parallel = workers_ > 1 && backend_->capabilities().reentrant &&
                              batch.size() > 1;
        if (!parallel) {
            for (std::size_t i = 0; i < batch.size(); ++i) {
                out[i] = evaluate_decoded(batch[i], base + i);
            }
            return out;
        }
        const std::uint32_t n = std::min<std::uint32_t>(workers_,
                                                        static_cast<std::uint32_t>(batch.size()));
        std::vector<std::thread> threads;
        threads.reserve(n);
        for (std::uint32_t t = 0; t < n; ++t) {
            threads.emplace_back([&, t] {
                for (std::size_t i = t; i < batch.size(); i += n) {
                    out[i] = evaluate_decoded(batch[i], base + i);
                }
            });
        }
        for (auto& th : threads) th.join();
        return out;
    }

  private:
    fitness_observation evaluate_decoded(const position_vector& pos, std::uint64_t stream) {
        try {
            const auto seq = decode_sequence(*cat_, pos);
            return evaluate(*backend_, baseline_, seq, reps_, env_, stream);
        } catch (const std::exception&) {
            fitness_observation bad;
            bad.valid = false;
            return bad;
        }
    }

    fitness_backend* backend_;
    baseline_profile baseline_;
    data_environment env_;
    std::uint32_t reps_;
    const catalog* cat_;
    std::uint32_t workers_;
    std::uint64_t count_ = 0;
};

namespace detail {

/// Applies one evaluated observation to a particle. Personal best moves only
/// on strict fitness improvement, and the class assignment follows it.
inline classification absorb_observation(particle& p, const fitness_observation& obs) {
    const auto cls = classify(obs);
    p.last_observation = obs;
    if (cls.fitness > p.best_fitness) {
        p.best_fitness = cls.fitness;
        p.best_position = p.position;
        p.assigned_class = cls.cls;
    }
    return cls;
}

} // namespace detail

/// Cognitive phase: per iteration each particle has one instruction mutation
/// and one operand mutation applied, each with probability beta, and is then
/// evaluated. Crossover is disabled here regardless of gamma. Backend
/// failures become zero-fitness observations and never abort the phase.
inline void cognitive_phase(swarm& sw, evaluator& ev, const hyperparameters& hp,
                            eval_recorder* rec = nullptr) {
    hp.validate();
    if (!sw.pool) throw std::invalid_argument("cognitive_phase: swarm has no pool");
    for (std::uint32_t iter = 0; iter < hp.cognitive_iters; ++iter) {
        for (auto& p : sw.particles) {
            p = mutate_instruction(std::move(p), hp.beta, *sw.pool, sw.rng);
            p = mutate_operands(std::move(p), hp.beta, *sw.pool, sw.rng);
        }
        std::vector<position_vector> batch;
        batch.reserve(sw.particles.size());
        for (const auto& p : sw.particles) batch.push_back(p.position);
        const auto observations = ev.evaluate_batch(batch);
        for (std::uint32_t j = 0; j < sw.particles.size(); ++j) {
            const auto cls = detail::absorb_observation(sw.particles[j], observations[j]);
            if (rec) {
                rec->on_evaluation(campaign_phase::cognitive, iter, j, sw.particles[j].position,
                                   observations[j], cls);
            }
        }
        if (rec) rec->on_iteration_end(campaign_phase::cognitive, iter, sw, {});
    }
}

/// Mixed phase: sub-swarm members additionally cross over toward their
/// leader's current position (probability gamma) and may drop a dimension
/// (probability beta, floored at min_length). Unclassed particles keep the
/// cognitive behavior and join a sub-swarm once their personal best fires.
/// Class membership and leaders refresh at every iteration boundary.
inline void mixed_phase(swarm& sw, std::vector<sub_swarm>& subs, evaluator& ev,
                        const hyperparameters& hp, eval_recorder* rec = nullptr) {
    hp.validate();
    if (!sw.pool) throw std::invalid_argument("mixed_phase: swarm has no pool");
    for (std::uint32_t iter = 0; iter < hp.mixed_iters; ++iter) {
        std::map<equivalence_class, std::uint32_t> leader_of;
        std::map<equivalence_class, position_vector> leader_position;
        for (const auto& sub : subs) {
            leader_of[sub.cls] = sub.leader;
            leader_position[sub.cls] = sw.particles[sub.leader].position;
        }
        for (std::uint32_t j = 0; j < sw.particles.size(); ++j) {
            auto& p = sw.particles[j];
            const bool pooled = p.assigned_class && leader_of.count(*p.assigned_class) > 0;
            p = mutate_instruction(std::move(p), hp.beta, *sw.pool, sw.rng);
            p = mutate_operands(std::move(p), hp.beta, *sw.pool, sw.rng);
            if (pooled) {
                const auto cls = *p.assigned_class;
                particle snapshot;
                snapshot.position = leader_of[cls] == j ? p.position : leader_position[cls];
                p = crossover_with_leader(std::move(p), snapshot, hp.gamma, sw.rng);
                p = reduce_dimension(std::move(p), hp.beta, hp.min_length, sw.rng);
            }
        }
        std::vector<position_vector> batch;
        batch.reserve(sw.particles.size());
        for (const auto& p : sw.particles) batch.push_back(p.position);
        const auto observations = ev.evaluate_batch(batch);
        for (std::uint32_t j = 0; j < sw.particles.size(); ++j) {
            const auto cls = detail::absorb_observation(sw.particles[j], observations[j]);
            if (rec) {
                rec->on_evaluation(campaign_phase::mixed, iter, j, sw.particles[j].position,
                                   observations[j], cls);
            }
        }
        subs = form_subswarms(sw);
        if (rec) rec->on_iteration_end(campaign_phase::mixed, iter, sw, subs);
    }
}

} // namespace specswarm
