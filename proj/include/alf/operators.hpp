#pragma once

// Fitness-based genetic operators. Mutation attempts, structural mutation
// probability, perturbation magnitude, added node count and crossover
// inheritance are all scaled by an individual's fitness relative to the
// fitness threshold f_t. With fitness scaling disabled the operators fall back
// to fixed mid-range constants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "alf/genome.hpp"
#include "alf/rng.hpp"
#include "alf/speciation.hpp"

namespace alf {

struct MutationParams {
    double m_o = 0.1;         // mutation offset
    std::size_t m_a = 5;      // maximum mutation attempts
    std::size_t v_max = 5;    // maximum nodes added at once
    double f_t = 1.0;         // fitness threshold
    double p_change = 0.7;    // weight mutation mix
    double p_create = 0.2;
    double p_delete = 0.1;
    double sigma_floor = 0.01;
    bool allow_recurrent = false;
    bool fitness_based = true;

    // Constants used when fitness scaling is off.
    double fixed_sigma = 1.0;
    double fixed_structural_probability = 0.5;

    void validate() const
    {
        if (!(f_t > 0.0))
            throw std::invalid_argument("fitness threshold must be positive");
        if (m_o < 0.0 || m_a < 1 || v_max < 1)
            throw std::invalid_argument("mutation parameters need m_o >= 0, m_a >= 1, v_max >= 1");
        if (p_change < 0.0 || p_create < 0.0 || p_delete < 0.0 || std::fabs(p_change + p_create + p_delete - 1.0) > 1e-9)
            throw std::invalid_argument("weight mutation probabilities must be non-negative and sum to 1");
        if (!(sigma_floor > 0.0))
            throw std::invalid_argument("sigma floor must be positive");
    }
};

/// m_r = min(max(1, round(((1 + m_o) - F/f_t) * m_a)), m_a)
inline std::size_t mutation_rate(double fitness, const MutationParams& p)
{
    if (!(p.f_t > 0.0))
        throw std::invalid_argument("fitness threshold must be positive");
    if (!p.fitness_based)
        return std::max<std::size_t>(1, (p.m_a + 1) / 2);
    double raw = ((1.0 + p.m_o) - fitness / p.f_t) * static_cast<double>(p.m_a);
    double r = std::max(1.0, std::round(raw));
    return static_cast<std::size_t>(std::min(r, static_cast<double>(p.m_a)));
}

/// P_mut = min(1 + m_o - (E/E_full + F/f_t) / 2, 1), floored at 0.
inline double structural_mutation_probability(std::size_t e, std::size_t e_full, double fitness, const MutationParams& p)
{
    if (!p.fitness_based)
        return p.fixed_structural_probability;
    if (e_full == 0)
        throw std::invalid_argument("full connection count must be positive");
    double density = static_cast<double>(e) / static_cast<double>(e_full);
    double v = std::min(1.0 + p.m_o - (density + fitness / p.f_t) / 2.0, 1.0);
    return std::max(0.0, v);
}

/// V_mut = ceil(V_max - F/f_t * V_max), floored at 0.
inline std::size_t nodes_to_add(double fitness, double f_t, std::size_t v_max)
{
    double v = std::ceil(static_cast<double>(v_max) - fitness / f_t * static_cast<double>(v_max) - 1e-12);
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(v_max)));
}

inline std::size_t nodes_to_add(double fitness, const MutationParams& p)
{
    if (!p.fitness_based)
        return (p.v_max + 1) / 2;
    return nodes_to_add(fitness, p.f_t, p.v_max);
}

/// Standard deviation of weight perturbations: 1.25 - F/f_t, clamped at sigma_floor.
inline double weight_sigma(double fitness, const MutationParams& p)
{
    if (!p.fitness_based)
        return p.fixed_sigma;
    return std::max(p.sigma_floor, 1.25 - fitness / p.f_t);
}

namespace detail {

inline double nonzero_normal(Rng& rng, double sigma)
{
    std::normal_distribution<double> n(0.0, sigma);
    double w;
    do
        w = n(rng);
    while (w == 0.0);
    return w;
}

template <class T>
const T& pick(std::span<const T> items, Rng& rng)
{
    std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
    return items[d(rng)];
}

inline std::vector<LayerId> layer_ids(const Genome& g)
{
    std::vector<LayerId> ids;
    for (const Layer& l : g.layers())
        ids.push_back(l.id);
    return ids;
}

}  // namespace detail

enum class WeightOp { change, create, remove };

/// One weight mutation attempt; returns false when the chosen op had no eligible slot.
inline bool mutate_weight_once(Genome& g, WeightOp op, double sigma, const MutationParams& p, Rng& rng)
{
    switch (op) {
    case WeightOp::change:
    case WeightOp::remove: {
        auto genes = g.genes();
        if (genes.empty())
            return false;
        const Gene& gene = detail::pick<Gene>(genes, rng);
        if (op == WeightOp::remove) {
            g.set_weight(gene.slot, 0.0);
        } else {
            std::normal_distribution<double> n(0.0, sigma);
            g.set_weight(gene.slot, gene.weight + n(rng));
        }
        return true;
    }
    case WeightOp::create: {
        std::vector<GeneSlot> free;
        g.for_each_permitted_slot(p.allow_recurrent, [&](const GeneSlot& s) {
            if (g.weight(s) == 0.0)
                free.push_back(s);
        });
        if (free.empty())
            return false;
        g.set_weight(detail::pick<GeneSlot>(free, rng), detail::nonzero_normal(rng, sigma));
        return true;
    }
    }
    return false;
}

/// m_r attempts, each changing, creating or deleting one connection.
inline void mutate_weights(Genome& g, double fitness, const MutationParams& p, Rng& rng)
{
    std::size_t attempts = mutation_rate(fitness, p);
    double sigma = weight_sigma(fitness, p);
    std::discrete_distribution<int> mix({p.p_change, p.p_create, p.p_delete});
    for (std::size_t k = 0; k < attempts; ++k)
        mutate_weight_once(g, static_cast<WeightOp>(mix(rng)), sigma, p, rng);
}

/// Adds `count` nodes to a random hidden layer (creating the first hidden layer
/// if none exists). Each new node gets one random incoming and one random
/// outgoing connection.
inline void mutate_add_nodes(Genome& g, std::size_t count, double sigma, const MutationParams& p, Rng& rng)
{
    if (count == 0)
        return;
    LayerId target;
    std::size_t first_new = 0;
    if (g.hidden_layer_count() == 0) {
        target = g.add_hidden_layer(count);
    } else {
        std::vector<LayerId> hidden;
        for (const Layer& l : g.layers())
            if (l.id != input_layer_id && l.id != output_layer_id)
                hidden.push_back(l.id);
        target = detail::pick<LayerId>(hidden, rng);
        first_new = g.layer(target).nodes;
        g.add_nodes(target, count);
    }
    auto ids = detail::layer_ids(g);
    std::vector<LayerId> sources, destinations;
    for (LayerId id : ids) {
        if (Genome::permitted(id, target, p.allow_recurrent))
            sources.push_back(id);
        if (Genome::permitted(target, id, p.allow_recurrent))
            destinations.push_back(id);
    }
    for (std::size_t k = first_new; k < first_new + count; ++k) {
        auto node = static_cast<std::uint32_t>(k);
        LayerId s = detail::pick<LayerId>(sources, rng);
        std::uniform_int_distribution<std::uint32_t> src_node(0, static_cast<std::uint32_t>(g.layer(s).nodes - 1));
        g.set_weight(GeneSlot{s, target, node, src_node(rng), false}, detail::nonzero_normal(rng, sigma));
        LayerId d = detail::pick<LayerId>(destinations, rng);
        std::uniform_int_distribution<std::uint32_t> dst_node(0, static_cast<std::uint32_t>(g.layer(d).nodes - 1));
        g.set_weight(GeneSlot{target, d, dst_node(rng), node, false}, detail::nonzero_normal(rng, sigma));
    }
}

/// Fills the (src, dst) matrix with nonzero N(0, sigma) weights.
inline void connect_dense(Genome& g, LayerId src, LayerId dst, double sigma, Rng& rng)
{
    auto rows = static_cast<std::uint32_t>(g.layer(dst).nodes);
    auto cols = static_cast<std::uint32_t>(g.layer(src).nodes);
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c)
            g.set_weight(GeneSlot{src, dst, r, c, false}, detail::nonzero_normal(rng, sigma));
}

/// Picks a random layer and adds a missing layer connection from it; when every
/// permitted connection already exists, appends a hidden layer of `count` nodes
/// wired from the chosen layer (the input layer if the output was chosen) to the output.
inline void mutate_add_layer(Genome& g, std::size_t count, double sigma, const MutationParams& p, Rng& rng)
{
    auto ids = detail::layer_ids(g);
    LayerId chosen = detail::pick<LayerId>(ids, rng);
    std::vector<LayerId> missing;
    for (LayerId d : ids)
        if (Genome::permitted(chosen, d, p.allow_recurrent) && !g.has_connection(chosen, d))
            missing.push_back(d);
    if (!missing.empty()) {
        connect_dense(g, chosen, detail::pick<LayerId>(missing, rng), sigma, rng);
        return;
    }
    if (count == 0)
        return;
    LayerId source = chosen == output_layer_id ? input_layer_id : chosen;
    LayerId fresh = g.add_hidden_layer(count);
    connect_dense(g, source, fresh, sigma, rng);
    connect_dense(g, fresh, output_layer_id, sigma, rng);
}

/// m_r attempts, each firing with probability P_mut as a node or a layer mutation.
inline void mutate_structure(Genome& g, double fitness, const MutationParams& p, Rng& rng)
{
    std::size_t attempts = mutation_rate(fitness, p);
    double sigma = weight_sigma(fitness, p);
    std::size_t v_mut = nodes_to_add(fitness, p);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < attempts; ++k) {
        double p_mut = structural_mutation_probability(g.connection_count(), g.full_connection_count(p.allow_recurrent), fitness, p);
        if (u(rng) >= p_mut)
            continue;
        if (u(rng) < 0.5)
            mutate_add_nodes(g, v_mut, sigma, p, rng);
        else
            mutate_add_layer(g, v_mut, sigma, p, rng);
    }
}

/// Fitness-proportionate draw of two parents without replacement.
/// A single candidate is paired with itself.
inline std::pair<const Genome*, const Genome*> select_parents(std::span<const Genome* const> candidates, Rng& rng)
{
    if (candidates.empty())
        throw std::invalid_argument("parent selection from an empty species");
    if (candidates.size() == 1)
        return {candidates[0], candidates[0]};
    std::vector<double> w;
    w.reserve(candidates.size());
    double lo = candidates[0]->fitness();
    for (const Genome* g : candidates)
        lo = std::min(lo, g->fitness());
    constexpr double eps = 1e-6;
    for (const Genome* g : candidates)
        w.push_back(lo <= 0.0 ? g->fitness() - lo + eps : g->fitness());
    std::discrete_distribution<std::size_t> first(w.begin(), w.end());
    std::size_t a = first(rng);
    w[a] = 0.0;
    std::discrete_distribution<std::size_t> second(w.begin(), w.end());
    std::size_t b = second(rng);
    return {candidates[a], candidates[b]};
}

/// Crossover on aligned genes. With q the first parent's fitness share, a
/// matching gene comes from the first parent with probability q, and each
/// parent's disjoint genes are inherited with probability equal to that
/// parent's share. Without fitness scaling every probability is 1/2.
///
/// The child keeps the fitter parent's layers and adds only what inherited
/// genes of the weaker parent need.
inline Genome crossover(const Genome& p1, const Genome& p2, Rng& rng, bool fitness_based = true)
{
    if (p1.input_count() != p2.input_count() || p1.output_count() != p2.output_count())
        throw std::invalid_argument("crossover of genomes with different arity");
    double f1 = p1.fitness(), f2 = p2.fitness();
    double q = 0.5;
    if (fitness_based && f1 + f2 > 0.0)
        q = f1 / (f1 + f2);
    bool first_fitter = f1 >= f2;
    const Genome& fitter = first_fitter ? p1 : p2;

    Alignment al = align(p1, p2);
    std::bernoulli_distribution from_first(q);
    std::bernoulli_distribution keep_second(1.0 - q);
    std::vector<Gene> inherited;
    for (const AlignedGene& g : al.genes) {
        if (g.shared()) {
            inherited.push_back({g.slot, from_first(rng) ? g.first : g.second});
        } else if (g.first != 0.0) {
            if (from_first(rng))
                inherited.push_back({g.slot, g.first});
        } else if (keep_second(rng)) {
            inherited.push_back({g.slot, g.second});
        }
    }

    Genome child(p1.input_count(), p1.output_count(), p1.input_layer().activation);
    for (const AlignedLayer& l : al.layers) {
        if (l.id == input_layer_id || l.id == output_layer_id)
            continue;
        std::size_t nodes = first_fitter ? l.nodes_first : l.nodes_second;
        Activation act = (fitter.find_layer(l.id) ? fitter : (first_fitter ? p2 : p1)).layer(l.id).activation;
        for (const Gene& g : inherited) {
            if (g.slot.destination == l.id)
                nodes = std::max<std::size_t>(nodes, g.slot.dst_node + 1);
            if (!g.slot.bias && g.slot.source == l.id)
                nodes = std::max<std::size_t>(nodes, g.slot.src_node + 1);
        }
        if (nodes > 0)
            child.add_layer(l.id, nodes, act);
    }
    for (const Gene& g : inherited)
        child.set_weight(g.slot, g.weight);
    return child;
}

struct ReproductionParams {
    MutationParams mutation;
    double p_cross = 0.7;
    std::size_t inputs = 1;
    std::size_t outputs = 1;
    WeightRange init_range;
};

/// One offspring: parent selection, crossover with probability p_cross (else
/// a clone of the fitter parent), then weight and structural mutation driven
/// by the fitter parent's fitness.
inline Genome reproduce_one(std::span<const Genome* const> parents, const ReproductionParams& p, Rng& rng)
{
    auto [a, b] = select_parents(parents, rng);
    const Genome& fitter = a->fitness() >= b->fitness() ? *a : *b;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Genome child = (a != b && u(rng) < p.p_cross) ? crossover(*a, *b, rng, p.mutation.fitness_based) : fitter;
    double hint = fitter.fitness();
    child.set_fitness(0.0);
    child.set_fitness_hint(hint);
    mutate_weights(child, hint, p.mutation, rng);
    mutate_structure(child, hint, p.mutation, rng);
    return child;
}

struct BreedingPool {
    SpeciesId species = 0;
    std::vector<const Genome*> parents;
    std::size_t offspring = 0;
};

/// Offspring for every pool followed by `fresh` minimal genomes. Each child
/// draws from its own stream keyed by (seed, generation, child id), so the
/// result does not depend on how the work is scheduled.
inline std::vector<Genome> reproduce(std::span<const BreedingPool> pools, std::size_t fresh, const ReproductionParams& p,
                                     std::uint64_t seed, std::size_t generation, GenomeId& next_id)
{
    std::vector<Genome> out;
    for (const BreedingPool& pool : pools) {
        for (std::size_t k = 0; k < pool.offspring; ++k) {
            GenomeId id = next_id++;
            Rng rng = make_rng(seed, {stream::reproduce, generation, id});
            Genome child = reproduce_one(pool.parents, p, rng);
            child.set_id(id);
            out.push_back(std::move(child));
        }
    }
    for (std::size_t k = 0; k < fresh; ++k) {
        GenomeId id = next_id++;
        Rng rng = make_rng(seed, {stream::fresh, generation, id});
        Genome g = Genome::minimal(p.inputs, p.outputs, rng, p.init_range);
        g.set_id(id);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace alf
