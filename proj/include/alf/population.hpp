#pragma once

// Dynamic population adaptation: fitness sharing across species, deletion of
// weak old or stale species, culling of each species' weakest members,
// population growth or ebb, and fitness-proportional offspring allocation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "alf/genome.hpp"
#include "alf/speciation.hpp"

namespace alf {

struct Population {
    std::vector<Genome> individuals;
    std::vector<Species> species;  // ascending id
    std::size_t generation = 0;
    std::size_t p_init = 150;
    std::size_t p_max = 300;
    GenomeId next_genome_id = 1;
    SpeciesId next_species_id = 1;

    std::size_t size() const noexcept { return individuals.size(); }

    const Genome* find(GenomeId id) const
    {
        auto it = index_.find(id);
        if (it != index_.end() && it->second < individuals.size() && individuals[it->second].id() == id)
            return &individuals[it->second];
        for (const Genome& g : individuals)
            if (g.id() == id)
                return &g;
        return nullptr;
    }

    const Genome& at(GenomeId id) const
    {
        const Genome* g = find(id);
        if (!g)
            throw std::out_of_range("no individual with id " + std::to_string(id));
        return *g;
    }

    /// Fittest individual; ties go to the lowest id.
    const Genome* global_best() const
    {
        const Genome* best = nullptr;
        for (const Genome& g : individuals)
            if (!best || g.fitness() > best->fitness() || (g.fitness() == best->fitness() && g.id() < best->id()))
                best = &g;
        return best;
    }

    std::size_t oldest_age() const noexcept
    {
        std::size_t a = 0;
        for (const Species& s : species)
            a = std::max(a, s.age);
        return a;
    }

    const Species* species_of(GenomeId id) const
    {
        for (const Species& s : species)
            if (s.contains(id))
                return &s;
        return nullptr;
    }

    void reindex()
    {
        index_.clear();
        for (std::size_t i = 0; i < individuals.size(); ++i)
            index_[individuals[i].id()] = i;
    }

    /// Removes individuals and their species memberships; drops emptied species.
    void remove_individuals(const std::unordered_set<GenomeId>& ids)
    {
        if (ids.empty())
            return;
        std::erase_if(individuals, [&](const Genome& g) { return ids.contains(g.id()); });
        for (Species& s : species)
            std::erase_if(s.members, [&](GenomeId g) { return ids.contains(g); });
        std::erase_if(species, [](const Species& s) { return s.members.empty(); });
        reindex();
    }

    /// Removes whole species with all their members; returns the number of individuals removed.
    std::size_t remove_species(std::span<const SpeciesId> ids)
    {
        std::unordered_set<GenomeId> doomed;
        for (const Species& s : species)
            if (std::find(ids.begin(), ids.end(), s.id) != ids.end())
                doomed.insert(s.members.begin(), s.members.end());
        std::erase_if(species, [&](const Species& s) { return std::find(ids.begin(), ids.end(), s.id) != ids.end(); });
        std::erase_if(individuals, [&](const Genome& g) { return doomed.contains(g.id()); });
        reindex();
        return doomed.size();
    }

    /// Empty when species membership and size bounds are consistent.
    std::optional<std::string> invariant_error() const
    {
        std::unordered_map<GenomeId, int> seen;
        std::size_t total = 0;
        for (const Species& s : species) {
            total += s.members.size();
            for (GenomeId g : s.members) {
                if (!find(g))
                    return "species " + std::to_string(s.id) + " lists unknown individual " + std::to_string(g);
                if (++seen[g] > 1)
                    return "individual " + std::to_string(g) + " belongs to more than one species";
            }
        }
        if (total != individuals.size())
            return "species membership does not cover the population";
        for (std::size_t k = 1; k < species.size(); ++k)
            if (!(species[k - 1].id < species[k].id))
                return "species not sorted by id";
        return std::nullopt;
    }

private:
    std::unordered_map<GenomeId, std::size_t> index_;
};

inline std::vector<double> member_fitness(const Population& pop, const Species& s)
{
    std::vector<double> f;
    f.reserve(s.members.size());
    for (GenomeId id : s.members)
        f.push_back(pop.at(id).fitness());
    return f;
}

/// F_si = f_si / sum_j f_sj with f_si the mean member fitness; uniform when every f_si is 0.
inline std::vector<double> species_fitness_shares(const Population& pop)
{
    if (pop.individuals.empty() || pop.species.empty())
        throw std::logic_error("fitness shares of an empty population");
    std::vector<double> mean;
    for (const Species& s : pop.species) {
        if (s.members.empty())
            throw std::logic_error("species without members");
        auto f = member_fitness(pop, s);
        mean.push_back(std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size()));
    }
    double total = std::accumulate(mean.begin(), mean.end(), 0.0);
    std::vector<double> shares(mean.size(), 1.0 / static_cast<double>(mean.size()));
    if (total > 0.0)
        for (std::size_t i = 0; i < mean.size(); ++i)
            shares[i] = mean[i] / total;
    return shares;
}

struct DeletionParams {
    double c3 = 0.4;
    double c4 = 0.5;
    std::size_t staleness_limit = 15;
    bool fitness_age_rule = true;  // off: only staleness deletes
};

/// Species to delete: weak and old, or stale. The species holding the global best is exempt.
inline std::vector<SpeciesId> select_species_for_deletion(const Population& pop, std::span<const double> shares, const DeletionParams& p)
{
    if (shares.size() != pop.species.size())
        throw std::invalid_argument("one share per species expected");
    const Genome* best = pop.global_best();
    double n = static_cast<double>(pop.species.size());
    double oldest = static_cast<double>(pop.oldest_age());
    std::vector<SpeciesId> marked;
    for (std::size_t i = 0; i < pop.species.size(); ++i) {
        const Species& s = pop.species[i];
        if (best && s.contains(best->id()))
            continue;
        bool weak_and_old = p.fitness_age_rule && shares[i] < p.c3 / n && static_cast<double>(s.age) > oldest * p.c4;
        bool stale = s.staleness >= p.staleness_limit;
        if (weak_and_old || stale)
            marked.push_back(s.id);
    }
    return marked;
}

/// Population size for the next generation: grow with the deleted-species
/// proportion, otherwise ebb towards the initial size.
inline std::size_t next_population_size(std::size_t p_old, double s_del, std::size_t p_init, std::size_t p_max, double ebb)
{
    if (p_init > p_max || p_old < p_init || p_old > p_max)
        throw std::invalid_argument("population size out of bounds");
    if (s_del < 0.0 || s_del > 1.0)
        throw std::invalid_argument("deleted species proportion must lie in [0, 1]");
    double po = static_cast<double>(p_old);
    if (s_del > 0.0)
        return std::min(p_max, static_cast<std::size_t>(std::llround(po * (1.0 + s_del))));
    long shrunk = std::lround(po - static_cast<double>(p_init) * ebb);
    return std::max<std::size_t>(static_cast<std::size_t>(std::max(0L, shrunk)), p_init);
}

/// Largest-remainder apportionment of `total` over non-negative weights;
/// remainder ties go to the lower index.
inline std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total)
{
    std::vector<std::size_t> out(weights.size(), 0);
    if (weights.empty() || total == 0)
        return out;
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> quota(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i)
        quota[i] = sum > 0.0 ? weights[i] / sum * static_cast<double>(total) : static_cast<double>(total) / static_cast<double>(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < quota.size(); ++i) {
        out[i] = static_cast<std::size_t>(std::floor(quota[i]));
        assigned += out[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]); });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        ++out[order[k]];
        ++assigned;
    }
    while (assigned > total) {  // floating-point overshoot guard
        auto it = std::max_element(out.begin(), out.end());
        --*it;
        --assigned;
    }
    return out;
}

/// Members ranked fittest first; ties go to the lower id.
inline std::vector<GenomeId> ranked_members(const Population& pop, const Species& s)
{
    std::vector<GenomeId> m = s.members;
    std::sort(m.begin(), m.end(), [&](GenomeId a, GenomeId b) {
        double fa = pop.at(a).fitness(), fb = pop.at(b).fitness();
        return fa != fb ? fa > fb : a < b;
    });
    return m;
}

struct CullParams {
    double max_fraction = 0.5;
    /// Cull fraction of the species with the largest share.
    double min_fraction = 0.4;
};

struct CullPlan {
    std::vector<GenomeId> culled;
    std::vector<std::size_t> per_species;  // aligned with pop.species
};

/// Per species the weakest floor(|s| * fraction) members are culled, where the
/// fraction falls linearly from max_fraction (zero share) to min_fraction (largest
/// share). A species' best member is never culled and the total never exceeds
/// max_fraction of the population.
inline CullPlan cull_weak(const Population& pop, std::span<const double> shares, const CullParams& p = {})
{
    if (shares.size() != pop.species.size())
        throw std::invalid_argument("one share per species expected");
    if (p.min_fraction < 0.0 || p.min_fraction > p.max_fraction || p.max_fraction > 0.5)
        throw std::invalid_argument("cull fractions must satisfy 0 <= min <= max <= 0.5");
    CullPlan plan;
    if (pop.species.empty())
        return plan;
    double f_max = *std::max_element(shares.begin(), shares.end());
    std::vector<double> requested(pop.species.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < pop.species.size(); ++i) {
        double rel = f_max > 0.0 ? shares[i] / f_max : 1.0;
        double fraction = p.max_fraction - (p.max_fraction - p.min_fraction) * rel;
        std::size_t size = pop.species[i].members.size();
        std::size_t n = static_cast<std::size_t>(std::floor(static_cast<double>(size) * fraction + 1e-12));
        n = std::min(n, size - 1);
        requested[i] = static_cast<double>(n);
        total += n;
    }
    std::size_t cap = static_cast<std::size_t>(std::floor(p.max_fraction * static_cast<double>(pop.size())));
    std::vector<std::size_t> counts(requested.size());
    if (total > cap) {
        counts = apportion(requested, cap);
        for (std::size_t i = 0; i < counts.size(); ++i)
            counts[i] = std::min(counts[i], static_cast<std::size_t>(requested[i]));
    } else {
        for (std::size_t i = 0; i < counts.size(); ++i)
            counts[i] = static_cast<std::size_t>(requested[i]);
    }
    for (std::size_t i = 0; i < pop.species.size(); ++i) {
        auto ranked = ranked_members(pop, pop.species[i]);
        for (std::size_t k = 0; k < counts[i]; ++k)
            plan.culled.push_back(ranked[ranked.size() - 1 - k]);
    }
    plan.per_species = std::move(counts);
    return plan;
}

struct ReproductionPlan {
    struct Allotment {
        SpeciesId species;
        std::size_t offspring;
    };
    std::vector<Allotment> offspring;
    std::size_t fresh = 0;
    std::size_t survivors = 0;
    std::size_t target = 0;  // requested new population size
    bool shrink = false;     // survivors already exceed the target

    std::size_t total_offspring() const noexcept
    {
        std::size_t t = 0;
        for (const auto& a : offspring)
            t += a.offspring;
        return t;
    }
    std::size_t resulting_size() const noexcept { return survivors + total_offspring() + fresh; }
};

/// Splits the vacant room P_new - survivors into per-species offspring
/// (share * (1 - o_init) of it, largest remainder) and fresh minimal genomes.
inline ReproductionPlan allocate_offspring(std::span<const SpeciesId> species, std::span<const double> shares, std::size_t survivors,
                                           std::size_t p_new, double o_init)
{
    if (species.size() != shares.size())
        throw std::invalid_argument("one share per species expected");
    if (o_init < 0.0 || o_init > 1.0)
        throw std::invalid_argument("o_init must lie in [0, 1]");
    ReproductionPlan plan;
    plan.survivors = survivors;
    plan.target = p_new;
    if (survivors > p_new) {
        plan.shrink = true;
        for (SpeciesId s : species)
            plan.offspring.push_back({s, 0});
        return plan;
    }
    std::size_t slots = p_new - survivors;
    std::size_t bred = species.empty() ? 0 : static_cast<std::size_t>(std::llround((1.0 - o_init) * static_cast<double>(slots)));
    bred = std::min(bred, slots);
    auto counts = apportion(shares, bred);
    for (std::size_t i = 0; i < species.size(); ++i)
        plan.offspring.push_back({species[i], counts[i]});
    plan.fresh = slots - bred;
    return plan;
}

/// Generation boundary after evaluation: ages advance, mascots become each
/// species' fittest member, staleness counters and averages are refreshed.
inline void advance_generation(Population& pop)
{
    for (Species& s : pop.species) {
        ++s.age;
        if (s.members.empty())
            continue;
        auto ranked = ranked_members(pop, s);
        const Genome& best = pop.at(ranked.front());
        s.mascot = best;
        double sum = 0.0;
        for (GenomeId id : s.members)
            sum += pop.at(id).fitness();
        s.average_fitness = sum / static_cast<double>(s.members.size());
        if (!s.best_fitness_ever || best.fitness() > *s.best_fitness_ever) {
            s.best_fitness_ever = best.fitness();
            s.staleness = 0;
        } else {
            ++s.staleness;
        }
    }
    ++pop.generation;
}

}  // namespace alf
