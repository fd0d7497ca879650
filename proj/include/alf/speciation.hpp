#pragma once

// Speciation by structural and semantic similarity.
//
// Structural similarity T aligns two genomes by layer id and node index (the
// canonical encoding makes this alignment unambiguous) and compares which
// connection slots are expressed. Semantic similarity B correlates the two
// networks' predictions on a shared set of observed inputs, keeping only
// significant positive correlation. Both are blended into the compatibility
// delta used to assign offspring to species.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "alf/genome.hpp"
#include "alf/network.hpp"
#include "alf/rng.hpp"
#include "alf/statistics.hpp"

namespace alf {

using SpeciesId = std::uint64_t;
using Sample = std::vector<double>;

struct AlignedLayer {
    LayerId id;
    std::size_t nodes_first = 0;  // 0 when the layer is missing in that genome
    std::size_t nodes_second = 0;

    std::size_t nodes() const noexcept { return std::max(nodes_first, nodes_second); }
    bool in_first() const noexcept { return nodes_first > 0; }
    bool in_second() const noexcept { return nodes_second > 0; }
};

/// A gene slot of the aligned structure with both genomes' weights (0.0 = absent).
struct AlignedGene {
    GeneSlot slot;
    double first = 0.0;
    double second = 0.0;

    bool shared() const noexcept { return first != 0.0 && second != 0.0; }
};

struct Alignment {
    std::vector<AlignedLayer> layers;
    std::vector<AlignedGene> genes;  // union of expressed slots, canonical order

    std::size_t shared_connections() const noexcept
    {
        return static_cast<std::size_t>(std::count_if(genes.begin(), genes.end(), [](const AlignedGene& g) { return g.shared(); }));
    }
    std::size_t max_connections() const noexcept { return genes.size(); }
};

/// Layer alignment by id with node union by index; no weights are invented.
inline Alignment align(const Genome& a, const Genome& b)
{
    Alignment out;
    const auto& la = a.layers();
    const auto& lb = b.layers();
    std::size_t i = 0, j = 0;
    while (i < la.size() || j < lb.size()) {
        if (j == lb.size() || (i < la.size() && la[i].id < lb[j].id)) {
            out.layers.push_back({la[i].id, la[i].nodes, 0});
            ++i;
        } else if (i == la.size() || lb[j].id < la[i].id) {
            out.layers.push_back({lb[j].id, 0, lb[j].nodes});
            ++j;
        } else {
            out.layers.push_back({la[i].id, la[i].nodes, lb[j].nodes});
            ++i;
            ++j;
        }
    }

    std::vector<Gene> ga = a.genes();
    std::vector<Gene> gb = b.genes();
    out.genes.reserve(ga.size() + gb.size());
    i = j = 0;
    while (i < ga.size() || j < gb.size()) {
        if (j == gb.size() || (i < ga.size() && ga[i].slot < gb[j].slot)) {
            out.genes.push_back({ga[i].slot, ga[i].weight, 0.0});
            ++i;
        } else if (i == ga.size() || gb[j].slot < ga[i].slot) {
            out.genes.push_back({gb[j].slot, 0.0, gb[j].weight});
            ++j;
        } else {
            out.genes.push_back({ga[i].slot, ga[i].weight, gb[j].weight});
            ++i;
            ++j;
        }
    }
    return out;
}

/// T = E_shared / E_max, where E_max is the union of expressed slots.
/// Two genomes without any expressed connection count as identical.
inline double structural_similarity(const Alignment& al)
{
    if (al.max_connections() == 0)
        return 1.0;
    return static_cast<double>(al.shared_connections()) / static_cast<double>(al.max_connections());
}

inline double structural_similarity(const Genome& a, const Genome& b) { return structural_similarity(align(a, b)); }

/// Ring buffer of observed network inputs used for semantic comparison.
class SemanticSampleBuffer {
public:
    static constexpr std::size_t min_capacity = 30;

    explicit SemanticSampleBuffer(std::size_t capacity = 256) : capacity_(capacity)
    {
        if (capacity < min_capacity)
            throw std::invalid_argument("semantic sample buffer needs a capacity of at least 30");
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return samples_.size(); }
    const std::deque<Sample>& samples() const noexcept { return samples_; }

    void push(std::span<const double> observation)
    {
        if (samples_.size() == capacity_)
            samples_.pop_front();
        samples_.emplace_back(observation.begin(), observation.end());
    }

    /// Uniform subsample without replacement, kept in buffer order.
    std::vector<Sample> snapshot(std::size_t count, Rng& rng) const
    {
        if (samples_.size() <= count)
            return {samples_.begin(), samples_.end()};
        std::vector<std::size_t> idx(samples_.size());
        for (std::size_t k = 0; k < idx.size(); ++k)
            idx[k] = k;
        // Partial Fisher-Yates.
        for (std::size_t k = 0; k < count; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
            std::swap(idx[k], idx[pick(rng)]);
        }
        idx.resize(count);
        std::sort(idx.begin(), idx.end());
        std::vector<Sample> out;
        out.reserve(count);
        for (std::size_t k : idx)
            out.push_back(samples_[k]);
        return out;
    }

    nlohmann::json to_json() const { return {{"capacity", capacity_}, {"samples", std::vector<Sample>(samples_.begin(), samples_.end())}}; }

    static SemanticSampleBuffer from_json(const nlohmann::json& j)
    {
        SemanticSampleBuffer buf(j.at("capacity").get<std::size_t>());
        for (const auto& s : j.at("samples"))
            buf.push(s.get<Sample>());
        return buf;
    }

private:
    std::size_t capacity_;
    std::deque<Sample> samples_;
};

/// Output stream of a network over the samples, concatenated sample-major.
/// State is reset before every sample, so each prediction depends on its sample only.
inline std::vector<double> predictions(const Genome& g, std::span<const Sample> samples)
{
    Network net(g);
    std::vector<double> out;
    out.reserve(samples.size() * g.output_count());
    for (const Sample& s : samples) {
        net.reset();
        auto y = net.activate(s);
        out.insert(out.end(), y.begin(), y.end());
    }
    return out;
}

struct SemanticComparison {
    double similarity = 0.0;
    std::optional<double> rho;  // empty when undefined (zero variance)
    bool significant = false;
};

inline constexpr std::size_t min_semantic_samples = 30;

/// B = max(0, rho) when rho is significantly positive, else 0.
inline SemanticComparison semantic_similarity(std::span<const double> x, std::span<const double> y, std::size_t sample_count,
                                              double confidence = 0.8)
{
    SemanticComparison out;
    if (sample_count < min_semantic_samples)
        return out;
    out.rho = stats::pearson(x, y);
    if (!out.rho)
        return out;
    out.significant = stats::positively_correlated(*out.rho, x.size(), confidence);
    if (out.significant)
        out.similarity = std::max(0.0, *out.rho);
    return out;
}

inline double semantic_similarity(const Genome& a, const Genome& b, std::span<const Sample> samples, double confidence = 0.8)
{
    auto x = predictions(a, samples);
    auto y = predictions(b, samples);
    return semantic_similarity(x, y, samples.size(), confidence).similarity;
}

/// delta = (T c1 + B c2) / (c1 + c2)
inline double compatibility(double structural, double semantic, double c1, double c2)
{
    if (c1 < 0.0 || c2 < 0.0 || !(c1 + c2 > 0.0))
        throw std::invalid_argument("compatibility coefficients must be non-negative with a positive sum");
    return (structural * c1 + semantic * c2) / (c1 + c2);
}

struct CompatibilityParams {
    double c1 = 0.25;
    double c2 = 0.75;
    double threshold = 0.3;
    double confidence = 0.8;
};

struct Species {
    SpeciesId id = 0;
    Genome mascot;
    std::vector<GenomeId> members;
    std::size_t age = 0;
    std::optional<double> best_fitness_ever;
    std::size_t staleness = 0;
    double average_fitness = 0.0;

    bool contains(GenomeId g) const { return std::find(members.begin(), members.end(), g) != members.end(); }

    nlohmann::json to_json() const
    {
        nlohmann::json best = best_fitness_ever ? nlohmann::json(*best_fitness_ever) : nlohmann::json(nullptr);
        return {{"id", id},     {"mascot", mascot.to_json()}, {"members", members},
                {"age", age},   {"best_fitness_ever", best},  {"staleness", staleness},
                {"average_fitness", average_fitness}};
    }

    static Species from_json(const nlohmann::json& j)
    {
        Species s{j.at("id").get<SpeciesId>(), Genome::from_json(j.at("mascot")), j.at("members").get<std::vector<GenomeId>>(),
                  j.at("age").get<std::size_t>(), std::nullopt, j.at("staleness").get<std::size_t>(), j.at("average_fitness").get<double>()};
        if (!j.at("best_fitness_ever").is_null())
            s.best_fitness_ever = j.at("best_fitness_ever").get<double>();
        return s;
    }
};

/// Assigns offspring to species against a frozen sample snapshot.
/// Mascot prediction streams are computed once and cached.
class Speciator {
public:
    Speciator(CompatibilityParams params, std::vector<Sample> samples) : params_(params), samples_(std::move(samples))
    {
        if (!(params_.threshold > 0.0 && params_.threshold <= 1.0))
            throw std::invalid_argument("compatibility threshold must lie in (0, 1]");
        compatibility(0.0, 0.0, params_.c1, params_.c2);  // validates coefficients
    }

    /// With too few samples the semantic term is dropped and delta equals T.
    bool semantic_enabled() const noexcept { return samples_.size() >= min_semantic_samples; }
    std::span<const Sample> samples() const noexcept { return samples_; }

    double delta(const Genome& a, const Genome& b) const
    {
        double t = structural_similarity(a, b);
        if (!semantic_enabled())
            return t;
        auto x = predictions(a, samples_);
        auto y = predictions(b, samples_);
        return compatibility(t, semantic_similarity(x, y, samples_.size(), params_.confidence).similarity, params_.c1, params_.c2);
    }

    /// Joins the most compatible species with delta >= threshold (lowest id on ties),
    /// otherwise founds a new species with the offspring as mascot.
    SpeciesId assign(const Genome& offspring, std::vector<Species>& species, SpeciesId& next_species_id)
    {
        std::vector<double> stream;
        if (semantic_enabled())
            stream = predictions(offspring, samples_);
        Species* best = nullptr;
        double best_delta = -1.0;
        for (Species& s : species) {
            double t = structural_similarity(offspring, s.mascot);
            double d = t;
            if (semantic_enabled()) {
                const auto& ms = mascot_stream(s);
                d = compatibility(t, semantic_similarity(stream, ms, samples_.size(), params_.confidence).similarity, params_.c1, params_.c2);
            }
            if (d >= params_.threshold && (d > best_delta || (d == best_delta && best && s.id < best->id))) {
                best = &s;
                best_delta = d;
            }
        }
        if (best) {
            best->members.push_back(offspring.id());
            return best->id;
        }
        Species fresh{next_species_id++, offspring, {offspring.id()}, 0, std::nullopt, 0, 0.0};
        species.push_back(std::move(fresh));
        if (semantic_enabled())
            cache_[species.back().id] = std::move(stream);
        return species.back().id;
    }

    /// Call when a species' mascot changes.
    void invalidate(SpeciesId id) { cache_.erase(id); }

private:
    const std::vector<double>& mascot_stream(const Species& s)
    {
        auto it = cache_.find(s.id);
        if (it == cache_.end())
            it = cache_.emplace(s.id, predictions(s.mascot, samples_)).first;
        return it->second;
    }

    CompatibilityParams params_;
    std::vector<Sample> samples_;
    std::map<SpeciesId, std::vector<double>> cache_;
};

inline SpeciesId assign_species(const Genome& offspring, std::vector<Species>& species, const CompatibilityParams& params,
                                std::vector<Sample> samples, SpeciesId& next_species_id)
{
    Speciator sp(params, std::move(samples));
    return sp.assign(offspring, species, next_species_id);
}

}  // namespace alf
