#pragma once

// Generational loop: evaluate, share fitness, delete species, cull, resize,
// allocate, reproduce, speciate. Every random draw comes from a stream keyed
// by (seed, purpose, generation, genome id), so results do not depend on the
// worker count and a checkpoint only has to store counters.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "alf/config.hpp"
#include "alf/environments.hpp"
#include "alf/genome.hpp"
#include "alf/network.hpp"
#include "alf/operators.hpp"
#include "alf/population.hpp"
#include "alf/rng.hpp"
#include "alf/speciation.hpp"

namespace alf {

struct GenerationStats {
    std::size_t gen = 0;
    std::size_t pop_size = 0;
    std::size_t species_count = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t E_best = 0;
    std::size_t H_best = 0;
    std::size_t deleted_species = 0;
    std::size_t culled = 0;

    // Reproduction accounting of this generation (zero when no offspring were bred).
    std::size_t survivors = 0;
    std::size_t offspring = 0;
    std::size_t fresh = 0;
    std::size_t target_size = 0;
    bool shrink = false;

    nlohmann::json to_json() const
    {
        return {{"gen", gen},
                {"pop_size", pop_size},
                {"species_count", species_count},
                {"best_fitness", best_fitness},
                {"mean_fitness", mean_fitness},
                {"E_best", E_best},
                {"H_best", H_best},
                {"deleted_species", deleted_species},
                {"culled", culled}};
    }

    nlohmann::json to_checkpoint_json() const
    {
        auto j = to_json();
        j["survivors"] = survivors;
        j["offspring"] = offspring;
        j["fresh"] = fresh;
        j["target_size"] = target_size;
        j["shrink"] = shrink;
        return j;
    }

    static GenerationStats from_json(const nlohmann::json& j)
    {
        GenerationStats s;
        s.gen = j.at("gen");
        s.pop_size = j.at("pop_size");
        s.species_count = j.at("species_count");
        s.best_fitness = j.at("best_fitness");
        s.mean_fitness = j.at("mean_fitness");
        s.E_best = j.at("E_best");
        s.H_best = j.at("H_best");
        s.deleted_species = j.at("deleted_species");
        s.culled = j.at("culled");
        s.survivors = j.value("survivors", std::size_t{0});
        s.offspring = j.value("offspring", std::size_t{0});
        s.fresh = j.value("fresh", std::size_t{0});
        s.target_size = j.value("target_size", std::size_t{0});
        s.shrink = j.value("shrink", false);
        return s;
    }
};

struct RunReport {
    bool solved = false;
    bool timed_out = false;
    std::size_t generations = 0;
    double wall_seconds = 0.0;
    double best_fitness = 0.0;
    double fitness_threshold = 0.0;
    std::size_t E = 0;
    std::size_t H = 0;
    std::uint64_t seed = 0;
    std::string environment;
    Components components;
    Genome champion{1, 1};
    std::vector<GenerationStats> trail;

    nlohmann::json to_json() const
    {
        return {{"solved", solved},
                {"timed_out", timed_out},
                {"generations", generations},
                {"wall_seconds", wall_seconds},
                {"best_fitness", best_fitness},
                {"f_t", fitness_threshold},
                {"E", E},
                {"H", H},
                {"seed", seed},
                {"environment", environment},
                {"symbiosis", symbiosis_name(components)}};
    }

    void write_stats(std::ostream& out) const
    {
        for (const auto& s : trail)
            out << s.to_json().dump() << '\n';
    }
};

inline constexpr int checkpoint_version = 1;

class Evolution {
public:
    explicit Evolution(EvolutionConfig config) : config_(std::move(config)), samples_(256)
    {
        config_.validate();
        setup();
        pop_.p_init = config_.p_init;
        pop_.p_max = config_.p_max;
        for (std::size_t k = 0; k < config_.p_init; ++k) {
            GenomeId id = pop_.next_genome_id++;
            Rng rng = make_rng(config_.seed, {stream::init, id});
            Genome g = Genome::minimal(env_->input_arity(), env_->output_arity(), rng, repro_.init_range);
            g.set_id(id);
            pop_.individuals.push_back(std::move(g));
        }
        pop_.reindex();
        std::vector<const Genome*> fresh;
        for (const Genome& g : pop_.individuals)
            fresh.push_back(&g);
        speciate(fresh);
    }

    const EvolutionConfig& config() const noexcept { return config_; }
    const Population& population() const noexcept { return pop_; }
    const SemanticSampleBuffer& samples() const noexcept { return samples_; }
    const std::vector<GenerationStats>& trail() const noexcept { return trail_; }
    double fitness_threshold() const noexcept { return f_t_; }
    bool solved() const noexcept { return solved_; }
    bool finished() const noexcept { return solved_ || timed_out_ || pop_.generation >= config_.max_generations; }
    const Genome& champion() const noexcept { return champion_; }

    /// Raising the cap lets a resumed run continue past its original limit.
    void set_max_generations(std::size_t cap) { config_.max_generations = cap; }
    void set_workers(std::size_t workers) { config_.workers = std::max<std::size_t>(1, workers); }
    void set_timeout(double seconds) { config_.timeout_seconds = seconds; }

    /// Evaluates the pending individuals and, unless solved, breeds the next generation.
    const GenerationStats& step()
    {
        if (finished())
            throw std::logic_error("evolution already finished");
        evaluate_pending();
        advance_generation(pop_);

        GenerationStats st;
        st.gen = pop_.generation;
        st.pop_size = pop_.size();
        st.species_count = pop_.species.size();
        const Genome* best = pop_.global_best();
        champion_ = *best;
        st.best_fitness = best->fitness();
        st.E_best = best->connection_count();
        st.H_best = best->hidden_node_count();
        double sum = 0.0;
        for (const Genome& g : pop_.individuals)
            sum += g.fitness();
        st.mean_fitness = sum / static_cast<double>(pop_.size());

        if (best->fitness() >= f_t_) {
            solved_ = true;
        } else {
            record_samples(*best);
            breed(st);
        }
        trail_.push_back(st);
        return trail_.back();
    }

    RunReport run(const std::function<void(const GenerationStats&)>& observer = {})
    {
        auto start = std::chrono::steady_clock::now();
        auto elapsed = [&] { return elapsed_before_ + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
        while (!finished()) {
            const GenerationStats& st = step();
            if (observer)
                observer(st);
            if (!solved_ && elapsed() >= config_.timeout_seconds)
                timed_out_ = true;
        }
        elapsed_before_ = elapsed();
        return report();
    }

    RunReport report() const
    {
        RunReport r;
        r.solved = solved_;
        r.timed_out = timed_out_;
        r.generations = pop_.generation;
        r.wall_seconds = elapsed_before_;
        r.best_fitness = champion_.fitness();
        r.fitness_threshold = f_t_;
        r.E = champion_.connection_count();
        r.H = champion_.hidden_node_count();
        r.seed = config_.seed;
        r.environment = config_.environment;
        r.components = config_.components;
        r.champion = champion_;
        r.trail = trail_;
        return r;
    }

    nlohmann::json checkpoint_json() const
    {
        nlohmann::json individuals = nlohmann::json::array();
        for (const Genome& g : pop_.individuals)
            individuals.push_back(g.to_json());
        nlohmann::json species = nlohmann::json::array();
        for (const Species& s : pop_.species)
            species.push_back(s.to_json());
        nlohmann::json trail = nlohmann::json::array();
        for (const auto& s : trail_)
            trail.push_back(s.to_checkpoint_json());
        return {{"format", "alf-checkpoint"},
                {"version", checkpoint_version},
                {"config", config_.to_json()},
                {"rng", {{"scheme", "splitmix64/mt19937_64"}, {"seed", config_.seed}}},
                {"generation", pop_.generation},
                {"next_genome_id", pop_.next_genome_id},
                {"next_species_id", pop_.next_species_id},
                {"first_pending_id", first_pending_id_},
                {"solved", solved_},
                {"elapsed_seconds", elapsed_before_},
                {"champion", champion_.to_json()},
                {"individuals", individuals},
                {"species", species},
                {"samples", samples_.to_json()},
                {"trail", trail}};
    }

    void checkpoint(const std::filesystem::path& path) const
    {
        std::filesystem::path tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot write checkpoint " + tmp.string());
            out << checkpoint_json().dump() << '\n';
            if (!out)
                throw std::runtime_error("failed writing checkpoint " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

    static Evolution from_checkpoint(const nlohmann::json& j)
    {
        if (!j.is_object() || j.value("format", std::string{}) != "alf-checkpoint")
            throw std::runtime_error("not an alf checkpoint");
        int version = j.at("version").get<int>();
        if (version != checkpoint_version)
            throw std::runtime_error("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(checkpoint_version) + ")");
        Evolution e(RestoreTag{}, EvolutionConfig::from_json(j.at("config")));
        e.pop_.generation = j.at("generation");
        e.pop_.next_genome_id = j.at("next_genome_id");
        e.pop_.next_species_id = j.at("next_species_id");
        e.first_pending_id_ = j.at("first_pending_id");
        e.solved_ = j.at("solved");
        e.elapsed_before_ = j.at("elapsed_seconds");
        e.champion_ = Genome::from_json(j.at("champion"));
        for (const auto& g : j.at("individuals"))
            e.pop_.individuals.push_back(Genome::from_json(g));
        for (const auto& s : j.at("species"))
            e.pop_.species.push_back(Species::from_json(s));
        e.pop_.reindex();
        e.samples_ = SemanticSampleBuffer::from_json(j.at("samples"));
        for (const auto& s : j.at("trail"))
            e.trail_.push_back(GenerationStats::from_json(s));
        if (auto err = e.pop_.invariant_error())
            throw std::runtime_error("inconsistent checkpoint: " + *err);
        return e;
    }

    static Evolution resume(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot read checkpoint " + path.string());
        return from_checkpoint(nlohmann::json::parse(in));
    }

private:
    struct RestoreTag {};

    Evolution(RestoreTag, EvolutionConfig config) : config_(std::move(config)), samples_(256)
    {
        config_.validate();
        setup();
        pop_.p_init = config_.p_init;
        pop_.p_max = config_.p_max;
    }

    void setup()
    {
        env_ = make_environment(config_.environment);
        f_t_ = config_.f_t ? *config_.f_t : env_->fitness_threshold();
        samples_ = SemanticSampleBuffer(config_.sample_capacity);

        MutationParams& m = repro_.mutation;
        m.m_o = config_.m_o;
        m.m_a = config_.m_a;
        m.v_max = config_.v_max;
        m.f_t = f_t_;
        m.p_change = config_.p_change;
        m.p_create = config_.p_create;
        m.p_delete = config_.p_delete;
        m.allow_recurrent = config_.allow_recurrent;
        m.fitness_based = config_.components.fbgo;
        m.fixed_structural_probability = config_.baseline_p_mut;
        m.validate();
        repro_.p_cross = config_.p_cross;
        repro_.inputs = env_->input_arity();
        repro_.outputs = env_->output_arity();
        repro_.init_range = {-config_.init_weight_range, config_.init_weight_range};

        compat_.c1 = config_.c1;
        compat_.c2 = config_.c2;
        compat_.threshold = config_.delta_t;
        compat_.confidence = config_.confidence;
    }

    std::uint64_t episode_seed(GenomeId id) const { return derive_seed(config_.seed, {stream::episode, id}); }

    void evaluate_pending()
    {
        std::vector<Genome*> jobs;
        for (Genome& g : pop_.individuals)
            if (g.id() >= first_pending_id_)
                jobs.push_back(&g);
        std::vector<double> fitness(jobs.size(), 0.0);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            auto env = env_->clone();
            try {
                for (std::size_t k = next++; k < jobs.size(); k = next++) {
                    Network net(*jobs[k]);
                    fitness[k] = run_episode(net, *env, episode_seed(jobs[k]->id())).fitness;
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next = jobs.size();
            }
        };
        std::size_t n_workers = std::min(config_.workers, std::max<std::size_t>(1, jobs.size()));
        if (n_workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < n_workers; ++w)
                pool.emplace_back(worker);
            for (auto& t : pool)
                t.join();
        }
        if (failure)
            std::rethrow_exception(failure);
        for (std::size_t k = 0; k < jobs.size(); ++k)
            jobs[k]->set_fitness(fitness[k]);
        first_pending_id_ = pop_.next_genome_id;
    }

    /// Observations of the best individual's episode, evenly strided.
    void record_samples(const Genome& best)
    {
        Network net(best);
        auto env = env_->clone();
        auto trace = run_episode(net, *env, episode_seed(best.id()), env->max_steps()).observations;
        std::size_t take = std::min(trace.size(), config_.samples_per_generation);
        for (std::size_t k = 0; k < take; ++k)
            samples_.push(trace[k * trace.size() / take]);
    }

    void breed(GenerationStats& st)
    {
        const bool dap = config_.components.dap;
        const std::size_t p_old = pop_.size();

        auto shares = species_fitness_shares(pop_);
        DeletionParams del{config_.c3, config_.c4, config_.staleness, dap};
        auto doomed = select_species_for_deletion(pop_, shares, del);
        double s_del = static_cast<double>(doomed.size()) / static_cast<double>(pop_.species.size());
        pop_.remove_species(doomed);
        st.deleted_species = doomed.size();
        if (pop_.individuals.empty())
            throw std::logic_error("every species was deleted");
        shares = species_fitness_shares(pop_);

        std::unordered_set<GenomeId> removed;
        std::vector<BreedingPool> pools;
        std::size_t p_new = 0;
        double o_init = 0.0;
        if (dap) {
            CullPlan cull = cull_weak(pop_, shares, {0.5, config_.cull_min_fraction});
            removed.insert(cull.culled.begin(), cull.culled.end());
            st.culled = cull.culled.size();
            p_new = p_old < pop_.p_init ? pop_.p_init : next_population_size(std::min(p_old, pop_.p_max), s_del, pop_.p_init, pop_.p_max, config_.ebb);
            o_init = config_.o_init;
        } else {
            // Generational replacement: only the global best carries over.
            GenomeId elite = pop_.global_best()->id();
            for (const Genome& g : pop_.individuals)
                if (g.id() != elite)
                    removed.insert(g.id());
            p_new = pop_.p_init;
        }
        for (const Species& s : pop_.species) {
            BreedingPool pool{s.id, {}, 0};
            for (GenomeId id : s.members)
                if (!dap || !removed.contains(id))
                    pool.parents.push_back(&pop_.at(id));
            pools.push_back(std::move(pool));
        }

        std::size_t survivors = pop_.size() - removed.size();
        std::vector<SpeciesId> ids;
        for (const Species& s : pop_.species)
            ids.push_back(s.id);
        ReproductionPlan plan = allocate_offspring(ids, shares, survivors, p_new, o_init);
        for (std::size_t i = 0; i < pools.size(); ++i)
            pools[i].offspring = plan.offspring[i].offspring;

        std::vector<Genome> children = reproduce(pools, plan.fresh, repro_, config_.seed, pop_.generation, pop_.next_genome_id);

        std::erase_if(pop_.individuals, [&](const Genome& g) { return removed.contains(g.id()); });
        for (Species& s : pop_.species)
            std::erase_if(s.members, [&](GenomeId g) { return removed.contains(g); });

        std::size_t first_child = pop_.individuals.size();
        for (Genome& c : children)
            pop_.individuals.push_back(std::move(c));
        pop_.reindex();
        std::vector<const Genome*> fresh;
        for (std::size_t k = first_child; k < pop_.individuals.size(); ++k)
            fresh.push_back(&pop_.individuals[k]);
        speciate(fresh);

        st.survivors = survivors;
        st.offspring = plan.total_offspring();
        st.fresh = plan.fresh;
        st.target_size = plan.target;
        st.shrink = plan.shrink;
    }

    /// Assigns new individuals to species and drops species left without members.
    void speciate(std::span<const Genome* const> newcomers)
    {
        if (config_.components.sss) {
            Rng rng = make_rng(config_.seed, {stream::samples, pop_.generation});
            Speciator sp(compat_, samples_.snapshot(config_.semantic_samples, rng));
            for (const Genome* g : newcomers)
                sp.assign(*g, pop_.species, pop_.next_species_id);
        } else {
            for (const Genome* g : newcomers)
                pop_.species.push_back(Species{pop_.next_species_id++, *g, {g->id()}, 0, std::nullopt, 0, 0.0});
        }
        std::erase_if(pop_.species, [](const Species& s) { return s.members.empty(); });
    }

    EvolutionConfig config_;
    std::unique_ptr<Environment> env_;
    double f_t_ = 1.0;
    ReproductionParams repro_;
    CompatibilityParams compat_;
    Population pop_;
    SemanticSampleBuffer samples_;
    std::vector<GenerationStats> trail_;
    Genome champion_{1, 1};
    GenomeId first_pending_id_ = 1;
    bool solved_ = false;
    bool timed_out_ = false;
    double elapsed_before_ = 0.0;
};

inline RunReport run(const EvolutionConfig& config, const std::function<void(const GenerationStats&)>& observer = {})
{
    Evolution e(config);
    return e.run(observer);
}

struct AblationRow {
    Components components;
    std::vector<RunReport> runs;

    std::size_t solved() const
    {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunReport& r) { return r.solved; }));
    }

    /// Mean of `f` over solved runs; NaN when none solved.
    template <class F>
    double solved_mean(F f) const
    {
        double sum = 0.0;
        std::size_t n = 0;
        for (const RunReport& r : runs)
            if (r.solved) {
                sum += f(r);
                ++n;
            }
        return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
};

/// Every symbiosis runs over the same seed list (config.seed, config.seed + 1, ...).
inline std::vector<AblationRow> ablation(const EvolutionConfig& base, std::span<const Components> symbioses, std::size_t runs,
                                         const std::function<void(const AblationRow&, const RunReport&)>& observer = {})
{
    base.validate();
    std::vector<AblationRow> rows;
    for (const Components& c : symbioses) {
        AblationRow row{c, {}};
        for (std::size_t k = 0; k < runs; ++k) {
            EvolutionConfig cfg = base;
            cfg.components = c;
            cfg.seed = base.seed + k;
            row.runs.push_back(run(cfg));
            if (observer)
                observer(row, row.runs.back());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_ablation_csv(std::span<const AblationRow> rows, std::ostream& out)
{
    auto num = [](double v) {
        if (std::isnan(v))
            return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    out << "symbiosis,t_min,G,E,H\n";
    for (const AblationRow& row : rows) {
        out << symbiosis_name(row.components) << ',' << num(row.solved_mean([](const RunReport& r) { return r.wall_seconds / 60.0; }))
            << ',' << num(row.solved_mean([](const RunReport& r) { return static_cast<double>(r.generations); })) << ','
            << num(row.solved_mean([](const RunReport& r) { return static_cast<double>(r.E); })) << ','
            << num(row.solved_mean([](const RunReport& r) { return static_cast<double>(r.H); })) << '\n';
    }
}

/// Solved counts per row; the CSV averages cover solved runs only.
inline nlohmann::json ablation_metadata(std::span<const AblationRow> rows)
{
    nlohmann::json j;
    j["averaging"] = "means over solved runs only; unsolved runs are counted below";
    j["rows"] = nlohmann::json::array();
    for (const AblationRow& row : rows) {
        nlohmann::json seeds = nlohmann::json::array();
        for (const RunReport& r : row.runs)
            seeds.push_back({{"seed", r.seed}, {"solved", r.solved}, {"generations", r.generations}, {"timed_out", r.timed_out}});
        j["rows"].push_back({{"symbiosis", symbiosis_name(row.components)}, {"runs", row.runs.size()}, {"solved", row.solved()}, {"seeds", seeds}});
    }
    return j;
}

}  // namespace alf
