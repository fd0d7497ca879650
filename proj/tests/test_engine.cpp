#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "alf/engine.hpp"

using namespace alf;

namespace {

// Small and unsolvable (XOR fitness never exceeds 4), so runs hit the generation cap.
EvolutionConfig small_config(std::uint64_t seed = 3)
{
    EvolutionConfig c;
    c.p_init = 30;
    c.p_max = 60;
    c.f_t = 100.0;
    c.seed = seed;
    c.max_generations = 12;
    return c;
}

std::string trail_text(const std::vector<GenerationStats>& trail)
{
    std::string s;
    for (const auto& st : trail)
        s += st.to_checkpoint_json().dump() + "\n";
    return s;
}

std::string population_text(const Population& pop)
{
    std::string s;
    for (const Genome& g : pop.individuals)
        s += g.serialize() + "\n";
    return s;
}

}  // namespace

TEST(Engine, StopsAtGenerationCap)
{
    auto r = run(small_config());
    EXPECT_FALSE(r.solved);
    EXPECT_FALSE(r.timed_out);
    EXPECT_EQ(r.generations, 12u);
    ASSERT_EQ(r.trail.size(), 12u);
    for (std::size_t k = 0; k < r.trail.size(); ++k)
        EXPECT_EQ(r.trail[k].gen, k + 1);
    EXPECT_EQ(r.best_fitness, r.trail.back().best_fitness);
    EXPECT_EQ(r.E, r.champion.connection_count());
}

TEST(Engine, BestFitnessNeverDecreases)
{
    for (Components c : all_symbioses()) {
        SCOPED_TRACE(symbiosis_name(c));
        auto cfg = small_config();
        cfg.components = c;
        auto r = run(cfg);
        for (std::size_t k = 1; k < r.trail.size(); ++k)
            EXPECT_GE(r.trail[k].best_fitness, r.trail[k - 1].best_fitness);
    }
}

TEST(Engine, PopulationSizeWithinBounds)
{
    auto cfg = small_config();
    auto r = run(cfg);
    for (const auto& st : r.trail) {
        EXPECT_GE(st.pop_size, cfg.p_init);
        EXPECT_LE(st.pop_size, cfg.p_max);
        EXPECT_LE(2 * st.culled, st.pop_size);
        if (!st.shrink) {
            EXPECT_EQ(st.survivors + st.offspring + st.fresh, st.target_size);
        }
    }
    cfg.components.dap = false;
    for (const auto& st : run(cfg).trail) {
        EXPECT_EQ(st.pop_size, cfg.p_init);
        EXPECT_EQ(st.deleted_species, 0u);
        EXPECT_EQ(st.survivors, 1u);
        EXPECT_EQ(st.fresh, 0u);
    }
}

TEST(Engine, WithoutSpeciationEveryIndividualIsItsOwnSpecies)
{
    auto cfg = small_config();
    cfg.components.sss = false;
    Evolution e(cfg);
    while (!e.finished()) {
        const auto& st = e.step();
        EXPECT_EQ(st.species_count, st.pop_size);
        EXPECT_FALSE(e.population().invariant_error());
    }
}

TEST(Engine, SpeciationGroupsIndividuals)
{
    Evolution e(small_config());
    EXPECT_LT(e.population().species.size(), e.population().size());
    e.step();
    EXPECT_FALSE(e.population().invariant_error());
    EXPECT_GT(e.samples().size(), 0u);
}

TEST(Engine, SolvesXor)
{
    EvolutionConfig cfg;
    cfg.seed = 1;
    auto r = run(cfg);
    ASSERT_TRUE(r.solved);
    EXPECT_GE(r.best_fitness, 3.9);
    EXPECT_GE(r.H, 1u);
    Network net(r.champion);
    XorEnvironment env;
    EXPECT_EQ(run_episode(net, env, 0).fitness, r.best_fitness);
}

TEST(Engine, SameSeedSameRun)
{
    auto a = run(small_config(5)), b = run(small_config(5)), c = run(small_config(6));
    EXPECT_EQ(trail_text(a.trail), trail_text(b.trail));
    EXPECT_EQ(a.champion.serialize(), b.champion.serialize());
    EXPECT_NE(trail_text(a.trail), trail_text(c.trail));
}

TEST(Engine, WorkerCountDoesNotChangeResults)
{
    auto cfg = small_config(7);
    cfg.environment = "pole";
    cfg.max_generations = 4;
    cfg.f_t = 2000.0;
    auto one = run(cfg);
    cfg.workers = 8;
    auto eight = run(cfg);
    EXPECT_EQ(trail_text(one.trail), trail_text(eight.trail));
    EXPECT_EQ(one.champion.serialize(), eight.champion.serialize());
}

TEST(Engine, CheckpointResumeMatchesUninterruptedRun)
{
    auto cfg = small_config(9);
    cfg.max_generations = 20;
    Evolution straight(cfg);
    straight.run();

    cfg.max_generations = 10;
    Evolution first(cfg);
    first.run();
    auto path = std::filesystem::temp_directory_path() / "alf_engine_checkpoint.json";
    first.checkpoint(path);
    Evolution resumed = Evolution::resume(path);
    std::filesystem::remove(path);
    EXPECT_EQ(population_text(resumed.population()), population_text(first.population()));
    resumed.set_max_generations(20);
    resumed.run();

    EXPECT_EQ(trail_text(resumed.trail()), trail_text(straight.trail()));
    EXPECT_EQ(resumed.champion().serialize(), straight.champion().serialize());
    EXPECT_EQ(population_text(resumed.population()), population_text(straight.population()));
    EXPECT_EQ(resumed.checkpoint_json()["samples"], straight.checkpoint_json()["samples"]);
}

TEST(Engine, CheckpointErrors)
{
    Evolution e(small_config());
    auto j = e.checkpoint_json();
    j["version"] = checkpoint_version + 1;
    EXPECT_THROW(Evolution::from_checkpoint(j), std::runtime_error);
    EXPECT_THROW(Evolution::from_checkpoint(nlohmann::json{{"format", "other"}}), std::runtime_error);
    EXPECT_THROW(Evolution::resume("/nonexistent/alf.ckpt"), std::runtime_error);
}

TEST(Engine, FinishedRunRefusesToStep)
{
    auto cfg = small_config();
    cfg.max_generations = 1;
    Evolution e(cfg);
    e.run();
    EXPECT_TRUE(e.finished());
    EXPECT_THROW(e.step(), std::logic_error);
}

TEST(Engine, TimeoutEndsRun)
{
    auto cfg = small_config();
    cfg.max_generations = 100000;
    cfg.timeout_seconds = 1e-9;
    auto r = run(cfg);
    EXPECT_TRUE(r.timed_out);
    EXPECT_FALSE(r.solved);
    EXPECT_EQ(r.generations, 1u);
}

TEST(Engine, StatsLinesCarryRequiredFields)
{
    auto r = run(small_config());
    std::ostringstream out;
    r.write_stats(out);
    std::istringstream in(out.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        for (const char* key : {"gen", "pop_size", "species_count", "best_fitness", "mean_fitness", "E_best", "H_best", "deleted_species", "culled"})
            EXPECT_TRUE(j.contains(key)) << key;
        ++n;
    }
    EXPECT_EQ(n, r.generations);
}

TEST(Ablation, OneRowPerSymbiosis)
{
    auto cfg = small_config();
    cfg.max_generations = 2;
    auto sets = all_symbioses();
    auto rows = ablation(cfg, sets, 2);
    ASSERT_EQ(rows.size(), 8u);
    for (const auto& row : rows) {
        ASSERT_EQ(row.runs.size(), 2u);
        EXPECT_EQ(row.runs[0].seed, cfg.seed);
        EXPECT_EQ(row.runs[1].seed, cfg.seed + 1);
    }
    std::ostringstream csv;
    write_ablation_csv(rows, csv);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "symbiosis,t_min,G,E,H");
    std::size_t n = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
        ++n;
    }
    EXPECT_EQ(n, 8u);
    auto meta = ablation_metadata(rows);
    EXPECT_EQ(meta["rows"].size(), 8u);
}
