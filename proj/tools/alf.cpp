// alf: run, ablate, replay and validate-config front end for the engine.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad config, 3 genome and
// environment arity mismatch. CLI usage errors use CLI11's codes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "alf/alf.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_bad_config = 2;
constexpr int exit_arity = 3;

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("alf");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* level = std::getenv("ALF_LOG");
    std::string l = level ? level : "info";
    if (l == "debug")
        spdlog::set_level(spdlog::level::debug);
    else if (l == "error")
        spdlog::set_level(spdlog::level::err);
    else
        spdlog::set_level(spdlog::level::info);
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> components;
};

alf::EvolutionConfig load_config(const std::string& path, const Overrides& o)
{
    alf::EvolutionConfig c = alf::EvolutionConfig::load(path);
    if (o.seed)
        c.seed = *o.seed;
    if (o.workers)
        c.workers = *o.workers;
    if (o.components)
        c.components = alf::parse_components(*o.components);
    c.validate();
    return c;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

int run_command(const std::string& config_path, const Overrides& o, const fs::path& out_dir, const std::string& checkpoint,
                const std::string& resume)
{
    alf::EvolutionConfig cfg;
    try {
        cfg = load_config(config_path, o);
    } catch (const alf::ConfigError& e) {
        spdlog::error("{}", e.what());
        return exit_bad_config;
    }
    fs::create_directories(out_dir);
    std::optional<alf::Evolution> evo;
    if (!resume.empty()) {
        evo.emplace(alf::Evolution::resume(resume));
        evo->set_max_generations(cfg.max_generations);
        evo->set_workers(cfg.workers);
        evo->set_timeout(cfg.timeout_seconds);
    } else {
        evo.emplace(cfg);
    }
    spdlog::info("{} on {} seed {} ({})", alf::symbiosis_name(evo->config().components), evo->config().environment, evo->config().seed,
                 config_path);

    std::ofstream stats(out_dir / "stats.jsonl", std::ios::binary | std::ios::trunc);
    if (!stats)
        throw std::runtime_error("cannot write " + (out_dir / "stats.jsonl").string());
    for (const auto& s : evo->trail())
        stats << s.to_json().dump() << '\n';
    alf::RunReport report;
    try {
        report = evo->run([&](const alf::GenerationStats& s) {
            stats << s.to_json().dump() << '\n';
            spdlog::debug("gen {} size {} species {} best {:.6f}", s.gen, s.pop_size, s.species_count, s.best_fitness);
            if (!checkpoint.empty())
                evo->checkpoint(checkpoint);
        });
    } catch (...) {
        stats.flush();
        throw;
    }
    stats.close();
    write_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
    write_file(out_dir / "champion.json", report.champion.to_json().dump(2) + "\n");
    spdlog::info("{} after {} generations, best fitness {:.6f}, E {} H {}", report.solved ? "solved" : "not solved", report.generations,
                 report.best_fitness, report.E, report.H);
    return 0;
}

/// Every subset of the listed components, in ablation table order.
std::vector<alf::Components> symbioses_of(const std::optional<std::string>& list)
{
    if (!list)
        return alf::all_symbioses();
    alf::Components allowed = alf::parse_components(*list);
    std::vector<alf::Components> out;
    for (const alf::Components& c : alf::all_symbioses())
        if ((!c.sss || allowed.sss) && (!c.dap || allowed.dap) && (!c.fbgo || allowed.fbgo))
            out.push_back(c);
    return out;
}

int ablate_command(const std::string& config_path, Overrides o, const fs::path& out_dir, std::size_t runs)
{
    alf::EvolutionConfig cfg;
    std::vector<alf::Components> rows;
    try {
        rows = symbioses_of(o.components);
        o.components.reset();
        cfg = load_config(config_path, o);
    } catch (const alf::ConfigError& e) {
        spdlog::error("{}", e.what());
        return exit_bad_config;
    }
    fs::create_directories(out_dir);
    auto table = alf::ablation(cfg, rows, runs, [](const alf::AblationRow& row, const alf::RunReport& r) {
        spdlog::info("{} seed {}: {} in {} generations", alf::symbiosis_name(row.components), r.seed, r.solved ? "solved" : "unsolved",
                     r.generations);
    });
    std::ostringstream csv;
    alf::write_ablation_csv(table, csv);
    write_file(out_dir / "ablation.csv", csv.str());
    write_file(out_dir / "ablation.meta.json", alf::ablation_metadata(table).dump(2) + "\n");
    std::cout << csv.str();
    return 0;
}

int replay_command(const std::string& champion_path, const std::string& env_name, std::uint64_t seed)
{
    std::ifstream in(champion_path);
    if (!in) {
        spdlog::error("cannot read champion {}", champion_path);
        return 1;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    alf::Genome g = alf::Genome::deserialize(text);
    std::unique_ptr<alf::Environment> env;
    try {
        env = alf::make_environment(env_name);
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}", e.what());
        return exit_bad_config;
    }
    if (g.input_count() != env->input_arity() || g.output_count() != env->output_arity()) {
        spdlog::error("champion has {} inputs and {} outputs but {} expects {} and {}", g.input_count(), g.output_count(), env->name(),
                      env->input_arity(), env->output_arity());
        return exit_arity;
    }
    alf::Network net(g);
    std::size_t tick = 0;
    auto result = alf::run_episode(net, *env, alf::derive_seed(seed, {alf::stream::episode, g.id()}), 0,
                                   [&](std::span<const double> obs, std::span<const double> act) {
                                       nlohmann::json line{{"step", tick++},
                                                           {"observation", std::vector<double>(obs.begin(), obs.end())},
                                                           {"action", std::vector<double>(act.begin(), act.end())}};
                                       std::cout << line.dump() << '\n';
                                   });
    std::cout << nlohmann::json{{"fitness", result.fitness}, {"steps", result.steps}, {"f_t", env->fitness_threshold()}}.dump() << '\n';
    return 0;
}

int validate_command(const std::string& config_path)
{
    try {
        alf::EvolutionConfig c = alf::EvolutionConfig::load(config_path);
        c.validate();
        std::cout << config_path << ": ok\n";
        return 0;
    } catch (const alf::ConfigError& e) {
        std::cerr << config_path << ": " << e.what() << '\n';
        return exit_bad_config;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    setup_logging();
    CLI::App app{"Neuroevolution of topology and weights"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", checkpoint, resume, champion, env_name;
    std::uint64_t seed = 0;
    std::size_t workers = 1, runs = 10;
    std::string components;

    auto* run = app.add_subcommand("run", "evolve until solved or a cap is hit");
    run->add_option("--config", config_path, "config JSON")->required();
    auto* run_seed = run->add_option("--seed", seed, "master seed override");
    auto* run_workers = run->add_option("--workers", workers, "evaluation threads")->check(CLI::PositiveNumber);
    auto* run_components = run->add_option("--components", components, "enabled components, e.g. sss,dap,fbgo or none");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--checkpoint", checkpoint, "rewrite this checkpoint after every generation");
    run->add_option("--resume", resume, "continue from a checkpoint");

    auto* ablate = app.add_subcommand("ablate", "compare component symbioses over a shared seed list");
    ablate->add_option("--config", config_path, "config JSON")->required();
    auto* ab_seed = ablate->add_option("--seed", seed, "first seed");
    auto* ab_workers = ablate->add_option("--workers", workers, "evaluation threads")->check(CLI::PositiveNumber);
    auto* ab_components = ablate->add_option("--components", components, "components whose subsets form the rows");
    ablate->add_option("--runs", runs, "seeds per symbiosis")->check(CLI::PositiveNumber);
    ablate->add_option("--out", out_dir, "output directory");

    auto* replay = app.add_subcommand("replay", "re-evaluate a champion and print its step trace");
    replay->add_option("--champion", champion, "champion genome JSON")->required();
    replay->add_option("--env", env_name, "environment name: xor | pole | parity:<n>")->required();
    replay->add_option("--seed", seed, "episode seed");

    auto* validate = app.add_subcommand("validate-config", "check a config file");
    validate->add_option("--config", config_path, "config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    auto overrides = [&](CLI::Option* s, CLI::Option* w, CLI::Option* c) {
        Overrides o;
        if (s->count())
            o.seed = seed;
        if (w->count())
            o.workers = workers;
        if (c->count())
            o.components = components;
        return o;
    };

    try {
        if (run->parsed())
            return run_command(config_path, overrides(run_seed, run_workers, run_components), out_dir, checkpoint, resume);
        if (ablate->parsed())
            return ablate_command(config_path, overrides(ab_seed, ab_workers, ab_components), out_dir, runs);
        if (replay->parsed())
            return replay_command(champion, env_name, seed);
        if (validate->parsed())
            return validate_command(config_path);
    } catch (const alf::ConfigError& e) {
        spdlog::error("{}", e.what());
        return exit_bad_config;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 1;
}
