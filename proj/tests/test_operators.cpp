#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "alf/operators.hpp"
#include "fixtures.hpp"

using namespace alf;
using alf::fixtures::edge;
using alf::fixtures::hidden2;

namespace {

MutationParams table_defaults(double f_t = 1.0)
{
    MutationParams p;
    p.m_o = 0.1;
    p.m_a = 5;
    p.v_max = 5;
    p.f_t = f_t;
    return p;
}

Genome random_genome(Rng& rng, bool rec = false, std::size_t inputs = 2)
{
    MutationParams p = table_defaults();
    p.allow_recurrent = rec;
    Genome g = Genome::minimal(inputs, 1, rng);
    std::uniform_real_distribution<double> f(0.0, 1.0);
    for (int k = 0; k < 5; ++k) {
        mutate_weights(g, f(rng), p, rng);
        mutate_structure(g, f(rng), p, rng);
    }
    return g;
}

}  // namespace

TEST(MutationRate, TableValues)
{
    auto p = table_defaults(3.9);
    EXPECT_EQ(mutation_rate(0.0, p), 5u);
    EXPECT_EQ(mutation_rate(3.9, p), 1u);
    EXPECT_EQ(mutation_rate(0.9 * 3.9, p), 1u);
    EXPECT_EQ(mutation_rate(0.5 * 3.9, p), 3u);  // (1.1 - 0.5) * 5 = 3
    EXPECT_EQ(mutation_rate(10.0, p), 1u);
    p.f_t = 0.0;
    EXPECT_THROW(mutation_rate(1.0, p), std::invalid_argument);
}

TEST(MutationRate, BoundedAndMonotone)
{
    auto p = table_defaults(2.0);
    std::size_t prev = p.m_a;
    for (double f = 0.0; f <= 4.0; f += 0.01) {
        std::size_t m = mutation_rate(f, p);
        EXPECT_GE(m, 1u);
        EXPECT_LE(m, p.m_a);
        EXPECT_LE(m, prev);
        prev = m;
    }
}

TEST(StructuralProbability, TableValues)
{
    auto p = table_defaults(1.0);
    EXPECT_NEAR(structural_mutation_probability(10, 10, 1.0, p), 0.1, 1e-12);
    EXPECT_NEAR(structural_mutation_probability(0, 10, 0.0, p), 1.0, 1e-12);
    EXPECT_NEAR(structural_mutation_probability(5, 10, 0.5, p), 0.6, 1e-12);
    EXPECT_EQ(structural_mutation_probability(10, 10, 100.0, p), 0.0);
}

TEST(StructuralProbability, BoundedAndMonotone)
{
    auto p = table_defaults(1.0);
    for (std::size_t e = 0; e <= 20; ++e)
        for (double f = 0.0; f <= 1.5; f += 0.05) {
            double v = structural_mutation_probability(e, 20, f, p);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            if (e < 20) {
                EXPECT_GE(v, structural_mutation_probability(e + 1, 20, f, p));
            }
            EXPECT_GE(v, structural_mutation_probability(e, 20, f + 0.05, p));
        }
}

TEST(NodesToAdd, TableValues)
{
    EXPECT_EQ(nodes_to_add(0.0, 1.0, 5), 5u);
    EXPECT_EQ(nodes_to_add(0.5, 1.0, 5), 3u);
    EXPECT_EQ(nodes_to_add(1.0, 1.0, 5), 0u);
    EXPECT_EQ(nodes_to_add(2.0, 1.0, 5), 0u);
    for (double f = 0.0; f <= 1.2; f += 0.01) {
        EXPECT_LE(nodes_to_add(f, 1.0, 5), 5u);
        // ceil(V_max - F/f_t * V_max) by an independent integer search.
        double target = 5.0 - f * 5.0;
        std::size_t want = 0;
        while (static_cast<double>(want) < target - 1e-12)
            ++want;
        EXPECT_EQ(nodes_to_add(f, 1.0, 5), std::min<std::size_t>(want, 5)) << f;
    }
}

TEST(WeightSigma, FitnessScaledWithFloor)
{
    auto p = table_defaults(2.0);
    EXPECT_DOUBLE_EQ(weight_sigma(0.0, p), 1.25);
    EXPECT_DOUBLE_EQ(weight_sigma(2.0, p), 0.25);
    EXPECT_DOUBLE_EQ(weight_sigma(2.5, p), 0.01);
    EXPECT_DOUBLE_EQ(weight_sigma(10.0, p), 0.01);
}

TEST(BaselineOperators, FixedConstants)
{
    auto p = table_defaults(1.0);
    p.fitness_based = false;
    for (double f : {0.0, 0.5, 1.0, 3.0}) {
        EXPECT_EQ(mutation_rate(f, p), 3u);
        EXPECT_EQ(weight_sigma(f, p), 1.0);
        EXPECT_EQ(structural_mutation_probability(3, 10, f, p), 0.5);
        EXPECT_EQ(nodes_to_add(f, p), 3u);
    }
}

TEST(WeightMutation, DeleteLastConnection)
{
    Genome g(1, 1);
    g.set_weight(edge(input_layer_id, output_layer_id, 0, 0), 0.5);
    Rng rng(1);
    EXPECT_TRUE(mutate_weight_once(g, WeightOp::remove, 1.0, table_defaults(), rng));
    EXPECT_EQ(g.connection_count(), 0u);
    EXPECT_FALSE(mutate_weight_once(g, WeightOp::remove, 1.0, table_defaults(), rng));
    EXPECT_FALSE(mutate_weight_once(g, WeightOp::change, 1.0, table_defaults(), rng));
    Network net(g);
    EXPECT_EQ(net.activate({1.0})[0], 0.0);
}

TEST(WeightMutation, CreateOnlyIntoPermittedSlots)
{
    Rng rng(2);
    auto p = table_defaults();
    for (int trial = 0; trial < 300; ++trial) {
        Genome g(2, 1);
        g.add_layer(hidden2, 2);
        for (int k = 0; k < 8; ++k)
            mutate_weight_once(g, WeightOp::create, 1.0, p, rng);
        for (const Gene& gene : g.genes()) {
            EXPECT_NE(gene.slot.destination, input_layer_id);
            EXPECT_LT(gene.slot.source, gene.slot.destination);
        }
        EXPECT_FALSE(g.validation_error());
    }
}

TEST(WeightMutation, CreateFailsWhenFull)
{
    Genome g(1, 1);
    g.set_weight(edge(input_layer_id, output_layer_id, 0, 0), 1.0);
    g.set_weight(GeneSlot::bias_of(output_layer_id, 0), 1.0);
    Rng rng(3);
    EXPECT_FALSE(mutate_weight_once(g, WeightOp::create, 1.0, table_defaults(), rng));
}

TEST(WeightMutation, ChangeKeepsStructure)
{
    Rng rng(4);
    Genome g = Genome::minimal(3, 2, rng);
    Genome before = g;
    mutate_weight_once(g, WeightOp::change, 0.5, table_defaults(), rng);
    EXPECT_EQ(align(g, before).shared_connections(), before.connection_count());
    EXPECT_FALSE(g == before);
}

TEST(StructuralMutation, NodeMutationOnMinimalGenome)
{
    Rng rng(5);
    Genome g = Genome::minimal(2, 1, rng);
    std::size_t e = g.connection_count();
    mutate_add_nodes(g, 3, 1.0, table_defaults(), rng);
    EXPECT_EQ(g.hidden_layer_count(), 1u);
    EXPECT_EQ(g.hidden_node_count(), 3u);
    EXPECT_EQ(g.connection_count(), e + 6);  // one in-edge and one out-edge per node
    EXPECT_FALSE(g.validation_error());
    Network net(g);
    EXPECT_EQ(net.hidden_count(), 3u);
}

TEST(StructuralMutation, LayerMutationAppendsWhenSaturated)
{
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        Genome g(2, 1);
        g.add_layer(hidden2, 1);
        for (LayerId s : {input_layer_id, hidden2})
            for (LayerId d : {hidden2, output_layer_id})
                if (s < d)
                    g.set_weight(edge(s, d, 0, 0), 1.0);
        mutate_add_layer(g, 2, 1.0, table_defaults(), rng);
        ASSERT_EQ(g.hidden_layer_count(), 2u);
        EXPECT_EQ(g.layers()[2].id, LayerId{3});
        EXPECT_EQ(g.layers()[2].nodes, 2u);
        EXPECT_TRUE(g.has_connection(LayerId{3}, output_layer_id));
        EXPECT_FALSE(g.validation_error());
    }
}

TEST(StructuralMutation, LayerMutationFillsMissingConnection)
{
    // Only input -> output is missing. Choosing the input layer fills it
    // densely; choosing the hidden or output layer appends a new layer.
    Genome base(2, 1);
    base.add_layer(hidden2, 1);
    base.set_weight(edge(input_layer_id, hidden2, 0, 0), 1.0);
    base.set_weight(edge(hidden2, output_layer_id, 0, 0), 1.0);
    int filled = 0;
    const int n = 600;
    for (int trial = 0; trial < n; ++trial) {
        Genome g = base;
        Rng rng(static_cast<std::uint64_t>(trial));
        mutate_add_layer(g, 1, 1.0, table_defaults(), rng);
        if (g.has_connection(input_layer_id, output_layer_id)) {
            ++filled;
            EXPECT_EQ(g.hidden_layer_count(), 1u);
            EXPECT_EQ(g.connection_count(), base.connection_count() + 2);
        } else {
            EXPECT_EQ(g.hidden_layer_count(), 2u);
        }
    }
    EXPECT_NEAR(filled, n / 3.0, 3 * std::sqrt(n * (1.0 / 3) * (2.0 / 3)));
}

TEST(StructuralMutation, NeverDuplicatesLayerConnections)
{
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        Genome g = random_genome(rng, trial % 2 == 0);
        for (const Layer& l : g.layers())
            for (std::size_t k = 1; k < l.outgoing.size(); ++k)
                EXPECT_LT(l.outgoing[k - 1].destination, l.outgoing[k].destination);
        EXPECT_FALSE(g.validation_error());
        if (trial % 2 == 1) {
            EXPECT_TRUE(g.is_feed_forward());
        }
    }
}

TEST(Mutation, SeededReproducibility)
{
    Rng seed_rng(9);
    Genome base = random_genome(seed_rng);
    auto p = table_defaults();
    Genome a = base, b = base;
    Rng ra(123), rb(123);
    mutate_weights(a, 0.3, p, ra);
    mutate_structure(a, 0.3, p, ra);
    mutate_weights(b, 0.3, p, rb);
    mutate_structure(b, 0.3, p, rb);
    EXPECT_EQ(a.serialize(), b.serialize());
}

TEST(SelectParents, FitnessProportionateFirstDraw)
{
    Genome a(1, 1), b(1, 1);
    a.set_fitness(1.0);
    b.set_fitness(3.0);
    std::vector<const Genome*> c{&a, &b};
    Rng rng(10);
    const int n = 20000;
    int first_b = 0;
    for (int k = 0; k < n; ++k) {
        auto [x, y] = select_parents(c, rng);
        EXPECT_NE(x, y);
        first_b += x == &b;
    }
    double sd = std::sqrt(n * 0.75 * 0.25);
    EXPECT_NEAR(first_b, 0.75 * n, 3 * sd);
}

TEST(SelectParents, SingleMemberAndUniform)
{
    Genome a(1, 1);
    std::vector<const Genome*> one{&a};
    Rng rng(11);
    auto [x, y] = select_parents(one, rng);
    EXPECT_EQ(x, &a);
    EXPECT_EQ(y, &a);

    std::vector<Genome> same(4, Genome(1, 1));
    std::vector<const Genome*> c;
    for (auto& g : same) {
        g.set_fitness(2.0);
        c.push_back(&g);
    }
    std::map<const Genome*, int> count;
    const int n = 20000;
    for (int k = 0; k < n; ++k)
        ++count[select_parents(c, rng).first];
    double sd = std::sqrt(n * 0.25 * 0.75);
    for (auto& [g, k] : count)
        EXPECT_NEAR(k, n / 4.0, 3 * sd);
    EXPECT_THROW(select_parents(std::vector<const Genome*>{}, rng), std::invalid_argument);
}

TEST(Crossover, ModalOutcomeOfWorkedExample)
{
    Genome p1 = fixtures::crossover_parent1(), p2 = fixtures::crossover_parent2();
    Genome expected = fixtures::crossover_expected_modal_child();
    std::map<std::string, int> outcomes;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        Rng rng = make_rng(trial, {});
        Genome child = crossover(p1, p2, rng);
        ++outcomes[child.serialize()];
    }
    auto modal = std::max_element(outcomes.begin(), outcomes.end(), [](auto& a, auto& b) { return a.second < b.second; });
    EXPECT_EQ(modal->first, expected.serialize());
    // All disjoint genes of the fitter parent kept, i1 -> h2 dropped, h2 -> o1 from parent 1.
    EXPECT_GT(modal->second, 900);
}

TEST(Crossover, SelfCrossoverIsIdentity)
{
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        Genome g = random_genome(rng, trial % 2 == 0);
        g.set_fitness(static_cast<double>(trial % 3));
        Genome child = crossover(g, g, rng);
        EXPECT_EQ(child, g);
    }
}

TEST(Crossover, EqualFitnessMatchingGenesAreFair)
{
    Rng init(13);
    Genome a = Genome::minimal(100, 100, init), b = Genome::minimal(100, 100, init);
    a.set_fitness(1.0);
    b.set_fitness(1.0);
    Rng rng(14);
    Genome child = crossover(a, b, rng);
    int from_a = 0;
    for (const Gene& g : child.genes())
        from_a += g.weight == a.weight(g.slot);
    const double n = 10000;
    EXPECT_EQ(child.connection_count(), 10000u);
    EXPECT_NEAR(from_a, n / 2, 3 * std::sqrt(n / 4));
}

TEST(Crossover, ClosureAndProvenance)
{
    Rng rng(15);
    std::uniform_real_distribution<double> f(0.0, 4.0);
    for (int trial = 0; trial < 500; ++trial) {
        Genome a = random_genome(rng, trial % 2 == 0), b = random_genome(rng, trial % 2 == 0);
        a.set_fitness(f(rng));
        b.set_fitness(f(rng));
        Genome child = crossover(a, b, rng, trial % 3 != 0);
        ASSERT_FALSE(child.validation_error()) << *child.validation_error();
        Genome copy = Genome::deserialize(child.serialize());
        EXPECT_EQ(copy.serialize(), child.serialize());
        for (const Gene& g : child.genes()) {
            bool from_a = a.contains(g.slot) && a.weight(g.slot) == g.weight;
            bool from_b = b.contains(g.slot) && b.weight(g.slot) == g.weight;
            EXPECT_TRUE(from_a || from_b);
        }
    }
}

TEST(Crossover, ArityMismatchThrows)
{
    Genome a(2, 1), b(3, 1);
    Rng rng(16);
    EXPECT_THROW(crossover(a, b, rng), std::invalid_argument);
}

TEST(Reproduce, RespectsPlanTotalsAndIds)
{
    Rng rng(17);
    std::vector<Genome> members;
    for (GenomeId id = 1; id <= 6; ++id) {
        Genome g = random_genome(rng);
        g.set_id(id);
        g.set_fitness(static_cast<double>(id) / 6.0);
        members.push_back(std::move(g));
    }
    std::vector<BreedingPool> pools(3);
    pools[0] = {1, {&members[0], &members[1]}, 4};
    pools[1] = {2, {&members[2]}, 0};
    pools[2] = {3, {&members[3], &members[4], &members[5]}, 7};
    ReproductionParams p;
    p.inputs = 2;
    p.outputs = 1;
    GenomeId next = 100;
    auto kids = reproduce(pools, 3, p, 42, 5, next);
    ASSERT_EQ(kids.size(), 14u);
    EXPECT_EQ(next, 114u);
    for (std::size_t k = 0; k < kids.size(); ++k) {
        EXPECT_EQ(kids[k].id(), 100 + k);
        EXPECT_EQ(kids[k].fitness(), 0.0);
        EXPECT_FALSE(kids[k].validation_error());
    }
    for (std::size_t k = 11; k < 14; ++k)
        EXPECT_EQ(kids[k].connection_count(), 2u);  // fresh minimal genomes

    GenomeId again = 100;
    auto twins = reproduce(pools, 3, p, 42, 5, again);
    for (std::size_t k = 0; k < kids.size(); ++k)
        EXPECT_EQ(kids[k].serialize(), twins[k].serialize());
}

TEST(Reproduce, HintIsFitterParentFitness)
{
    Genome a(1, 1), b(1, 1);
    a.set_weight(edge(input_layer_id, output_layer_id, 0, 0), 1.0);
    b.set_weight(edge(input_layer_id, output_layer_id, 0, 0), -1.0);
    a.set_fitness(0.2);
    b.set_fitness(0.9);
    std::vector<const Genome*> parents{&a, &b};
    ReproductionParams p;
    Rng rng(18);
    Genome child = reproduce_one(parents, p, rng);
    EXPECT_EQ(child.fitness_hint(), 0.9);
}
