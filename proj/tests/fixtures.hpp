#pragma once

// Hand-built genomes shared by the unit tests and the acceptance gate.

#include <cstdint>
#include <vector>

#include "alf/genome.hpp"
#include "alf/rng.hpp"

namespace alf::fixtures {

inline constexpr LayerId hidden2{2};
inline constexpr LayerId hidden3{3};

inline GeneSlot edge(LayerId src, LayerId dst, std::uint32_t dst_node, std::uint32_t src_node)
{
    return GeneSlot{src, dst, dst_node, src_node, false};
}

/// 2-3-1 network: input to hidden with a bias column, input to output and
/// hidden to output. Entry a_22 of the input to hidden matrix (bias column
/// counted as column 1) is zero, so input node 1 does not feed hidden node 2.
inline Genome encoding_example()
{
    Genome g(2, 1);
    g.add_layer(hidden2, 3);
    const double ih[3][3] = {{0.1, 0.2, 0.3}, {0.4, 0.0, 0.6}, {0.7, 0.8, 0.9}};
    for (std::uint32_t i = 0; i < 3; ++i) {
        g.set_weight(GeneSlot::bias_of(hidden2, i), ih[i][0]);
        for (std::uint32_t j = 0; j < 2; ++j)
            g.set_weight(edge(input_layer_id, hidden2, i, j), ih[i][j + 1]);
    }
    g.set_weight(edge(input_layer_id, output_layer_id, 0, 0), -0.5);
    g.set_weight(edge(input_layer_id, output_layer_id, 0, 1), 0.25);
    g.set_weight(edge(hidden2, output_layer_id, 0, 0), 1.5);
    g.set_weight(edge(hidden2, output_layer_id, 0, 1), -1.0);
    g.set_weight(edge(hidden2, output_layer_id, 0, 2), 0.75);
    return g;
}

/// Structural comparison pair. N1 has hidden layers 2 (h1) and 3 (h2) wired
/// i1 -> h1 -> h2 -> o1; N2 has hidden layer 3 only, wired i1 -> h2 -> o1.
/// After alignment only h2 -> o1 is shared out of four occupied slots.
inline Genome comparison_n1()
{
    Genome g(1, 1);
    g.add_layer(hidden2, 1);
    g.add_layer(hidden3, 1);
    g.set_weight(edge(input_layer_id, hidden2, 0, 0), 0.5);
    g.set_weight(edge(hidden2, hidden3, 0, 0), -0.7);
    g.set_weight(edge(hidden3, output_layer_id, 0, 0), 1.1);
    return g;
}

inline Genome comparison_n2()
{
    Genome g(1, 1);
    g.add_layer(hidden3, 1);
    g.set_weight(edge(input_layer_id, hidden3, 0, 0), 0.9);
    g.set_weight(edge(hidden3, output_layer_id, 0, 0), -0.3);
    return g;
}

/// Crossover pair. Parent 1 (fitness 99): i1 -> h1, i2 -> h2, h1 -> o1, h2 -> o1.
/// Parent 2 (fitness 1): i1 -> h2, h2 -> o1.
inline Genome crossover_parent1()
{
    Genome g(2, 1);
    g.add_layer(hidden2, 2);
    g.set_weight(edge(input_layer_id, hidden2, 0, 0), 0.3);
    g.set_weight(edge(input_layer_id, hidden2, 1, 1), -0.4);
    g.set_weight(edge(hidden2, output_layer_id, 0, 0), 0.8);
    g.set_weight(edge(hidden2, output_layer_id, 0, 1), 0.6);
    g.set_fitness(99.0);
    g.set_id(1);
    return g;
}

inline Genome crossover_parent2()
{
    Genome g(2, 1);
    g.add_layer(hidden2, 2);
    g.set_weight(edge(input_layer_id, hidden2, 1, 0), 1.2);
    g.set_weight(edge(hidden2, output_layer_id, 0, 1), -0.9);
    g.set_fitness(1.0);
    g.set_id(2);
    return g;
}

/// Parent 1's genes, with the matching h2 -> o1 gene carrying parent 1's weight.
inline Genome crossover_expected_modal_child()
{
    Genome g = crossover_parent1();
    g.set_fitness(0.0);
    g.set_id(0);
    return g;
}

/// Recurrent parity machine over +/-1 input bits. The parity node p holds +1
/// after an odd number of +1 bits and -1 (or the reset value 0) otherwise,
/// through a one-tick loop back into hidden layer 2. There a detects a +1 bit
/// on even parity and b a -1 bit on odd parity; p is their OR.
inline Genome parity_machine()
{
    Genome g(1, 1);
    g.add_layer(hidden2, 2);  // a, b
    g.add_layer(hidden3, 1);  // p
    constexpr double k = 10.0;
    // a = [x - p - 0.5 > 0]
    g.set_weight(edge(input_layer_id, hidden2, 0, 0), k);
    g.set_weight(edge(hidden3, hidden2, 0, 0), -k);
    g.set_weight(GeneSlot::bias_of(hidden2, 0), -0.5 * k);
    // b = [-x + p - 1.5 > 0]
    g.set_weight(edge(input_layer_id, hidden2, 1, 0), -k);
    g.set_weight(edge(hidden3, hidden2, 1, 0), k);
    g.set_weight(GeneSlot::bias_of(hidden2, 1), -1.5 * k);
    // p = [a + b + 1 > 0], with a and b in {-1, +1}
    g.set_weight(edge(hidden2, hidden3, 0, 0), k);
    g.set_weight(edge(hidden2, hidden3, 0, 1), k);
    g.set_weight(GeneSlot::bias_of(hidden3, 0), k);
    g.set_weight(edge(hidden3, output_layer_id, 0, 0), k);
    return g;
}

}  // namespace alf::fixtures
