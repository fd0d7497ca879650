#pragma once

// Phenotype: a genome decoded into a flat node array plus a sparse edge list
// grouped by destination layer. Layers are evaluated in ascending id order.
// Forward edges read the current tick's source value; recurrent edges
// (destination id <= source id) read the value stored at the previous tick.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "alf/genome.hpp"

namespace alf {

/// Squashes into [-1, 1]; slope 4.9 at the origin.
inline double modified_sigmoid(double v) noexcept { return 2.0 / (1.0 + std::exp(-4.9 * v)) - 1.0; }

inline double activate_fn(Activation a, double v) noexcept
{
    switch (a) {
    case Activation::modified_sigmoid:
        return modified_sigmoid(v);
    }
    return v;
}

class Network {
public:
    struct Edge {
        std::uint32_t source;
        std::uint32_t target;
        double weight;
        bool recurrent;
    };

    explicit Network(const Genome& g)
    {
        const auto& layers = g.layers();
        std::vector<std::uint32_t> offsets;
        std::uint32_t n = 0;
        for (const Layer& l : layers) {
            offsets.push_back(n);
            n += static_cast<std::uint32_t>(l.nodes);
        }
        auto offset_of = [&](LayerId id) {
            for (std::size_t i = 0; i < layers.size(); ++i)
                if (layers[i].id == id)
                    return offsets[i];
            throw std::logic_error("dangling layer id");
        };

        for (std::size_t i = 0; i < layers.size(); ++i)
            blocks_.push_back(Block{layers[i].id, offsets[i], static_cast<std::uint32_t>(layers[i].nodes), layers[i].activation, 0, 0});
        bias_.assign(n, 0.0);

        // Edges are bucketed by destination block so each block is one contiguous run.
        std::vector<std::vector<Edge>> incoming(layers.size());
        for (const Layer& l : layers) {
            std::uint32_t src_off = offset_of(l.id);
            for (const LayerConnection& c : l.outgoing) {
                std::size_t dst_block = 0;
                while (layers[dst_block].id != c.destination)
                    ++dst_block;
                std::uint32_t dst_off = offsets[dst_block];
                for (std::size_t r = 0; r < c.matrix.rows(); ++r) {
                    bias_[dst_off + r] += c.bias(r);
                    for (std::size_t s = 0; s < c.source_nodes(); ++s) {
                        double w = c.weight(r, s);
                        if (w != 0.0)
                            incoming[dst_block].push_back(Edge{static_cast<std::uint32_t>(src_off + s), static_cast<std::uint32_t>(dst_off + r), w, c.recurrent()});
                    }
                }
            }
        }
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            blocks_[b].edge_begin = edges_.size();
            edges_.insert(edges_.end(), incoming[b].begin(), incoming[b].end());
            blocks_[b].edge_end = edges_.size();
        }
        for (double b : bias_)
            bias_count_ += b != 0.0;
        prev_.assign(n, 0.0);
        curr_.assign(n, 0.0);
        acc_.assign(n, 0.0);
    }

    std::size_t input_count() const noexcept { return blocks_.front().size; }
    std::size_t output_count() const noexcept { return blocks_.back().size; }
    std::size_t node_count() const noexcept { return curr_.size(); }
    std::size_t hidden_count() const noexcept { return node_count() - input_count() - output_count(); }
    /// Expressed connections including bias connections.
    std::size_t connection_count() const noexcept { return edges_.size() + bias_count_; }
    std::span<const Edge> edges() const noexcept { return edges_; }
    std::span<const double> biases() const noexcept { return bias_; }
    std::span<const double> state() const noexcept { return curr_; }

    /// One tick. Returns the output layer activations.
    std::span<const double> activate(std::span<const double> inputs)
    {
        const Block& in = blocks_.front();
        if (inputs.size() != in.size)
            throw std::invalid_argument("expected " + std::to_string(in.size) + " inputs, got " + std::to_string(inputs.size()));
        std::copy(inputs.begin(), inputs.end(), curr_.begin());
        for (std::size_t b = 1; b < blocks_.size(); ++b) {
            const Block& blk = blocks_[b];
            for (std::uint32_t i = blk.offset; i < blk.offset + blk.size; ++i)
                acc_[i] = bias_[i];
            for (std::size_t e = blk.edge_begin; e < blk.edge_end; ++e) {
                const Edge& edge = edges_[e];
                acc_[edge.target] += edge.weight * (edge.recurrent ? prev_[edge.source] : curr_[edge.source]);
            }
            for (std::uint32_t i = blk.offset; i < blk.offset + blk.size; ++i)
                curr_[i] = activate_fn(blk.activation, acc_[i]);
        }
        prev_ = curr_;
        const Block& out = blocks_.back();
        return std::span<const double>(curr_).subspan(out.offset, out.size);
    }

    std::span<const double> activate(std::initializer_list<double> inputs) { return activate(std::span<const double>(inputs.begin(), inputs.size())); }

    void reset() noexcept
    {
        std::fill(prev_.begin(), prev_.end(), 0.0);
        std::fill(curr_.begin(), curr_.end(), 0.0);
    }

private:
    struct Block {
        LayerId id;
        std::uint32_t offset;
        std::uint32_t size;
        Activation activation;
        std::size_t edge_begin;
        std::size_t edge_end;
    };

    std::vector<Block> blocks_;
    std::vector<Edge> edges_;
    std::vector<double> bias_;
    std::size_t bias_count_ = 0;
    std::vector<double> prev_;
    std::vector<double> curr_;
    std::vector<double> acc_;
};

inline Network decode(const Genome& g) { return Network(g); }

}  // namespace alf
