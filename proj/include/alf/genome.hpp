#pragma once

// Direct layer-matrix genetic encoding.
//
// A genome is an ordered list of layers. Each layer owns its outgoing layer
// connections, kept sorted by destination id, and each layer connection is a
// dense row-major weight matrix (rows = destination nodes, columns = source
// nodes). A weight of exactly 0.0 means "no connection". Bias weights live in
// a leading column of the matrices that leave the input layer.
//
// The representation is kept canonical at all times: connections without any
// nonzero entry are dropped, a bias column exists only while it holds a
// nonzero weight, and negative zero is normalised. Two genomes describing the
// same weighted graph therefore have identical layer lists and serialise to
// identical bytes.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "alf/rng.hpp"

namespace alf {

struct LayerId {
    std::uint32_t value = 0;

    friend constexpr auto operator<=>(LayerId, LayerId) = default;
};

inline constexpr LayerId input_layer_id{1};
/// Reserved id of the output layer; larger than any hidden layer id.
inline constexpr LayerId output_layer_id{0xFFFF};
inline constexpr LayerId first_hidden_layer_id{2};

using GenomeId = std::uint64_t;

enum class Activation : std::uint8_t { modified_sigmoid };

inline std::string_view to_string(Activation a)
{
    switch (a) {
    case Activation::modified_sigmoid:
        return "modified_sigmoid";
    }
    return "unknown";
}

inline std::optional<Activation> activation_from_string(std::string_view s)
{
    if (s == "modified_sigmoid")
        return Activation::modified_sigmoid;
    return std::nullopt;
}

/// Thrown by deserialisers; carries the byte offset where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset)
    {
    }

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

struct WeightRange {
    double lo = -1.0;
    double hi = 1.0;
};

class ConnectionMatrix {
public:
    ConnectionMatrix(std::size_t rows, std::size_t cols) : ConnectionMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

    ConnectionMatrix(std::size_t rows, std::size_t cols, std::vector<double> weights)
        : rows_(rows), cols_(cols), weights_(std::move(weights))
    {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("connection matrix must be non-empty");
        if (weights_.size() != rows * cols)
            throw std::invalid_argument("connection matrix weight count does not match its shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> weights() const noexcept { return weights_; }

    double operator()(std::size_t r, std::size_t c) const { return weights_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return weights_[r * cols_ + c]; }

    /// 1-based position of entry a_ij inside the weight vector.
    static constexpr std::size_t position(std::size_t i, std::size_t j, std::size_t n) noexcept { return i * n - n + j; }

    /// Entry a_ij with 1-based row i and column j.
    double entry(std::size_t i, std::size_t j) const { return weights_.at(position(i, j, cols_) - 1); }

    std::size_t nonzero_count() const noexcept
    {
        return static_cast<std::size_t>(std::count_if(weights_.begin(), weights_.end(), [](double w) { return w != 0.0; }));
    }

    bool column_is_zero(std::size_t c) const
    {
        for (std::size_t r = 0; r < rows_; ++r)
            if ((*this)(r, c) != 0.0)
                return false;
        return true;
    }

    /// Grows or shrinks the matrix; entries keep their (row, col) positions.
    void resize(std::size_t rows, std::size_t cols)
    {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("connection matrix must be non-empty");
        std::vector<double> w(rows * cols, 0.0);
        for (std::size_t r = 0; r < std::min(rows, rows_); ++r)
            for (std::size_t c = 0; c < std::min(cols, cols_); ++c)
                w[r * cols + c] = (*this)(r, c);
        rows_ = rows;
        cols_ = cols;
        weights_ = std::move(w);
    }

    void insert_leading_column()
    {
        std::vector<double> w(rows_ * (cols_ + 1), 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c)
                w[r * (cols_ + 1) + c + 1] = (*this)(r, c);
        ++cols_;
        weights_ = std::move(w);
    }

    void erase_leading_column()
    {
        if (cols_ < 2)
            throw std::logic_error("cannot erase the only column of a connection matrix");
        std::vector<double> w(rows_ * (cols_ - 1));
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 1; c < cols_; ++c)
                w[r * (cols_ - 1) + c - 1] = (*this)(r, c);
        --cols_;
        weights_ = std::move(w);
    }

    friend bool operator==(const ConnectionMatrix&, const ConnectionMatrix&) = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> weights_;
};

struct LayerConnection {
    LayerId source;
    LayerId destination;
    bool has_bias = false;
    ConnectionMatrix matrix;

    bool recurrent() const noexcept { return destination <= source; }
    std::size_t source_nodes() const noexcept { return matrix.cols() - (has_bias ? 1 : 0); }
    std::size_t destination_nodes() const noexcept { return matrix.rows(); }
    double weight(std::size_t dst_node, std::size_t src_node) const { return matrix(dst_node, src_node + (has_bias ? 1 : 0)); }
    double bias(std::size_t dst_node) const { return has_bias ? matrix(dst_node, 0) : 0.0; }

    friend bool operator==(const LayerConnection&, const LayerConnection&) = default;
};

struct Layer {
    LayerId id;
    std::size_t nodes = 0;
    Activation activation = Activation::modified_sigmoid;
    std::vector<LayerConnection> outgoing;

    const LayerConnection* connection_to(LayerId dst) const
    {
        auto it = std::lower_bound(outgoing.begin(), outgoing.end(), dst,
                                   [](const LayerConnection& c, LayerId d) { return c.destination < d; });
        return it != outgoing.end() && it->destination == dst ? &*it : nullptr;
    }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Identity of a single connection gene after layer alignment.
///
/// Bias genes use the input layer as source, `bias = true` and `src_node = 0`.
/// Ordering follows the canonical row-major layout: source layer, destination
/// layer, destination node, then column (bias column first).
struct GeneSlot {
    LayerId source;
    LayerId destination;
    std::uint32_t dst_node = 0;
    std::uint32_t src_node = 0;
    bool bias = false;

    static GeneSlot bias_of(LayerId dst, std::uint32_t dst_node) { return {input_layer_id, dst, dst_node, 0, true}; }

    std::uint32_t column() const noexcept { return bias ? 0 : src_node + 1; }
    bool recurrent() const noexcept { return destination <= source; }

    friend auto operator<=>(const GeneSlot& a, const GeneSlot& b)
    {
        return std::tuple(a.source, a.destination, a.dst_node, a.column()) <=> std::tuple(b.source, b.destination, b.dst_node, b.column());
    }
    friend bool operator==(const GeneSlot& a, const GeneSlot& b) { return (a <=> b) == 0; }
};

struct Gene {
    GeneSlot slot;
    double weight = 0.0;
};

class Genome {
public:
    /// Input and output layer only, no connections.
    Genome(std::size_t inputs, std::size_t outputs, Activation activation = Activation::modified_sigmoid)
    {
        if (inputs == 0 || outputs == 0)
            throw std::invalid_argument("a genome needs at least one input and one output node");
        layers_.push_back(Layer{input_layer_id, inputs, activation, {}});
        layers_.push_back(Layer{output_layer_id, outputs, activation, {}});
    }

    /// Input layer fully connected to the output layer with uniform random weights (never exactly zero).
    static Genome minimal(std::size_t inputs, std::size_t outputs, Rng& rng, WeightRange range = {})
    {
        Genome g(inputs, outputs);
        std::uniform_real_distribution<double> dist(range.lo, range.hi);
        std::vector<double> w(inputs * outputs);
        for (double& x : w) {
            do
                x = dist(rng);
            while (x == 0.0);
        }
        g.layers_.front().outgoing.push_back(LayerConnection{input_layer_id, output_layer_id, false, ConnectionMatrix(outputs, inputs, std::move(w))});
        return g;
    }

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const Layer& input_layer() const noexcept { return layers_.front(); }
    const Layer& output_layer() const noexcept { return layers_.back(); }

    const Layer* find_layer(LayerId id) const
    {
        auto it = std::lower_bound(layers_.begin(), layers_.end(), id, [](const Layer& l, LayerId i) { return l.id < i; });
        return it != layers_.end() && it->id == id ? &*it : nullptr;
    }

    const Layer& layer(LayerId id) const
    {
        const Layer* l = find_layer(id);
        if (!l)
            throw std::out_of_range("no layer with id " + std::to_string(id.value));
        return *l;
    }

    std::size_t input_count() const noexcept { return input_layer().nodes; }
    std::size_t output_count() const noexcept { return output_layer().nodes; }
    std::size_t hidden_layer_count() const noexcept { return layers_.size() - 2; }

    std::size_t hidden_node_count() const noexcept
    {
        std::size_t h = 0;
        for (std::size_t i = 1; i + 1 < layers_.size(); ++i)
            h += layers_[i].nodes;
        return h;
    }

    /// Number of expressed connections (nonzero entries, bias included).
    std::size_t connection_count() const noexcept
    {
        std::size_t e = 0;
        for (const Layer& l : layers_)
            for (const LayerConnection& c : l.outgoing)
                e += c.matrix.nonzero_count();
        return e;
    }

    static bool permitted(LayerId src, LayerId dst, bool allow_recurrent) noexcept
    {
        return dst != input_layer_id && (allow_recurrent || src < dst);
    }

    /// Connection count of the fully connected network over the current layer set.
    std::size_t full_connection_count(bool allow_recurrent) const noexcept
    {
        std::size_t total = 0;
        for (const Layer& s : layers_) {
            for (const Layer& d : layers_) {
                if (permitted(s.id, d.id, allow_recurrent))
                    total += s.nodes * d.nodes;
            }
        }
        for (std::size_t i = 1; i < layers_.size(); ++i)
            total += layers_[i].nodes;  // bias slots
        return total;
    }

    LayerId next_hidden_id() const noexcept
    {
        if (layers_.size() == 2)
            return first_hidden_layer_id;
        return LayerId{layers_[layers_.size() - 2].id.value + 1};
    }

    /// Appends a hidden layer with the next free id.
    LayerId add_hidden_layer(std::size_t nodes, Activation activation = Activation::modified_sigmoid)
    {
        LayerId id = next_hidden_id();
        add_layer(id, nodes, activation);
        return id;
    }

    void add_layer(LayerId id, std::size_t nodes, Activation activation = Activation::modified_sigmoid)
    {
        if (id <= input_layer_id || id >= output_layer_id)
            throw std::invalid_argument("hidden layer id out of range: " + std::to_string(id.value));
        if (nodes == 0)
            throw std::invalid_argument("a layer needs at least one node");
        if (find_layer(id))
            throw std::invalid_argument("duplicate layer id " + std::to_string(id.value));
        auto it = std::lower_bound(layers_.begin(), layers_.end(), id, [](const Layer& l, LayerId i) { return l.id < i; });
        layers_.insert(it, Layer{id, nodes, activation, {}});
    }

    /// Appends nodes to a hidden layer; every matrix touching the layer is zero-padded.
    void add_nodes(LayerId id, std::size_t count)
    {
        if (id == input_layer_id || id == output_layer_id)
            throw std::invalid_argument("input and output arity is fixed");
        Layer& target = mutable_layer(id);
        target.nodes += count;
        for (Layer& l : layers_) {
            for (LayerConnection& c : l.outgoing) {
                if (c.source == id)
                    c.matrix.resize(c.matrix.rows(), c.matrix.cols() + count);
                if (c.destination == id)
                    c.matrix.resize(c.matrix.rows() + count, c.matrix.cols());
            }
        }
    }

    bool has_connection(LayerId src, LayerId dst) const
    {
        const Layer* l = find_layer(src);
        return l && l->connection_to(dst);
    }

    bool contains(const GeneSlot& s) const
    {
        const Layer* src = find_layer(s.source);
        const Layer* dst = find_layer(s.destination);
        if (!src || !dst || s.destination == input_layer_id)
            return false;
        if (s.bias)
            return s.source == input_layer_id && s.dst_node < dst->nodes;
        return s.dst_node < dst->nodes && s.src_node < src->nodes;
    }

    double weight(const GeneSlot& s) const
    {
        if (!contains(s))
            throw std::out_of_range("gene slot outside genome structure");
        const LayerConnection* c = layer(s.source).connection_to(s.destination);
        if (!c)
            return 0.0;
        if (s.bias)
            return c->bias(s.dst_node);
        return c->weight(s.dst_node, s.src_node);
    }

    /// Writes one gene; 0.0 removes it. Keeps the encoding canonical.
    void set_weight(const GeneSlot& s, double w)
    {
        if (!contains(s))
            throw std::out_of_range("gene slot outside genome structure");
        if (!std::isfinite(w))
            throw std::invalid_argument("weights must be finite");
        if (w == 0.0)
            w = 0.0;  // drops the sign of -0.0
        Layer& src = mutable_layer(s.source);
        auto it = std::lower_bound(src.outgoing.begin(), src.outgoing.end(), s.destination,
                                   [](const LayerConnection& c, LayerId d) { return c.destination < d; });
        bool exists = it != src.outgoing.end() && it->destination == s.destination;
        if (!exists) {
            if (w == 0.0)
                return;
            std::size_t rows = layer(s.destination).nodes;
            it = src.outgoing.insert(it, LayerConnection{s.source, s.destination, s.bias, ConnectionMatrix(rows, src.nodes + (s.bias ? 1 : 0))});
        }
        LayerConnection& c = *it;
        if (s.bias && !c.has_bias) {
            if (w == 0.0)
                return;
            c.matrix.insert_leading_column();
            c.has_bias = true;
        }
        std::size_t col = s.bias ? 0 : s.src_node + (c.has_bias ? 1 : 0);
        c.matrix(s.dst_node, col) = w;
        if (w != 0.0)
            return;
        if (c.has_bias && c.matrix.column_is_zero(0)) {
            if (c.matrix.cols() == 1) {
                src.outgoing.erase(it);
                return;
            }
            c.matrix.erase_leading_column();
            c.has_bias = false;
        }
        if (c.matrix.nonzero_count() == 0)
            src.outgoing.erase(it);
    }

    /// Visits every expressed gene in canonical order.
    template <class F>
    void for_each_gene(F&& f) const
    {
        for (const Layer& l : layers_) {
            for (const LayerConnection& c : l.outgoing) {
                std::size_t offset = c.has_bias ? 1 : 0;
                for (std::size_t r = 0; r < c.matrix.rows(); ++r) {
                    for (std::size_t k = 0; k < c.matrix.cols(); ++k) {
                        double w = c.matrix(r, k);
                        if (w == 0.0)
                            continue;
                        GeneSlot slot = (c.has_bias && k == 0)
                                            ? GeneSlot::bias_of(c.destination, static_cast<std::uint32_t>(r))
                                            : GeneSlot{c.source, c.destination, static_cast<std::uint32_t>(r),
                                                       static_cast<std::uint32_t>(k - offset), false};
                        f(Gene{slot, w});
                    }
                }
            }
        }
    }

    std::vector<Gene> genes() const
    {
        std::vector<Gene> out;
        out.reserve(connection_count());
        for_each_gene([&](const Gene& g) { out.push_back(g); });
        return out;
    }

    /// Visits every slot a fully connected network over the current layers would have.
    template <class F>
    void for_each_permitted_slot(bool allow_recurrent, F&& f) const
    {
        for (const Layer& s : layers_) {
            for (const Layer& d : layers_) {
                if (!permitted(s.id, d.id, allow_recurrent))
                    continue;
                for (std::uint32_t r = 0; r < d.nodes; ++r) {
                    if (s.id == input_layer_id)
                        f(GeneSlot::bias_of(d.id, r));
                    for (std::uint32_t c = 0; c < s.nodes; ++c)
                        f(GeneSlot{s.id, d.id, r, c, false});
                }
            }
        }
    }

    bool is_feed_forward() const noexcept
    {
        for (const Layer& l : layers_)
            for (const LayerConnection& c : l.outgoing)
                if (c.recurrent())
                    return false;
        return true;
    }

    /// Restores canonical form after direct construction (deserialisation).
    void canonicalize()
    {
        for (Layer& l : layers_) {
            std::sort(l.outgoing.begin(), l.outgoing.end(), [](const auto& a, const auto& b) { return a.destination < b.destination; });
            for (LayerConnection& c : l.outgoing) {
                for (std::size_t r = 0; r < c.matrix.rows(); ++r)
                    for (std::size_t k = 0; k < c.matrix.cols(); ++k)
                        if (c.matrix(r, k) == 0.0)
                            c.matrix(r, k) = 0.0;
                if (c.has_bias && c.matrix.column_is_zero(0) && c.matrix.cols() > 1) {
                    c.matrix.erase_leading_column();
                    c.has_bias = false;
                }
            }
            std::erase_if(l.outgoing, [](const LayerConnection& c) { return c.matrix.nonzero_count() == 0; });
        }
    }

    /// Empty when every encoding invariant holds, otherwise a description of the first violation.
    std::optional<std::string> validation_error() const
    {
        if (layers_.size() < 2)
            return "fewer than two layers";
        if (layers_.front().id != input_layer_id)
            return "first layer is not the input layer";
        if (layers_.back().id != output_layer_id)
            return "last layer is not the output layer";
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const Layer& l = layers_[i];
            std::string where = "layer " + std::to_string(l.id.value) + ": ";
            if (l.nodes == 0)
                return where + "no nodes";
            if (i > 0 && !(layers_[i - 1].id < l.id))
                return where + "layer ids not strictly ascending";
            for (std::size_t k = 0; k < l.outgoing.size(); ++k) {
                const LayerConnection& c = l.outgoing[k];
                if (c.source != l.id)
                    return where + "connection source mismatch";
                if (k > 0 && !(l.outgoing[k - 1].destination < c.destination))
                    return where + "connections not strictly sorted by destination";
                if (c.destination == input_layer_id)
                    return where + "connection into the input layer";
                const Layer* dst = find_layer(c.destination);
                if (!dst)
                    return where + "connection to unknown layer " + std::to_string(c.destination.value);
                if (c.has_bias && c.source != input_layer_id)
                    return where + "bias column outside the input layer";
                if (c.matrix.rows() != dst->nodes || c.source_nodes() != l.nodes)
                    return where + "matrix shape does not match layer sizes";
                if (c.matrix.nonzero_count() == 0)
                    return where + "connection without any expressed weight";
                if (c.has_bias && c.matrix.column_is_zero(0))
                    return where + "empty bias column";
                for (double w : c.matrix.weights()) {
                    if (!std::isfinite(w))
                        return where + "non-finite weight";
                    if (w == 0.0 && std::signbit(w))
                        return where + "negative zero weight";
                }
            }
        }
        return std::nullopt;
    }

    void validate() const
    {
        if (auto err = validation_error())
            throw std::logic_error("invalid genome: " + *err);
    }

    GenomeId id() const noexcept { return id_; }
    void set_id(GenomeId id) noexcept { id_ = id; }
    double fitness() const noexcept { return fitness_; }
    void set_fitness(double f) noexcept { fitness_ = f; }
    /// Fitness assumed by the genetic operators before the genome has been evaluated.
    double fitness_hint() const noexcept { return fitness_hint_; }
    void set_fitness_hint(double f) noexcept { fitness_hint_ = f; }

    /// Structural equality of the encoding; identity and fitness are ignored.
    friend bool operator==(const Genome& a, const Genome& b) { return a.layers_ == b.layers_; }

    nlohmann::json to_json() const
    {
        nlohmann::json layers = nlohmann::json::array();
        for (const Layer& l : layers_) {
            nlohmann::json conns = nlohmann::json::array();
            for (const LayerConnection& c : l.outgoing) {
                conns.push_back({{"src", c.source.value},
                                 {"dst", c.destination.value},
                                 {"bias", c.has_bias},
                                 {"rows", c.matrix.rows()},
                                 {"cols", c.matrix.cols()},
                                 {"weights", std::vector<double>(c.matrix.weights().begin(), c.matrix.weights().end())}});
            }
            layers.push_back({{"id", l.id.value}, {"nodes", l.nodes}, {"activation", to_string(l.activation)}, {"connections", std::move(conns)}});
        }
        return {{"layers", std::move(layers)}, {"fitness", fitness_}, {"id", id_}};
    }

    static Genome from_json(const nlohmann::json& j)
    {
        try {
            const auto& jl = j.at("layers");
            if (!jl.is_array() || jl.size() < 2)
                throw ParseError("genome needs an input and an output layer", 0);
            Genome g(1, 1);
            g.layers_.clear();
            for (const auto& l : jl) {
                auto act = activation_from_string(l.at("activation").get<std::string>());
                if (!act)
                    throw ParseError("unknown activation " + l.at("activation").dump(), 0);
                Layer layer{LayerId{l.at("id").get<std::uint32_t>()}, l.at("nodes").get<std::size_t>(), *act, {}};
                for (const auto& c : l.at("connections")) {
                    layer.outgoing.push_back(LayerConnection{
                        LayerId{c.at("src").get<std::uint32_t>()}, LayerId{c.at("dst").get<std::uint32_t>()}, c.at("bias").get<bool>(),
                        ConnectionMatrix(c.at("rows").get<std::size_t>(), c.at("cols").get<std::size_t>(), c.at("weights").get<std::vector<double>>())});
                }
                g.layers_.push_back(std::move(layer));
            }
            g.id_ = j.at("id").get<GenomeId>();
            g.fitness_ = j.at("fitness").get<double>();
            g.canonicalize();
            if (auto err = g.validation_error())
                throw ParseError("invalid genome: " + *err, 0);
            return g;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed genome: ") + e.what(), 0);
        } catch (const std::invalid_argument& e) {
            throw ParseError(std::string("malformed genome: ") + e.what(), 0);
        }
    }

    /// Canonical byte form (compact JSON, keys sorted).
    std::string serialize() const { return to_json().dump(); }

    static Genome deserialize(std::string_view bytes)
    {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(bytes.begin(), bytes.end());
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("genome parse error: ") + e.what(), e.byte);
        }
        return from_json(j);
    }

private:
    Layer& mutable_layer(LayerId id) { return const_cast<Layer&>(layer(id)); }

    std::vector<Layer> layers_;
    GenomeId id_ = 0;
    double fitness_ = 0.0;
    double fitness_hint_ = 0.0;
};

inline std::size_t connection_count(const Genome& g) { return g.connection_count(); }
inline std::size_t full_connection_count(const Genome& g, bool allow_recurrent) { return g.full_connection_count(allow_recurrent); }

}  // namespace alf
