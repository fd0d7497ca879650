#pragma once

// Deterministic benchmark tasks behind one evaluation contract.
//
//   xor        - 2 inputs, 1 output; not linearly separable.
//   pole       - single cart-pole balancing, 4 observations, 1 force output.
//   parity:<n> - sequential parity over n ticks; needs recurrent connections.
//
// Observations are scaled into [-1, 1]. Actions are read from network
// outputs in [-1, 1].

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "alf/network.hpp"
#include "alf/rng.hpp"
#include "alf/speciation.hpp"

namespace alf {

struct StepResult {
    std::vector<double> observation;
    bool done = false;
    bool reset_network = false;  // the next observation starts an independent case
};

class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual std::size_t input_arity() const = 0;
    virtual std::size_t output_arity() const = 0;
    virtual double fitness_threshold() const = 0;
    virtual std::size_t max_steps() const = 0;

    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    virtual StepResult step(std::span<const double> action) = 0;
    virtual double fitness() const = 0;

    virtual std::unique_ptr<Environment> clone() const = 0;
};

struct EpisodeResult {
    double fitness = 0.0;
    std::size_t steps = 0;
    std::vector<Sample> observations;  // the most recent ones, up to the trace capacity
};

/// Runs one episode of `net` in `env`. `on_step`, when given, sees each
/// observation and the network's response.
template <class OnStep>
EpisodeResult run_episode(Network& net, Environment& env, std::uint64_t seed, std::size_t trace_capacity, OnStep&& on_step)
{
    if (net.input_count() != env.input_arity() || net.output_count() != env.output_arity())
        throw std::invalid_argument("network arity does not match environment " + env.name());
    EpisodeResult out;
    net.reset();
    std::vector<double> obs = env.reset(seed);
    std::size_t head = 0;
    while (out.steps < env.max_steps()) {
        if (trace_capacity > 0) {
            if (out.observations.size() < trace_capacity) {
                out.observations.push_back(obs);
            } else {
                out.observations[head] = obs;
                head = (head + 1) % trace_capacity;
            }
        }
        auto action = net.activate(obs);
        on_step(std::span<const double>(obs), action);
        StepResult r = env.step(action);
        ++out.steps;
        if (r.done)
            break;
        if (r.reset_network)
            net.reset();
        obs = std::move(r.observation);
    }
    std::rotate(out.observations.begin(), out.observations.begin() + static_cast<std::ptrdiff_t>(head), out.observations.end());
    out.fitness = env.fitness();
    return out;
}

inline EpisodeResult run_episode(Network& net, Environment& env, std::uint64_t seed, std::size_t trace_capacity = 0)
{
    return run_episode(net, env, seed, trace_capacity, [](std::span<const double>, std::span<const double>) {});
}

class XorEnvironment final : public Environment {
public:
    static constexpr std::array<std::array<double, 2>, 4> cases{{{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}};
    static constexpr std::array<double, 4> targets{0.0, 1.0, 1.0, 0.0};

    std::string name() const override { return "xor"; }
    std::size_t input_arity() const override { return 2; }
    std::size_t output_arity() const override { return 1; }
    double fitness_threshold() const override { return 3.9; }
    std::size_t max_steps() const override { return 4; }

    std::vector<double> reset(std::uint64_t) override
    {
        case_ = 0;
        error_ = 0.0;
        return observation();
    }

    StepResult step(std::span<const double> action) override
    {
        if (case_ >= cases.size())
            throw std::logic_error("xor episode already finished");
        double y = (action[0] + 1.0) / 2.0;
        double d = targets[case_] - y;
        error_ += d * d;
        ++case_;
        bool done = case_ == cases.size();
        return {done ? std::vector<double>{} : observation(), done, true};
    }

    double fitness() const override { return std::max(0.0, 4.0 - error_); }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<XorEnvironment>(*this); }

private:
    std::vector<double> observation() const { return {cases[case_][0], cases[case_][1]}; }

    std::size_t case_ = 0;
    double error_ = 0.0;
};

/// Cart-pole with Euler integration. Fitness is the number of balanced steps.
class PoleBalanceEnvironment final : public Environment {
public:
    static constexpr double gravity = 9.8;
    static constexpr double cart_mass = 1.0;
    static constexpr double pole_mass = 0.1;
    static constexpr double half_length = 0.5;
    static constexpr double force_magnitude = 10.0;
    static constexpr double tau = 0.02;
    static constexpr double angle_limit = 12.0 * std::numbers::pi / 180.0;
    static constexpr double position_limit = 2.4;
    static constexpr double start_angle = 0.05;

    struct State {
        double x = 0.0, x_dot = 0.0, theta = 0.0, theta_dot = 0.0;
    };

    explicit PoleBalanceEnvironment(bool randomized_start = false, std::size_t max_steps = 1000)
        : randomized_(randomized_start), max_steps_(max_steps)
    {
    }

    std::string name() const override { return "pole"; }
    std::size_t input_arity() const override { return 4; }
    std::size_t output_arity() const override { return 1; }
    double fitness_threshold() const override { return static_cast<double>(max_steps_); }
    std::size_t max_steps() const override { return max_steps_; }

    std::vector<double> reset(std::uint64_t seed) override
    {
        state_ = State{0.0, 0.0, start_angle, 0.0};
        if (randomized_) {
            Rng rng(derive_seed(seed, {stream::episode}));
            std::uniform_real_distribution<double> u(-0.05, 0.05);
            state_ = State{u(rng), u(rng), u(rng), u(rng)};
        }
        balanced_ = 0;
        failed_ = false;
        return observation();
    }

    StepResult step(std::span<const double> action) override
    {
        state_ = integrate(state_, force_magnitude * std::clamp(action[0], -1.0, 1.0));
        failed_ = std::fabs(state_.x) > position_limit || std::fabs(state_.theta) > angle_limit;
        if (!failed_)
            ++balanced_;
        return {observation(), failed_ || balanced_ >= max_steps_, false};
    }

    double fitness() const override { return static_cast<double>(balanced_); }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<PoleBalanceEnvironment>(*this); }

    const State& state() const noexcept { return state_; }

    static State integrate(State s, double force)
    {
        constexpr double total_mass = cart_mass + pole_mass;
        constexpr double pole_mass_length = pole_mass * half_length;
        double cos_t = std::cos(s.theta), sin_t = std::sin(s.theta);
        double temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
        double theta_acc = (gravity * sin_t - cos_t * temp) / (half_length * (4.0 / 3.0 - pole_mass * cos_t * cos_t / total_mass));
        double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
        s.x += tau * s.x_dot;
        s.x_dot += tau * x_acc;
        s.theta += tau * s.theta_dot;
        s.theta_dot += tau * theta_acc;
        return s;
    }

private:
    std::vector<double> observation() const
    {
        auto clamp = [](double v) { return std::clamp(v, -1.0, 1.0); };
        return {clamp(state_.x / position_limit), clamp(state_.x_dot / 2.0), clamp(state_.theta / angle_limit), clamp(state_.theta_dot / 3.0)};
    }

    bool randomized_;
    std::size_t max_steps_;
    State state_;
    std::size_t balanced_ = 0;
    bool failed_ = false;
};

/// One +/-1 bit per tick; after `length` ticks the output sign must report
/// whether an odd number of +1 bits was seen. Fitness is the fraction of
/// correct answers over a fixed batch of 64 sequences (every sequence in
/// turn when there are at most 64 of them).
class SequentialParityEnvironment final : public Environment {
public:
    static constexpr std::size_t batch_size = 64;

    explicit SequentialParityEnvironment(std::size_t length, std::uint64_t batch_seed = 0x5EED) : length_(length)
    {
        if (length == 0)
            throw std::invalid_argument("parity length must be at least 1");
        std::uint64_t distinct = length < 64 ? (std::uint64_t{1} << length) : 0;
        Rng rng(batch_seed);
        for (std::size_t k = 0; k < batch_size; ++k) {
            if (distinct != 0 && distinct <= batch_size) {
                batch_.push_back(k % distinct);
            } else {
                batch_.push_back(rng());
            }
        }
    }

    std::string name() const override { return "parity:" + std::to_string(length_); }
    std::size_t input_arity() const override { return 1; }
    std::size_t output_arity() const override { return 1; }
    double fitness_threshold() const override { return 0.98; }
    std::size_t max_steps() const override { return batch_size * length_; }
    std::size_t length() const noexcept { return length_; }

    /// Bit k (tick order) of a sequence code.
    static bool bit(std::uint64_t code, std::size_t k) { return (code >> k) & 1U; }

    static bool odd_parity(std::uint64_t code, std::size_t length)
    {
        bool p = false;
        for (std::size_t k = 0; k < length; ++k)
            p ^= bit(code, k);
        return p;
    }

    std::vector<double> reset(std::uint64_t) override
    {
        seq_ = 0;
        tick_ = 0;
        correct_ = 0;
        return observation();
    }

    StepResult step(std::span<const double> action) override
    {
        if (seq_ >= batch_.size())
            throw std::logic_error("parity episode already finished");
        if (tick_ + 1 < length_) {
            ++tick_;
            return {observation(), false, false};
        }
        bool says_odd = action[0] > 0.0;
        if (says_odd == odd_parity(batch_[seq_], length_))
            ++correct_;
        ++seq_;
        tick_ = 0;
        bool done = seq_ == batch_.size();
        return {done ? std::vector<double>{} : observation(), done, true};
    }

    double fitness() const override { return static_cast<double>(correct_) / static_cast<double>(batch_size); }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<SequentialParityEnvironment>(*this); }

private:
    std::vector<double> observation() const { return {bit(batch_[seq_], tick_) ? 1.0 : -1.0}; }

    std::size_t length_;
    std::vector<std::uint64_t> batch_;
    std::size_t seq_ = 0;
    std::size_t tick_ = 0;
    std::size_t correct_ = 0;
};

inline std::unique_ptr<Environment> xor_environment() { return std::make_unique<XorEnvironment>(); }
inline std::unique_ptr<Environment> pole_balance_environment(bool randomized_start = false)
{
    return std::make_unique<PoleBalanceEnvironment>(randomized_start);
}
inline std::unique_ptr<Environment> sequential_parity_environment(std::size_t length)
{
    return std::make_unique<SequentialParityEnvironment>(length);
}

/// "xor" | "pole" | "parity:<length>"
inline std::unique_ptr<Environment> make_environment(std::string_view name)
{
    if (name == "xor")
        return xor_environment();
    if (name == "pole")
        return pole_balance_environment(false);
    constexpr std::string_view parity = "parity:";
    if (name.starts_with(parity)) {
        std::string_view num = name.substr(parity.size());
        std::size_t length = 0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), length);
        if (ec == std::errc{} && ptr == num.data() + num.size() && length >= 1)
            return sequential_parity_environment(length);
    }
    throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

}  // namespace alf
