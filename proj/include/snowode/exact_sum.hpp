#pragma once

#include <array>
#include <cstddef>

namespace snowode::exact {

struct SumAndError
{
    double sum;
    double error;
};

/// Knuth's error-free transformation: a + b == sum + error exactly.
inline SumAndError two_sum(double a, double b)
{
    const double s = a + b;
    const double bb = s - a;
    const double e = (a - (s - bb)) + (b - bb);
    return {s, e};
}

/// Unevaluated sum of doubles whose exact real value is tracked without rounding.
///
/// Used to evaluate the fixed-weight threshold layers: every node value is an
/// integer combination of a few doubles, so carrying it as an expansion keeps
/// the ReLU sign decisions and the final rounding exact.
class Expansion
{
public:
    static constexpr std::size_t capacity = 32;

    Expansion() = default;
    explicit Expansion(double v) { push(v); }

    void push(double v);
    void add(const Expansion &other, int weight);
    void clear() { size_ = 0; }

    /// Sign of the exact value: -1, 0 or +1.
    int sign();

    /// Exact value rounded to the nearest double. Exact whenever the value is representable.
    double value();

    std::size_t size() const { return size_; }

private:
    void distill();

    std::array<double, capacity> terms_{};
    std::size_t size_ = 0;
};

} // namespace snowode::exact
