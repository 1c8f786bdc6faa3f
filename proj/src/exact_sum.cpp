#include "snowode/exact_sum.hpp"

#include <stdexcept>

namespace snowode::exact {

void Expansion::push(double v)
{
    if (v == 0.0)
        return;
    if (size_ == capacity) {
        distill();
        if (size_ == capacity)
            throw std::length_error("expansion capacity exceeded");
    }
    terms_[size_++] = v;
}

void Expansion::add(const Expansion &other, int weight)
{
    if (weight == 0)
        return;
    for (std::size_t i = 0; i < other.size_; ++i)
        push(weight > 0 ? other.terms_[i] : -other.terms_[i]);
}

// Repeated cascaded two_sum passes until nothing moves. At the fixpoint every
// adjacent pair satisfies fl(t[i-1] + t[i]) == t[i], so the top term carries
// the rounded value and the sign of the whole sum.
void Expansion::distill()
{
    for (int pass = 0; pass < 256; ++pass) {
        bool changed = false;
        if (size_ < 2)
            break;
        double s = terms_[0];
        for (std::size_t i = 1; i < size_; ++i) {
            const SumAndError r = two_sum(terms_[i], s);
            if (r.error != terms_[i - 1] || r.sum != terms_[i])
                changed = true;
            terms_[i - 1] = r.error;
            s = r.sum;
        }
        terms_[size_ - 1] = s;

        std::size_t kept = 0;
        for (std::size_t i = 0; i < size_; ++i)
            if (terms_[i] != 0.0)
                terms_[kept++] = terms_[i];
        if (kept != size_)
            changed = true;
        size_ = kept;
        if (!changed)
            return;
    }
}

int Expansion::sign()
{
    distill();
    if (size_ == 0)
        return 0;
    return terms_[size_ - 1] > 0.0 ? 1 : -1;
}

double Expansion::value()
{
    distill();
    return size_ == 0 ? 0.0 : terms_[size_ - 1];
}

} // namespace snowode::exact
