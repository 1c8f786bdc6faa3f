#include "snowode/alloc_counter.hpp"

#include <atomic>
#include <cstdlib>
#include <new>

// Link-time wrapping (-Wl,--wrap=...) routes malloc calls made by code in
// the snowode targets, including inlined Eigen storage, through these.
extern "C" {
void *__real_malloc(std::size_t n);
void *__real_calloc(std::size_t count, std::size_t n);
void *__real_realloc(void *p, std::size_t n);
}

namespace {

std::atomic<std::uint64_t> g_bytes{0};
std::atomic<std::uint64_t> g_count{0};

void record(std::size_t n)
{
    g_bytes.fetch_add(n, std::memory_order_relaxed);
    g_count.fetch_add(1, std::memory_order_relaxed);
}

void *allocate(std::size_t n)
{
    record(n);
    if (void *p = __real_malloc(n == 0 ? 1 : n))
        return p;
    throw std::bad_alloc();
}

void *allocate_aligned(std::size_t n, std::align_val_t al)
{
    record(n);
    const auto a = static_cast<std::size_t>(al);
    const std::size_t rounded = n == 0 ? a : (n + a - 1) / a * a;
    if (void *p = std::aligned_alloc(a, rounded))
        return p;
    throw std::bad_alloc();
}

} // namespace

extern "C" {

void *__wrap_malloc(std::size_t n)
{
    record(n);
    return __real_malloc(n);
}

void *__wrap_calloc(std::size_t count, std::size_t n)
{
    record(count * n);
    return __real_calloc(count, n);
}

void *__wrap_realloc(void *p, std::size_t n)
{
    record(n);
    return __real_realloc(p, n);
}

} // extern "C"

void *operator new(std::size_t n) { return allocate(n); }
void *operator new[](std::size_t n) { return allocate(n); }
void *operator new(std::size_t n, const std::nothrow_t &) noexcept
{
    record(n);
    return __real_malloc(n == 0 ? 1 : n);
}
void *operator new[](std::size_t n, const std::nothrow_t &) noexcept
{
    record(n);
    return __real_malloc(n == 0 ? 1 : n);
}
void *operator new(std::size_t n, std::align_val_t al) { return allocate_aligned(n, al); }
void *operator new[](std::size_t n, std::align_val_t al) { return allocate_aligned(n, al); }
void operator delete(void *p) noexcept { std::free(p); }
void operator delete[](void *p) noexcept { std::free(p); }
void operator delete(void *p, std::size_t) noexcept { std::free(p); }
void operator delete[](void *p, std::size_t) noexcept { std::free(p); }
void operator delete(void *p, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void *p, std::align_val_t) noexcept { std::free(p); }
void operator delete(void *p, std::size_t, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void *p, std::size_t, std::align_val_t) noexcept { std::free(p); }

namespace snowode::alloc {

std::uint64_t bytes_allocated()
{
    return g_bytes.load(std::memory_order_relaxed);
}

std::uint64_t allocation_count()
{
    return g_count.load(std::memory_order_relaxed);
}

} // namespace snowode::alloc
