#pragma once

#include <cstdint>

namespace snowode::alloc {

/// Cumulative bytes requested from the heap by this process through operator
/// new and, for code linked into the snowode targets, malloc/calloc/realloc.
/// Frees are not subtracted.
std::uint64_t bytes_allocated();
std::uint64_t allocation_count();

} // namespace snowode::alloc
