#include "recbench/work.hpp"

#include <atomic>

namespace recbench::work {

namespace {
std::atomic<std::uint64_t> g_units{0};
}

void add(std::uint64_t units) noexcept { g_units.fetch_add(units, std::memory_order_relaxed); }

std::uint64_t total() noexcept { return g_units.load(std::memory_order_relaxed); }

}  // namespace recbench::work
