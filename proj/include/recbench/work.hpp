#pragma once

#include <cstdint>

// Process-wide counter of arithmetic work performed by model code. Models add
// roughly one unit per multiply-add in their inner loops. The counter backs the
// deterministic "work" clock used by mock meters, so energy figures from a mock
// session depend only on what the models computed, not on wall-clock jitter.
namespace recbench::work {

void add(std::uint64_t units) noexcept;
std::uint64_t total() noexcept;

}  // namespace recbench::work
