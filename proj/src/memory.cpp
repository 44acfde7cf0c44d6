#include "retmil/memory.hpp"

#include <algorithm>
#include <string>

#include "retmil/error.hpp"

namespace retmil {

AllocationMeter& AllocationMeter::global() {
    static AllocationMeter meter;
    return meter;
}

void AllocationMeter::on_allocate(std::size_t bytes) {
    const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    if (now > limit_.load(std::memory_order_relaxed)) {
        current_.fetch_sub(bytes, std::memory_order_relaxed);
        throw OutOfMemory("allocation of " + std::to_string(bytes) + " bytes exceeds meter limit of " +
                          std::to_string(limit()) + " bytes");
    }
    raise_peak(now);
}

void AllocationMeter::on_release(std::size_t bytes) noexcept {
    current_.fetch_sub(bytes, std::memory_order_relaxed);
}

void AllocationMeter::raise_peak(std::size_t candidate) noexcept {
    std::size_t seen = peak_.load(std::memory_order_relaxed);
    while (candidate > seen && !peak_.compare_exchange_weak(seen, candidate, std::memory_order_relaxed)) {
    }
}

MeterRegion::MeterRegion()
    : baseline_(AllocationMeter::global().current_bytes()),
      saved_peak_(AllocationMeter::global().peak_bytes()) {
    AllocationMeter::global().peak_.store(baseline_, std::memory_order_relaxed);
}

MeterRegion::~MeterRegion() {
    AllocationMeter::global().raise_peak(saved_peak_);
}

std::size_t MeterRegion::peak_bytes() const noexcept {
    const std::size_t peak = AllocationMeter::global().peak_bytes();
    return peak > baseline_ ? peak - baseline_ : 0;
}

std::size_t MeterRegion::current_bytes() const noexcept {
    const std::size_t now = AllocationMeter::global().current_bytes();
    return now > baseline_ ? now - baseline_ : 0;
}

}  // namespace retmil
