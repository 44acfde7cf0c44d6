#pragma once

#include <atomic>
#include <cstddef>
#include <limits>
#include <new>
#include <vector>

namespace retmil {

// Process-wide byte counter fed by MeteredAllocator. Only tensor storage goes
// through it, so the numbers describe the algorithm's working set and nothing
// else.
class AllocationMeter {
public:
    static AllocationMeter& global();

    void on_allocate(std::size_t bytes);
    void on_release(std::size_t bytes) noexcept;

    std::size_t current_bytes() const noexcept { return current_.load(std::memory_order_relaxed); }
    std::size_t peak_bytes() const noexcept { return peak_.load(std::memory_order_relaxed); }

    // Allocations that would push current_bytes above the limit throw OutOfMemory.
    void set_limit(std::size_t bytes) noexcept { limit_.store(bytes, std::memory_order_relaxed); }
    void clear_limit() noexcept { set_limit(std::numeric_limits<std::size_t>::max()); }
    std::size_t limit() const noexcept { return limit_.load(std::memory_order_relaxed); }

private:
    friend class MeterRegion;
    void raise_peak(std::size_t candidate) noexcept;

    std::atomic<std::size_t> current_{0};
    std::atomic<std::size_t> peak_{0};
    std::atomic<std::size_t> limit_{std::numeric_limits<std::size_t>::max()};
};

// Scoped measurement. peak_bytes() is the high-water mark of allocations made
// while the region is alive, measured above what was already live when it
// opened. Regions may nest; the enclosing region still sees the inner peak.
class MeterRegion {
public:
    MeterRegion();
    ~MeterRegion();
    MeterRegion(const MeterRegion&) = delete;
    MeterRegion& operator=(const MeterRegion&) = delete;

    std::size_t peak_bytes() const noexcept;
    std::size_t current_bytes() const noexcept;

private:
    std::size_t baseline_;
    std::size_t saved_peak_;
};

template <typename T>
struct MeteredAllocator {
    using value_type = T;

    MeteredAllocator() noexcept = default;
    template <typename U>
    MeteredAllocator(const MeteredAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        const std::size_t bytes = n * sizeof(T);
        AllocationMeter::global().on_allocate(bytes);
        try {
            return static_cast<T*>(::operator new(bytes));
        } catch (...) {
            AllocationMeter::global().on_release(bytes);
            throw;
        }
    }

    void deallocate(T* p, std::size_t n) noexcept {
        ::operator delete(p);
        AllocationMeter::global().on_release(n * sizeof(T));
    }

    template <typename U>
    bool operator==(const MeteredAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, MeteredAllocator<T>>;

}  // namespace retmil
