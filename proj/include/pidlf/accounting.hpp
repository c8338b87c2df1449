#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <vector>

namespace pidlf {

// Storage categories tracked by CountingAllocator. Counts are in elements
// (doubles for factors and optimizer buffers, records for the PID table).
enum class Ledger { factors, pid_state, optimizer };

struct AllocationSnapshot {
    std::int64_t live_elements = 0;
    std::int64_t peak_elements = 0;
    std::int64_t allocations = 0;
};

class AllocationStats {
public:
    void on_allocate(std::size_t count) {
        const auto live = live_.fetch_add(static_cast<std::int64_t>(count)) + static_cast<std::int64_t>(count);
        allocations_.fetch_add(1);
        auto peak = peak_.load();
        while (live > peak && !peak_.compare_exchange_weak(peak, live)) {
        }
    }

    void on_deallocate(std::size_t count) { live_.fetch_sub(static_cast<std::int64_t>(count)); }

    AllocationSnapshot snapshot() const { return {live_.load(), peak_.load(), allocations_.load()}; }

    void reset_peak() { peak_.store(live_.load()); }

private:
    std::atomic<std::int64_t> live_{0};
    std::atomic<std::int64_t> peak_{0};
    std::atomic<std::int64_t> allocations_{0};
};

AllocationStats& allocation_stats(Ledger ledger);

template <class T, Ledger L>
struct CountingAllocator {
    using value_type = T;

    CountingAllocator() noexcept = default;
    template <class U>
    CountingAllocator(const CountingAllocator<U, L>&) noexcept {}

    template <class U>
    struct rebind {
        using other = CountingAllocator<U, L>;
    };

    T* allocate(std::size_t count) {
        T* p = std::allocator<T>{}.allocate(count);
        allocation_stats(L).on_allocate(count);
        return p;
    }

    void deallocate(T* p, std::size_t count) noexcept {
        allocation_stats(L).on_deallocate(count);
        std::allocator<T>{}.deallocate(p, count);
    }

    template <class U>
    bool operator==(const CountingAllocator<U, L>&) const noexcept {
        return true;
    }
};

template <class T, Ledger L>
using TrackedVector = std::vector<T, CountingAllocator<T, L>>;

}  // namespace pidlf
