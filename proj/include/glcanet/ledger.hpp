// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <new>

namespace glcanet {

/// Process-wide count of live tensor payload bytes (data and gradients).
/// Every tensor buffer allocates through LedgerAllocator, so `peak()` is the
/// high-water mark of tensor memory since the last `reset_peak()`.
class AllocationLedger {
public:
    static AllocationLedger& instance() noexcept {
        static AllocationLedger ledger;
        return ledger;
    }

    void on_alloc(std::size_t bytes) noexcept {
        const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
        std::size_t seen = peak_.load(std::memory_order_relaxed);
        while (now > seen && !peak_.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
        }
    }

    void on_free(std::size_t bytes) noexcept { current_.fetch_sub(bytes, std::memory_order_relaxed); }

    std::size_t current() const noexcept { return current_.load(std::memory_order_relaxed); }
    std::size_t peak() const noexcept { return peak_.load(std::memory_order_relaxed); }

    /// Starts a new phase: the peak drops to whatever is live right now.
    void reset_peak() noexcept { peak_.store(current(), std::memory_order_relaxed); }

private:
    AllocationLedger() = default;
    std::atomic<std::size_t> current_{0};
    std::atomic<std::size_t> peak_{0};
};

/// Measures the transient peak of one phase: bytes above the level that was
/// live when the phase began.
class PhaseMeter {
public:
    PhaseMeter() : baseline_(AllocationLedger::instance().current()) {
        AllocationLedger::instance().reset_peak();
    }
    std::size_t baseline() const noexcept { return baseline_; }
    std::size_t transient_peak() const noexcept {
        const std::size_t peak = AllocationLedger::instance().peak();
        return peak > baseline_ ? peak - baseline_ : 0;
    }

private:
    std::size_t baseline_;
};

template <class T>
struct LedgerAllocator {
    using value_type = T;

    LedgerAllocator() noexcept = default;
    template <class U>
    LedgerAllocator(const LedgerAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        T* p = std::allocator<T>{}.allocate(n);
        AllocationLedger::instance().on_alloc(n * sizeof(T));
        return p;
    }
    void deallocate(T* p, std::size_t n) noexcept {
        AllocationLedger::instance().on_free(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    template <class U>
    bool operator==(const LedgerAllocator<U>&) const noexcept { return true; }
};

} // namespace glcanet
