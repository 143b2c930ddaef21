#pragma once

#include <atomic>
#include <concepts>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "seqdb/core.hpp"

namespace seqdb::parexec {

/// Aggregate plug-in contract: initialize / accumulate / merge / terminate.
/// Contracts run data-parallel exactly like built-in aggregates, so merge
/// must be associative and commutative over reachable states and
/// terminate(merge(a,b)) must not depend on merge order. Those laws are
/// checked by property tests, not at runtime.
template <typename C, typename Row>
concept AggregateContract = requires(const C c, typename C::State s, typename C::State s2,
                                     const Row& row) {
    { c.init() } -> std::same_as<typename C::State>;
    c.accumulate(s, row);
    c.merge(s, std::move(s2));
    c.terminate(std::move(s));
};

/// How rows are routed to workers. With no splitter, rows are handed out as
/// k contiguous index ranges (valid whenever merge is commutative); a
/// splitter maps each row to exactly one partition. States are always
/// merged in ascending partition order so results are byte-reproducible.
template <typename Row>
struct PartitionPlan {
    std::size_t worker_count = 1;
    std::function<std::size_t(const Row&)> splitter;  // empty = contiguous blocks
    bool ordered_merge = true;

    static PartitionPlan blocks(std::size_t k) { return PartitionPlan{k, nullptr, true}; }
    static PartitionPlan hashed(std::size_t k, std::function<std::size_t(const Row&)> h) {
        return PartitionPlan{k, std::move(h), true};
    }
};

inline std::size_t default_worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

namespace detail {

template <typename F>
void run_workers(std::size_t n, F&& body) {
    if (n == 1) {
        body(0);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        threads.emplace_back([&, w] {
            try {
                body(w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);  // first failure, in worker order
}

}  // namespace detail

/// Folds all rows through the contract across plan.worker_count partitions
/// and terminates the merged state. The result equals a sequential fold in
/// any order and is identical for every worker count.
template <typename Row, typename Contract>
    requires AggregateContract<Contract, Row>
auto run_parallel(std::span<const Row> rows, const Contract& contract,
                  const PartitionPlan<Row>& plan) {
    const std::size_t k = std::max<std::size_t>(1, plan.worker_count);
    using State = typename Contract::State;

    std::vector<State> states;
    states.reserve(k);
    for (std::size_t w = 0; w < k; ++w) states.push_back(contract.init());

    if (!plan.splitter) {
        // contiguous index ranges
        detail::run_workers(k, [&](std::size_t w) {
            const std::size_t begin = rows.size() * w / k;
            const std::size_t end = rows.size() * (w + 1) / k;
            for (std::size_t i = begin; i < end; ++i) contract.accumulate(states[w], rows[i]);
        });
    } else {
        std::vector<std::vector<const Row*>> buckets(k);
        for (const Row& r : rows) buckets[plan.splitter(r) % k].push_back(&r);
        detail::run_workers(k, [&](std::size_t w) {
            for (const Row* r : buckets[w]) contract.accumulate(states[w], *r);
        });
    }

    State merged = std::move(states[0]);
    for (std::size_t w = 1; w < k; ++w) contract.merge(merged, std::move(states[w]));
    return contract.terminate(std::move(merged));
}

/// Runs `task(range_index)` for contiguous, ordered ranges on up to
/// `workers` threads and hands the per-range results, in range order, to
/// the finalizer. Equals sequential single-range execution by construction.
template <typename Task, typename Finalizer>
auto run_parallel_ordered(std::size_t range_count, std::size_t workers, Task task,
                          Finalizer finalize) {
    using R = decltype(task(std::size_t{0}));
    std::vector<R> results(range_count);
    if (range_count > 0) {
        const std::size_t n = std::min(std::max<std::size_t>(1, workers), range_count);
        std::atomic<std::size_t> next{0};
        detail::run_workers(n, [&](std::size_t) {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= range_count) return;
                results[i] = task(i);
            }
        });
    }
    return finalize(std::move(results));
}

/// Wall-time observations per phase and worker count. Speedups are
/// reported, never asserted; the TSV is the exchange format.
class TimingReport {
public:
    void add(std::string phase, std::size_t k, double millis) {
        rows_.push_back({std::move(phase), k, millis});
    }

    std::string to_tsv() const {
        std::string out = "phase\tk\tmillis\n";
        for (const auto& r : rows_) {
            out += r.phase;
            out += '\t';
            out += std::to_string(r.k);
            out += '\t';
            out += std::to_string(r.millis);
            out += '\n';
        }
        return out;
    }

    bool empty() const noexcept { return rows_.empty(); }

private:
    struct Row {
        std::string phase;
        std::size_t k;
        double millis;
    };
    std::vector<Row> rows_;
};

}  // namespace seqdb::parexec
