#include "fpension/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace fpension {

void CompensatedSum::add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
        comp_ += (sum_ - t) + v;
    } else {
        comp_ += (v - t) + sum_;
    }
    sum_ = t;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    CompensatedSum total;
    for (double v : values) total.add(v);
    s.mean = total.value() / static_cast<double>(values.size());
    if (values.size() > 1) {
        CompensatedSum sq;
        for (double v : values) sq.add((v - s.mean) * (v - s.mean));
        s.stddev = std::sqrt(sq.value() / static_cast<double>(values.size() - 1));
        s.stderr_ = s.stddev / std::sqrt(static_cast<double>(values.size()));
    }
    return s;
}

double fraction_above(std::span<const double> values, double threshold) {
    if (values.empty()) return 0.0;
    const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v > threshold; });
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

double fraction_below(std::span<const double> values, double threshold) {
    if (values.empty()) return 0.0;
    const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; });
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

std::vector<double> empirical_cdf(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted;
}

int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
    if (count == 0) return;
    const auto n_threads = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(count)));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    // Indices are handed out in increasing order and every started body runs
    // to completion, so the lowest failing index is the same for any worker
    // count. That is the error reported.
    std::exception_ptr error;
    std::size_t error_index = count;
    std::mutex error_mutex;
    auto run = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace fpension
