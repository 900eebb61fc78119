#pragma once

// Order-fixed reductions and a worker pool whose results never depend on the
// number of workers.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fpension {

/// Neumaier compensated summation. Adding the same values in the same order
/// always gives the same bits.
class CompensatedSum {
public:
    void add(double v);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1)
    double stderr_ = 0.0; // stddev / sqrt(n)
};

Summary summarize(std::span<const double> values);

/// Fraction of values with v > threshold (strict).
double fraction_above(std::span<const double> values, double threshold);
double fraction_below(std::span<const double> values, double threshold);

/// Sorted copy of the sample (empirical CDF support points).
std::vector<double> empirical_cdf(std::span<const double> values);

/// Hardware concurrency, at least 1.
int default_workers();

/// Calls body(i) for i in [0, count) on `workers` threads. Each index is
/// handled exactly once; callers write into per-index slots so the result is
/// independent of scheduling. If bodies throw, the exception of the lowest
/// failing index is rethrown on the calling thread after all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace fpension
