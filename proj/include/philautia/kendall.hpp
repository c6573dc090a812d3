#pragma once

#include <cstddef>
#include <vector>

namespace philautia {

// Bookkeeping over all n(n-1)/2 unordered index pairs.
// Invariant: concordant + discordant + ties_x_only + ties_y_only + ties_both
// equals n(n-1)/2.
struct PairCounts {
    long long concordant = 0;
    long long discordant = 0;
    long long ties_x_only = 0;
    long long ties_y_only = 0;
    long long ties_both = 0;
    std::size_t n = 0;

    long long total_pairs() const {
        return static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    }
};

// Exact O(n^2) pair enumeration. The reference implementation.
PairCounts count_pairs(const std::vector<double>& x, const std::vector<double>& y);

// O(n log n) merge-sort path. Produces counts identical to count_pairs.
PairCounts count_pairs_fast(const std::vector<double>& x, const std::vector<double>& y);

std::size_t distinct_values(const std::vector<double>& v);

// tau_b = (C-D)/sqrt((C+D+Tx)(C+D+Ty)). Throws ValidationError on length
// mismatch or n < 2, DegeneracyError when x or y is all tied.
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

// tau_c = 2m(C-D)/(n^2(m-1)) with m = min(distinct levels of x, of y).
// Same errors as tau_b; all-tied input is exactly the m < 2 case.
double kendall_tau_c(const std::vector<double>& x, const std::vector<double>& y);

} // namespace philautia
