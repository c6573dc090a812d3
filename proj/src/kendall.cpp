#include "philautia/kendall.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "philautia/errors.hpp"

namespace philautia {

namespace {

void check_lengths(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ValidationError("rank inputs differ in length: " + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()));
    if (x.size() < 2)
        throw ValidationError("rank correlation needs at least 2 observations");
}

long long tied_pairs(long long run) { return run * (run - 1) / 2; }

// Counts strict inversions in v (pairs i<j with v[i] > v[j]) by merge sort.
long long merge_count_inversions(std::vector<double>& v, std::vector<double>& buf,
                                 std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    long long inv = merge_count_inversions(v, buf, lo, mid) +
                    merge_count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += static_cast<long long>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
    return inv;
}

} // namespace

PairCounts count_pairs(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y);
    PairCounts c;
    c.n = x.size();
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const bool tx = x[i] == x[j];
            const bool ty = y[i] == y[j];
            if (tx && ty) ++c.ties_both;
            else if (tx) ++c.ties_x_only;
            else if (ty) ++c.ties_y_only;
            else if ((x[i] < x[j]) == (y[i] < y[j])) ++c.concordant;
            else ++c.discordant;
        }
    return c;
}

PairCounts count_pairs_fast(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y);
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // n1: pairs tied in x; n2: tied in y; n3: tied in both.
    long long n1 = 0, n3 = 0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && x[idx[j]] == x[idx[i]]) ++j;
            n1 += tied_pairs(static_cast<long long>(j - i));
            std::size_t a = i;
            while (a < j) {
                std::size_t b = a;
                while (b < j && y[idx[b]] == y[idx[a]]) ++b;
                n3 += tied_pairs(static_cast<long long>(b - a));
                a = b;
            }
            i = j;
        }
    }
    long long n2 = 0;
    {
        std::vector<double> ys(y);
        std::sort(ys.begin(), ys.end());
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && ys[j] == ys[i]) ++j;
            n2 += tied_pairs(static_cast<long long>(j - i));
            i = j;
        }
    }

    // With x-ties grouped and y ascending inside each group, every strict
    // y-inversion has strictly increasing x, so inversions == discordant.
    std::vector<double> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = y[idx[i]];
    std::vector<double> buf(n);
    const long long disc = merge_count_inversions(perm, buf, 0, n);

    PairCounts c;
    c.n = n;
    const long long n0 = c.total_pairs();
    c.discordant = disc;
    c.concordant = n0 - n1 - n2 + n3 - disc;
    c.ties_x_only = n1 - n3;
    c.ties_y_only = n2 - n3;
    c.ties_both = n3;
    return c;
}

std::size_t distinct_values(const std::vector<double>& v) {
    std::vector<double> s(v);
    std::sort(s.begin(), s.end());
    return static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
}

namespace {

PairCounts counts_for(const std::vector<double>& x, const std::vector<double>& y) {
    // Same integers either way; the threshold only picks the cheaper path.
    return x.size() >= 1024 ? count_pairs_fast(x, y) : count_pairs(x, y);
}

void check_not_all_tied(const std::vector<double>& x, const std::vector<double>& y) {
    if (distinct_values(x) < 2) throw DegeneracyError("rank correlation undefined: x is all tied");
    if (distinct_values(y) < 2) throw DegeneracyError("rank correlation undefined: y is all tied");
}

} // namespace

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y);
    check_not_all_tied(x, y);
    const PairCounts c = counts_for(x, y);
    const double dx = static_cast<double>(c.concordant + c.discordant + c.ties_x_only);
    const double dy = static_cast<double>(c.concordant + c.discordant + c.ties_y_only);
    return static_cast<double>(c.concordant - c.discordant) / std::sqrt(dx * dy);
}

double kendall_tau_c(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y);
    check_not_all_tied(x, y);
    const PairCounts c = counts_for(x, y);
    const auto m = static_cast<double>(std::min(distinct_values(x), distinct_values(y)));
    const auto n = static_cast<double>(c.n);
    return 2.0 * m * static_cast<double>(c.concordant - c.discordant) / (n * n * (m - 1.0));
}

} // namespace philautia
