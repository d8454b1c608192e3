#include "zvass/linalg.hpp"

#include <numeric>

namespace zvass {

RatVec to_rat(const Vec& v) {
    RatVec r;
    r.reserve(v.size());
    for (const auto& x : v) r.emplace_back(x);
    return r;
}

RatMat rref(RatMat rows, std::size_t ncols) {
    std::size_t lead = 0;
    std::size_t r = 0;
    for (std::size_t c = 0; c < ncols && r < rows.size(); ++c) {
        std::size_t piv = r;
        while (piv < rows.size() && rows[piv][c] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[r], rows[piv]);
        Rat inv = 1 / rows[r][c];
        for (auto& x : rows[r]) x *= inv;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i == r || rows[i][c] == 0) continue;
            Rat f = rows[i][c];
            for (std::size_t j = c; j < ncols; ++j) rows[i][j] -= f * rows[r][j];
        }
        ++r;
        lead = c;
    }
    (void)lead;
    rows.resize(r);
    return rows;
}

std::size_t rank_of(const std::vector<Vec>& rows, std::size_t ncols) { return span_basis(rows, ncols).size(); }

RatMat span_basis(const std::vector<Vec>& rows, std::size_t ncols) {
    RatMat m;
    m.reserve(rows.size());
    for (const auto& v : rows) m.push_back(to_rat(v));
    return rref(std::move(m), ncols);
}

bool in_span(const RatMat& basis, const RatVec& v) {
    RatVec w = v;
    for (const auto& row : basis) {
        std::size_t p = 0;
        while (p < row.size() && row[p] == 0) ++p;
        if (p == row.size() || w[p] == 0) continue;
        Rat f = w[p];
        for (std::size_t j = p; j < w.size(); ++j) w[j] -= f * row[j];
    }
    for (const auto& x : w)
        if (x != 0) return false;
    return true;
}

RatMat nullspace(const RatMat& m, std::size_t ncols) {
    RatMat r = rref(m, ncols);
    std::vector<int> pivot_of_col(ncols, -1);
    for (std::size_t i = 0; i < r.size(); ++i) {
        std::size_t p = 0;
        while (r[i][p] == 0) ++p;
        pivot_of_col[p] = static_cast<int>(i);
    }
    RatMat out;
    for (std::size_t f = 0; f < ncols; ++f) {
        if (pivot_of_col[f] >= 0) continue;
        RatVec v(ncols, Rat(0));
        v[f] = 1;
        for (std::size_t c = 0; c < ncols; ++c)
            if (pivot_of_col[c] >= 0) v[c] = -r[pivot_of_col[c]][f];
        out.push_back(std::move(v));
    }
    return out;
}

Vec primitive(const RatVec& v) {
    Int l = 1;
    for (const auto& x : v) l = lcm(l, Int(denominator(x)));
    Vec out;
    Int g = 0;
    for (const auto& x : v) {
        Int y = Int(numerator(x)) * (l / Int(denominator(x)));
        g = gcd(g, y);
        out.push_back(y);
    }
    if (g > 1)
        for (auto& y : out) y /= g;
    return out;
}

bool lattice_solvable(std::vector<Vec> a, const Vec& b, std::size_t ncols) {
    const std::size_t m = a.size();
    std::vector<int> pivot_col(m, -1);
    std::size_t col = 0;
    for (std::size_t i = 0; i < m && col < ncols; ++i) {
        for (std::size_t j = col + 1; j < ncols; ++j) {
            while (a[i][j] != 0) {
                if (a[i][col] == 0) {
                    for (std::size_t r = 0; r < m; ++r) std::swap(a[r][col], a[r][j]);
                    continue;
                }
                Int q = a[i][j] / a[i][col];
                for (std::size_t r = 0; r < m; ++r) a[r][j] -= q * a[r][col];
                if (a[i][j] != 0)
                    for (std::size_t r = 0; r < m; ++r) std::swap(a[r][col], a[r][j]);
            }
        }
        if (a[i][col] != 0) {
            pivot_col[i] = static_cast<int>(col);
            ++col;
        }
    }
    Vec y(ncols, 0);
    for (std::size_t i = 0; i < m; ++i) {
        Int rest = b[i];
        const std::size_t lim = pivot_col[i] >= 0 ? static_cast<std::size_t>(pivot_col[i]) : col;
        for (std::size_t j = 0; j < lim; ++j) rest -= a[i][j] * y[j];
        if (pivot_col[i] < 0) {
            if (rest != 0) return false;
            continue;
        }
        const Int& p = a[i][pivot_col[i]];
        if (rest % p != 0) return false;
        y[pivot_col[i]] = rest / p;
    }
    return true;
}

}  // namespace zvass
