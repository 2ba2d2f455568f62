#include "metrics.hpp"

#include <cmath>
#include <limits>

namespace bn2mf {

namespace {

// Jonker-Volgenant style shortest augmenting path assignment, O(n^3).
// Returns row_to_col minimizing the total cost; costs may be negative.
std::vector<int> solve_assignment(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // col -> row (1-based)
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = match[static_cast<std::size_t>(j0)];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (match[static_cast<std::size_t>(j)] > 0)
            row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

Vector column_norms(const Matrix& m) {
    Vector norms(m.cols());
    for (Index j = 0; j < m.cols(); ++j) norms(j) = m.col(j).norm();
    return norms;
}

// Orthonormal basis of the column span via rank-revealing QR.
Matrix orthonormal_basis(const Matrix& m, double tol) {
    if (m.cols() == 0) return Matrix(m.rows(), 0);
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    qr.setThreshold(tol);
    const Index rank = qr.rank();
    if (rank == 0) return Matrix(m.rows(), 0);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), rank);
    return q;
}

}  // namespace

double relative_error(const Matrix& truth, const Matrix& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw std::invalid_argument("relative_error: dimensions disagree");
    const double denom = truth.norm();
    if (denom == 0.0) throw std::invalid_argument("relative_error: truth is all zero");
    return (truth - estimate).norm() / denom;
}

double cosine_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_distance: lengths disagree");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine_distance: zero vector");
    return 1.0 - a.dot(b) / (na * nb);
}

double cosine_distance_columns(const Matrix& truth, const Matrix& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw std::invalid_argument("cosine_distance: dimensions disagree");
    double total = 0.0;
    for (Index j = 0; j < truth.cols(); ++j)
        total += cosine_distance(truth.col(j), estimate.col(j));
    return total / static_cast<double>(truth.cols());
}

Alignment align(const Matrix& truth, const Matrix& estimate, bool allow_sign) {
    if (truth.cols() != estimate.cols())
        throw std::invalid_argument("align: column counts disagree");
    const int k = static_cast<int>(truth.cols());
    if (k == 0) throw std::invalid_argument("align: no columns");

    const Vector tn = column_norms(truth);
    const Vector en = column_norms(estimate);
    for (Index j = 0; j < k; ++j)
        if (tn(j) == 0.0 || en(j) == 0.0)
            throw std::invalid_argument("align: zero-norm column " + std::to_string(j));

    Matrix sim = truth.transpose() * estimate;
    sim.array().colwise() /= tn.array();
    sim.array().rowwise() /= en.transpose().array();
    const Matrix keyed = allow_sign ? sim.cwiseAbs() : sim;

    const std::vector<int> perm = solve_assignment((-keyed).eval());

    Alignment out;
    out.permutation = perm;
    out.signs.assign(static_cast<std::size_t>(k), 1.0);
    for (int t = 0; t < k; ++t) {
        const int e = perm[static_cast<std::size_t>(t)];
        if (allow_sign && sim(t, e) < 0.0) out.signs[static_cast<std::size_t>(t)] = -1.0;
        out.objective += keyed(t, e);
    }
    return out;
}

Matrix apply_alignment(const Matrix& estimate, const Alignment& alignment) {
    const int k = static_cast<int>(alignment.permutation.size());
    if (estimate.cols() != k)
        throw std::invalid_argument("apply_alignment: column counts disagree");
    Matrix out(estimate.rows(), k);
    for (int t = 0; t < k; ++t)
        out.col(t) = alignment.signs[static_cast<std::size_t>(t)] *
                     estimate.col(alignment.permutation[static_cast<std::size_t>(t)]);
    return out;
}

double subspace_distance(const Matrix& u_basis, const Matrix& v_basis) {
    if (u_basis.rows() != v_basis.rows())
        throw std::invalid_argument("subspace_distance: ambient dimensions disagree");
    constexpr double kRankTol = 1e-10;
    const Matrix u = orthonormal_basis(u_basis, kRankTol);
    const Matrix v = orthonormal_basis(v_basis, kRankTol);
    const Index m = u.cols();
    const Index n = v.cols();
    if (m == 0 && n == 0) return 0.0;
    const double dim = static_cast<double>(std::max(m, n));
    const double overlap = (u.transpose() * v).squaredNorm();
    return std::sqrt(std::max(0.0, dim - overlap)) / std::sqrt(dim);
}

}  // namespace bn2mf
